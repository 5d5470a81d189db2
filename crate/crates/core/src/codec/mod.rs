//! Simplified block-based intra codec and its rate-distortion analytics.

mod encoder;
mod frame;
mod qp;
mod rd;
pub mod transform;

pub use encoder::{
    dc_prediction, encode_cu, encode_frame_uniform, encode_frame_with_qpmap, quantize,
    signed_exp_golomb_bits, CuContext, CuEncodeResult, FrameEncodeResult, EDGE_PREDICTION,
    ROUNDING_OFFSET,
};
pub use frame::{Frame, Rect, DEFAULT_CTU_SIZE};
pub use qp::{Qp, ACTION_COUNT, ACTION_QP_MAX, ACTION_QP_MIN};
pub use rd::{fit_hyperbolic_rd, lambda_to_qp, qp_to_lambda, HyperbolicRdModel};
