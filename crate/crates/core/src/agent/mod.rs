//! Deep Q-learning over the CU decision process, on a small in-repo
//! tensor substrate (conv, dense, leaky ReLU, Adam) with finite-difference
//! gradient checks.

mod adam;
mod dqn;
pub mod gradcheck;
pub mod layers;
mod model_io;
mod network;
mod replay;
mod scalar;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use dqn::{
    argmax, infer_qpmap, regression_loss_and_gradients, select_action, sync_target, target_maxima, td_loss_and_gradients, td_update, train, LogRow, TrainConfig,
    TrainingLog,
};
pub use model_io::{decode_model, encode_model, load_model, save_model, ModelMeta, MODEL_MAGIC, MODEL_VERSION};
pub use network::{Activations, Gradients, QNetConfig, QNetwork, StateBatch, INPUT_CHANNELS, LEAKY_SLOPE};
pub use replay::{ReplayBuffer, Transition, REPLAY_CAPACITY};
pub use scalar::{gemm, Mat, Real};
pub use tensor::Tensor;
