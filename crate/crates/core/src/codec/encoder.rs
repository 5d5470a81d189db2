//! Minimal intra coder: DC prediction, 8×8 DCT, uniform quantization and an
//! exp-Golomb bit-cost model. No bitstream is produced; only the estimated
//! cost and the reconstruction.

use super::frame::{Frame, Rect};
use super::qp::Qp;
use super::transform::{self, N};
use crate::error::{Error, Result};

/// Rounding offset of the dead-zone quantizer.
pub const ROUNDING_OFFSET: f64 = 1.0 / 3.0;

/// Prediction value used when a CU has no coded neighbours.
pub const EDGE_PREDICTION: u8 = 128;

#[derive(Debug, Clone, PartialEq)]
pub struct CuEncodeResult {
    pub bits: f64,
    pub bpp: f64,
    /// Reconstructed samples of the valid (in-frame) area, row-major.
    pub reconstruction: Vec<u8>,
    pub width: usize,
    pub height: usize,
    pub mse: f64,
}

/// Where a CU sits: its DC predictor and how much of the padded block is real.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CuContext {
    pub prediction: u8,
    pub valid_width: usize,
    pub valid_height: usize,
}

impl CuContext {
    /// A full CU with no coded neighbours.
    pub fn isolated(size: usize) -> Self {
        CuContext {
            prediction: EDGE_PREDICTION,
            valid_width: size,
            valid_height: size,
        }
    }
}

/// Rounded mean of the available reconstructed border samples.
pub fn dc_prediction(top: Option<&[u8]>, left: Option<&[u8]>) -> u8 {
    let (sum, n) = top
        .into_iter()
        .chain(left)
        .flatten()
        .fold((0u64, 0u64), |(s, n), &v| (s + v as u64, n + 1));
    if n == 0 {
        EDGE_PREDICTION
    } else {
        ((sum + n / 2) / n) as u8
    }
}

/// Code length of the signed exp-Golomb (k = 0) codeword for `level`.
#[inline]
pub fn signed_exp_golomb_bits(level: i32) -> u32 {
    let mapped = if level > 0 {
        2 * level as u64 - 1
    } else {
        2 * (-(level as i64)) as u64
    };
    2 * (mapped + 1).ilog2() + 1
}

#[inline]
pub fn quantize(coeff: f64, qstep: f64) -> i32 {
    let level = (coeff.abs() / qstep + ROUNDING_OFFSET).floor() as i32;
    if coeff < 0.0 {
        -level
    } else {
        level
    }
}

/// Encode one `size`×`size` CU block at `qp`.
///
/// Sub-blocks are 8×8. Each sub-block touching the valid area costs a one-bit
/// significance flag, plus the exp-Golomb lengths of all 64 levels when any
/// level is non-zero. Samples outside the valid area contribute zero residual.
pub fn encode_cu(block: &[u8], size: usize, qp: Qp, ctx: &CuContext) -> Result<CuEncodeResult> {
    if size == 0 || size % N != 0 {
        return Err(Error::invalid(format!("cu size {size} is not a multiple of {N}")));
    }
    if block.len() != size * size {
        return Err(Error::invalid(format!(
            "block has {} samples, expected {size}x{size}",
            block.len()
        )));
    }
    let (vw, vh) = (ctx.valid_width, ctx.valid_height);
    if vw == 0 || vh == 0 || vw > size || vh > size {
        return Err(Error::invalid(format!("valid area {vw}x{vh} for a {size}x{size} block")));
    }

    let qstep = qp.qstep();
    let pred = ctx.prediction as f64;
    let mut recon = vec![0u8; vw * vh];
    let mut bits = 0.0;
    let mut sse = 0.0;

    for by in (0..vh).step_by(N) {
        for bx in (0..vw).step_by(N) {
            let mut residual = [0.0; N * N];
            for r in 0..N {
                for c in 0..N {
                    let (y, x) = (by + r, bx + c);
                    if y < vh && x < vw {
                        residual[r * N + c] = block[y * size + x] as f64 - pred;
                    }
                }
            }
            let coeffs = transform::forward(&residual);
            let mut levels = [0i32; N * N];
            let mut significant = false;
            for (l, &c) in levels.iter_mut().zip(coeffs.iter()) {
                *l = quantize(c, qstep);
                significant |= *l != 0;
            }

            bits += 1.0;
            let rec_residual = if significant {
                bits += levels.iter().map(|&l| signed_exp_golomb_bits(l) as f64).sum::<f64>();
                let mut deq = [0.0; N * N];
                for (d, &l) in deq.iter_mut().zip(levels.iter()) {
                    *d = l as f64 * qstep;
                }
                transform::inverse(&deq)
            } else {
                [0.0; N * N]
            };

            for r in 0..N {
                for c in 0..N {
                    let (y, x) = (by + r, bx + c);
                    if y < vh && x < vw {
                        let v = (pred + rec_residual[r * N + c]).round().clamp(0.0, 255.0);
                        let v = v as u8;
                        recon[y * vw + x] = v;
                        let d = v as f64 - block[y * size + x] as f64;
                        sse += d * d;
                    }
                }
            }
        }
    }

    let pixels = (vw * vh) as f64;
    Ok(CuEncodeResult {
        bits,
        bpp: bits / pixels,
        reconstruction: recon,
        width: vw,
        height: vh,
        mse: sse / pixels,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameEncodeResult {
    pub cus: Vec<CuEncodeResult>,
    pub qps: Vec<Qp>,
    pub reconstruction: Frame,
    pub total_bits: f64,
}

impl FrameEncodeResult {
    pub fn bpp(&self) -> f64 {
        self.total_bits / self.reconstruction.pixel_count() as f64
    }

    pub fn mse(&self) -> f64 {
        let n = self.reconstruction.pixel_count() as f64;
        self.cus
            .iter()
            .map(|cu| cu.mse * (cu.width * cu.height) as f64)
            .sum::<f64>()
            / n
    }
}

pub fn encode_frame_uniform(frame: &Frame, qp: Qp) -> FrameEncodeResult {
    let qps = vec![qp; frame.cu_count()];
    encode_frame_with_qpmap(frame, &qps).expect("uniform qp map always matches the grid")
}

/// Encode all CUs in raster order; each CU predicts from already
/// reconstructed neighbours.
pub fn encode_frame_with_qpmap(frame: &Frame, qpmap: &[Qp]) -> Result<FrameEncodeResult> {
    let count = frame.cu_count();
    if qpmap.len() != count {
        return Err(Error::invalid(format!(
            "qp map has {} entries, frame has {count} CUs",
            qpmap.len()
        )));
    }
    let size = frame.ctu_size();
    let mut recon = Frame::with_ctu_size(
        frame.width(),
        frame.height(),
        vec![0; frame.pixel_count()],
        size,
    )?;
    let mut cus = Vec::with_capacity(count);
    let mut total_bits = 0.0;
    for (index, &qp) in qpmap.iter().enumerate() {
        let rect = frame.cu_rect(index);
        let ctx = CuContext {
            prediction: border_prediction(&recon, rect),
            valid_width: rect.width,
            valid_height: rect.height,
        };
        let block = frame.padded_block(rect);
        let result = encode_cu(&block, size, qp, &ctx)?;
        recon.put_block(rect, &result.reconstruction);
        total_bits += result.bits;
        cus.push(result);
    }
    Ok(FrameEncodeResult {
        cus,
        qps: qpmap.to_vec(),
        reconstruction: recon,
        total_bits,
    })
}

fn border_prediction(recon: &Frame, rect: Rect) -> u8 {
    let top: Option<Vec<u8>> = (rect.y > 0).then(|| {
        (rect.x..rect.x + rect.width)
            .map(|x| recon.at(x, rect.y - 1))
            .collect()
    });
    let left: Option<Vec<u8>> = (rect.x > 0).then(|| {
        (rect.y..rect.y + rect.height)
            .map(|y| recon.at(rect.x - 1, y))
            .collect()
    });
    dc_prediction(top.as_deref(), left.as_deref())
}
