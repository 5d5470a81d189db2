//! Forward and backward passes of the building blocks. Activations are
//! stored feature-major: `[C, N, H, W]` for images and `[F, N]` for
//! vectors, so each layer's matrix product lands directly in the layout
//! the next one reads.

use super::scalar::{gemm, Mat, Real};
use super::tensor::Tensor;

pub const KERNEL: usize = 3;
pub const STRIDE: usize = 2;
pub const PAD: usize = 1;

/// Weight and bias of a conv or dense layer. The weight is read as an
/// `[out, fan_in]` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Real> Linear<T> {
    pub fn dense(inputs: usize, outputs: usize) -> Self {
        Linear {
            weight: Tensor::zeros(&[outputs, inputs]),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn conv(in_channels: usize, out_channels: usize) -> Self {
        Linear {
            weight: Tensor::zeros(&[out_channels, in_channels, KERNEL, KERNEL]),
            bias: Tensor::zeros(&[out_channels]),
        }
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn fan_in(&self) -> usize {
        self.weight.len() / self.outputs()
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn zeros_like(&self) -> Self {
        Linear {
            weight: self.weight.zeros_like(),
            bias: self.bias.zeros_like(),
        }
    }

    fn weight_mat(&self) -> Mat<'_, T> {
        Mat::new(self.weight.data(), self.outputs(), self.fan_in())
    }

    /// `y = W·x + b` for `x` of shape `[fan_in, cols]`.
    pub fn forward(&self, x: &[T], cols: usize) -> Vec<T> {
        let mut y = vec![T::zero(); self.outputs() * cols];
        gemm(self.weight_mat(), Mat::new(x, self.fan_in(), cols), &mut y, false);
        for (row, &b) in y.chunks_exact_mut(cols).zip(self.bias.data()) {
            row.iter_mut().for_each(|v| *v += b);
        }
        y
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`
    /// when `want_input` is set.
    pub fn backward(&self, x: &[T], dy: &[T], cols: usize, grad: &mut Linear<T>, want_input: bool) -> Option<Vec<T>> {
        let (o, f) = (self.outputs(), self.fan_in());
        gemm(Mat::new(dy, o, cols), Mat::new(x, f, cols).t(), grad.weight.data_mut(), true);
        for (g, row) in grad.bias.data_mut().iter_mut().zip(dy.chunks_exact(cols)) {
            *g += row.iter().copied().sum::<T>();
        }
        want_input.then(|| {
            let mut dx = vec![T::zero(); f * cols];
            gemm(self.weight_mat().t(), Mat::new(dy, o, cols), &mut dx, false);
            dx
        })
    }
}

pub fn conv_out_size(size: usize) -> usize {
    (size + 2 * PAD - KERNEL) / STRIDE + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvShape {
    pub channels: usize,
    pub batch: usize,
    pub height: usize,
    pub width: usize,
}

impl ConvShape {
    pub fn out_height(&self) -> usize {
        conv_out_size(self.height)
    }
    pub fn out_width(&self) -> usize {
        conv_out_size(self.width)
    }
    /// Columns of the unfolded input: one per output position.
    pub fn positions(&self) -> usize {
        self.batch * self.out_height() * self.out_width()
    }
}

/// Output columns `ox` whose input column `2·ox + kx − 1` lies inside a
/// row of `width` samples.
fn valid_columns(kx: usize, width: usize, out_width: usize) -> std::ops::Range<usize> {
    let first = if kx < PAD { 1 } else { 0 };
    // 2·ox + kx − 1 ≤ width − 1
    let last = ((width + PAD - kx - 1) / STRIDE + 1).min(out_width);
    first..last.max(first)
}

/// Unfold `[C, N, H, W]` into `[C·9, N·OH·OW]`.
pub fn im2col<T: Real>(input: &[T], s: ConvShape) -> Vec<T> {
    let (oh, ow) = (s.out_height(), s.out_width());
    let npos = s.positions();
    let plane = s.height * s.width;
    let mut cols = vec![T::zero(); s.channels * KERNEL * KERNEL * npos];
    for c in 0..s.channels {
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = &mut cols[((c * KERNEL + ky) * KERNEL + kx) * npos..][..npos];
                let xs = valid_columns(kx, s.width, ow);
                for n in 0..s.batch {
                    let src_plane = &input[(c * s.batch + n) * plane..][..plane];
                    for oy in 0..oh {
                        let iy = oy * STRIDE + ky;
                        if iy < PAD || iy - PAD >= s.height {
                            continue;
                        }
                        let src = &src_plane[(iy - PAD) * s.width..][..s.width];
                        let dst = &mut row[(n * oh + oy) * ow..][..ow];
                        let from = xs.start * STRIDE + kx - PAD;
                        for (d, &v) in dst[xs.clone()].iter_mut().zip(src[from..].iter().step_by(STRIDE)) {
                            *d = v;
                        }
                    }
                }
            }
        }
    }
    cols
}

/// Adjoint of [`im2col`].
pub fn col2im<T: Real>(cols: &[T], s: ConvShape) -> Vec<T> {
    let (oh, ow) = (s.out_height(), s.out_width());
    let npos = s.positions();
    let plane = s.height * s.width;
    let mut out = vec![T::zero(); s.channels * s.batch * plane];
    for c in 0..s.channels {
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = &cols[((c * KERNEL + ky) * KERNEL + kx) * npos..][..npos];
                let xs = valid_columns(kx, s.width, ow);
                for n in 0..s.batch {
                    let dst_plane = &mut out[(c * s.batch + n) * plane..][..plane];
                    for oy in 0..oh {
                        let iy = oy * STRIDE + ky;
                        if iy < PAD || iy - PAD >= s.height {
                            continue;
                        }
                        let src = &row[(n * oh + oy) * ow..][..ow];
                        let dst = &mut dst_plane[(iy - PAD) * s.width..][..s.width];
                        let from = xs.start * STRIDE + kx - PAD;
                        for (d, &v) in dst[from..].iter_mut().step_by(STRIDE).zip(&src[xs.clone()]) {
                            *d += v;
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn leaky_relu<T: Real>(x: &mut [T], slope: T) {
    for v in x {
        if *v < T::zero() {
            *v *= slope;
        }
    }
}

/// Backward through a leaky ReLU given its output.
pub fn leaky_relu_backward<T: Real>(grad: &mut [T], output: &[T], slope: T) {
    for (g, &y) in grad.iter_mut().zip(output) {
        if y <= T::zero() {
            *g *= slope;
        }
    }
}

/// `[C, N, P]` to `[C·P, N]`.
pub fn flatten<T: Real>(x: &[T], channels: usize, batch: usize, plane: usize) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    for c in 0..channels {
        for n in 0..batch {
            for p in 0..plane {
                out[(c * plane + p) * batch + n] = x[(c * batch + n) * plane + p];
            }
        }
    }
    out
}

pub fn unflatten<T: Real>(x: &[T], channels: usize, batch: usize, plane: usize) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    for c in 0..channels {
        for n in 0..batch {
            for p in 0..plane {
                out[(c * batch + n) * plane + p] = x[(c * plane + p) * batch + n];
            }
        }
    }
    out
}
