use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::layers::{self, conv_out_size, im2col, leaky_relu, leaky_relu_backward, ConvShape, Linear};
use super::scalar::Real;
use crate::codec::ACTION_COUNT;
use crate::env::{slot, CuState, GLOBAL_FEATURES, PATCH_SIZE};
use crate::error::{Error, Result};

pub const INPUT_CHANNELS: usize = 2;
pub const LEAKY_SLOPE: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QNetConfig {
    pub patch: usize,
    pub conv_channels: [usize; 4],
    pub local_width: usize,
    pub global_inputs: usize,
    pub global_width: usize,
    pub hidden_width: usize,
    pub actions: usize,
    /// When false the global feature branch is removed and the hidden
    /// layer sees only the local branch.
    pub global_branch: bool,
    pub leaky_slope: f64,
}

impl Default for QNetConfig {
    fn default() -> Self {
        QNetConfig {
            patch: PATCH_SIZE,
            conv_channels: [16, 32, 64, 64],
            local_width: 128,
            global_inputs: GLOBAL_FEATURES,
            global_width: 128,
            hidden_width: 256,
            actions: ACTION_COUNT,
            global_branch: true,
            leaky_slope: LEAKY_SLOPE,
        }
    }
}

impl QNetConfig {
    pub fn without_global_branch(self) -> Self {
        QNetConfig {
            global_branch: false,
            ..self
        }
    }

    /// Side length of the last conv feature map.
    pub fn feature_side(&self) -> usize {
        (0..4).fold(self.patch, |s, _| conv_out_size(s))
    }

    pub fn flat_features(&self) -> usize {
        self.conv_channels[3] * self.feature_side().pow(2)
    }

    fn hidden_inputs(&self) -> usize {
        self.local_width + if self.global_branch { self.global_width } else { 0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch == 0 || self.conv_channels.contains(&0) || self.local_width == 0 || self.hidden_width == 0 || self.actions == 0 {
            return Err(Error::invalid("network widths must be positive"));
        }
        if self.global_branch && (self.global_inputs == 0 || self.global_width == 0) {
            return Err(Error::invalid("global branch widths must be positive"));
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return Err(Error::invalid("leaky slope must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// One minibatch in network layout.
#[derive(Debug, Clone)]
pub struct StateBatch<T> {
    pub len: usize,
    /// `[2, N, P, P]`: luma then map.
    pub patches: Vec<T>,
    /// `[G, N]`.
    pub globals: Vec<T>,
}

impl<T: Real> StateBatch<T> {
    pub fn new(states: &[&CuState], config: &QNetConfig) -> Result<Self> {
        let n = states.len();
        let plane = config.patch * config.patch;
        let mut patches = vec![T::zero(); INPUT_CHANNELS * n * plane];
        let mut globals = vec![T::zero(); config.global_inputs * n];
        for (i, s) in states.iter().enumerate() {
            if s.luma_patch.len() != plane || s.map_patch.len() != plane {
                return Err(Error::invalid(format!(
                    "state patch has {} samples, network expects {plane}",
                    s.luma_patch.len()
                )));
            }
            for (c, src) in [&s.luma_patch, &s.map_patch].into_iter().enumerate() {
                let dst = &mut patches[(c * n + i) * plane..][..plane];
                for (d, &v) in dst.iter_mut().zip(src.iter()) {
                    *d = T::of(v as f64);
                }
            }
            let g = s.globals.as_slice();
            if g.len() < config.global_inputs {
                return Err(Error::invalid("state has too few global features"));
            }
            for (f, &v) in g.iter().take(config.global_inputs).enumerate() {
                globals[f * n + i] = T::of(v);
            }
        }
        Ok(StateBatch { len: n, patches, globals })
    }
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Activations<T> {
    pub len: usize,
    conv_in: Vec<ConvShape>,
    conv_cols: Vec<Vec<T>>,
    conv_out: Vec<Vec<T>>,
    local_in: Vec<T>,
    local_out: Vec<T>,
    global_in: Vec<T>,
    global_out: Vec<T>,
    hidden_in: Vec<T>,
    hidden_out: Vec<T>,
    /// `[A, N]`.
    pub q: Vec<T>,
}

impl<T: Real> Activations<T> {
    pub fn q_of(&self, sample: usize, action: usize) -> T {
        self.q[action * self.len + sample]
    }

    pub fn q_row(&self, sample: usize, actions: usize) -> Vec<T> {
        (0..actions).map(|a| self.q_of(sample, a)).collect()
    }

    /// Which side of the leaky-ReLU kink every hidden unit is on.
    pub fn sign_pattern(&self) -> Vec<bool> {
        self.conv_out
            .iter()
            .flatten()
            .chain(&self.local_out)
            .chain(&self.global_out)
            .chain(&self.hidden_out)
            .map(|&v| v > T::zero())
            .collect()
    }
}

/// Q-network: a strided conv branch over the patches and a dense branch
/// over the global features, joined by one hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork<T> {
    config: QNetConfig,
    convs: Vec<Linear<T>>,
    local: Linear<T>,
    global: Option<Linear<T>>,
    hidden: Linear<T>,
    output: Linear<T>,
}

/// Gradients with the same layout as the network's parameters.
pub type Gradients<T> = Vec<Linear<T>>;

impl<T: Real> QNetwork<T> {
    /// Zero-initialized network of the given shape.
    pub fn zeros(config: QNetConfig) -> Result<Self> {
        config.validate()?;
        let mut convs = Vec::with_capacity(4);
        let mut c_in = INPUT_CHANNELS;
        for &c in &config.conv_channels {
            convs.push(Linear::conv(c_in, c));
            c_in = c;
        }
        Ok(QNetwork {
            config,
            convs,
            local: Linear::dense(config.flat_features(), config.local_width),
            global: config
                .global_branch
                .then(|| Linear::dense(config.global_inputs, config.global_width)),
            hidden: Linear::dense(config.hidden_inputs(), config.hidden_width),
            output: Linear::dense(config.hidden_width, config.actions),
        })
    }

    /// Weights drawn from `N(0, gain²/fan_in)`, biases zero. Hidden layers
    /// use the leaky-ReLU gain, the output layer gain 1. The global-branch
    /// column reading the raw CU count starts at zero.
    pub fn init<R: Rng>(config: QNetConfig, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(config)?;
        let leaky_gain = (2.0 / (1.0 + config.leaky_slope.powi(2))).sqrt();
        let last = net.layer_count() - 1;
        for (i, layer) in net.layers_mut().into_iter().enumerate() {
            let gain = if i == last { 1.0 } else { leaky_gain };
            let normal = Normal::new(0.0, gain / (layer.fan_in() as f64).sqrt()).expect("finite std");
            for w in layer.weight.data_mut() {
                *w = T::of(normal.sample(rng));
            }
        }
        if let Some(g) = net.global.as_mut() {
            let inputs = config.global_inputs;
            for row in g.weight.data_mut().chunks_exact_mut(inputs) {
                row[slot::CU_COUNT] = T::zero();
            }
        }
        Ok(net)
    }

    pub fn config(&self) -> &QNetConfig {
        &self.config
    }

    /// Layers in parameter order: convs, local, global (if present),
    /// hidden, output.
    pub fn layers(&self) -> Vec<&Linear<T>> {
        let mut v: Vec<&Linear<T>> = self.convs.iter().collect();
        v.push(&self.local);
        v.extend(self.global.as_ref());
        v.push(&self.hidden);
        v.push(&self.output);
        v
    }

    pub fn layers_mut(&mut self) -> Vec<&mut Linear<T>> {
        let mut v: Vec<&mut Linear<T>> = self.convs.iter_mut().collect();
        v.push(&mut self.local);
        v.extend(self.global.as_mut());
        v.push(&mut self.hidden);
        v.push(&mut self.output);
        v
    }

    pub fn layer_count(&self) -> usize {
        self.layers().len()
    }

    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|l| l.param_count()).sum()
    }

    pub fn zero_gradients(&self) -> Gradients<T> {
        self.layers().iter().map(|l| l.zeros_like()).collect()
    }

    /// Flat parameter vector in layer order, weight before bias.
    pub fn flat_params(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in self.layers() {
            out.extend_from_slice(l.weight.data());
            out.extend_from_slice(l.bias.data());
        }
        out
    }

    pub fn set_flat_params(&mut self, values: &[T]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::Model(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                values.len()
            )));
        }
        let mut at = 0;
        for l in self.layers_mut() {
            let w = l.weight.len();
            l.weight.data_mut().copy_from_slice(&values[at..at + w]);
            at += w;
            let b = l.bias.len();
            l.bias.data_mut().copy_from_slice(&values[at..at + b]);
            at += b;
        }
        Ok(())
    }

    /// Parameter `index` of the flat ordering used by [`Self::flat_params`].
    pub fn param_mut(&mut self, mut index: usize) -> Option<&mut T> {
        for l in self.layers_mut() {
            let w = l.weight.len();
            if index < w {
                return Some(&mut l.weight.data_mut()[index]);
            }
            index -= w;
            let b = l.bias.len();
            if index < b {
                return Some(&mut l.bias.data_mut()[index]);
            }
            index -= b;
        }
        None
    }

    pub fn cast<U: Real>(&self) -> QNetwork<U> {
        let cast = |l: &Linear<T>| Linear {
            weight: l.weight.cast(),
            bias: l.bias.cast(),
        };
        QNetwork {
            config: self.config,
            convs: self.convs.iter().map(cast).collect(),
            local: cast(&self.local),
            global: self.global.as_ref().map(cast),
            hidden: cast(&self.hidden),
            output: cast(&self.output),
        }
    }

    pub fn forward(&self, batch: &StateBatch<T>) -> Activations<T> {
        let n = batch.len;
        let slope = T::of(self.config.leaky_slope);
        let mut shape = ConvShape {
            channels: INPUT_CHANNELS,
            batch: n,
            height: self.config.patch,
            width: self.config.patch,
        };
        let mut conv_in = Vec::with_capacity(4);
        let mut conv_cols = Vec::with_capacity(4);
        let mut conv_out: Vec<Vec<T>> = Vec::with_capacity(4);
        for layer in &self.convs {
            let x = conv_out.last().unwrap_or(&batch.patches);
            let cols = im2col(x, shape);
            let mut y = layer.forward(&cols, shape.positions());
            leaky_relu(&mut y, slope);
            conv_in.push(shape);
            shape = ConvShape {
                channels: layer.outputs(),
                batch: n,
                height: shape.out_height(),
                width: shape.out_width(),
            };
            conv_cols.push(cols);
            conv_out.push(y);
        }
        let plane = shape.height * shape.width;
        let local_in = layers::flatten(conv_out.last().expect("four convs"), shape.channels, n, plane);
        let mut local_out = self.local.forward(&local_in, n);
        leaky_relu(&mut local_out, slope);

        let (global_in, global_out) = match &self.global {
            Some(g) => {
                let mut out = g.forward(&batch.globals, n);
                leaky_relu(&mut out, slope);
                (batch.globals.clone(), out)
            }
            None => (Vec::new(), Vec::new()),
        };
        let mut hidden_in = local_out.clone();
        hidden_in.extend_from_slice(&global_out);
        let mut hidden_out = self.hidden.forward(&hidden_in, n);
        leaky_relu(&mut hidden_out, slope);
        let q = self.output.forward(&hidden_out, n);
        Activations {
            len: n,
            conv_in,
            conv_cols,
            conv_out,
            local_in,
            local_out,
            global_in,
            global_out,
            hidden_in,
            hidden_out,
            q,
        }
    }

    /// Gradients of a loss whose derivative with respect to `acts.q` is
    /// `dq` (layout `[A, N]`).
    pub fn backward(&self, acts: &Activations<T>, dq: &[T]) -> Gradients<T> {
        let n = acts.len;
        let slope = T::of(self.config.leaky_slope);
        let mut grads = self.zero_gradients();
        let hidden_idx = grads.len() - 2;
        let out_idx = grads.len() - 1;
        let local_idx = 4;

        let mut dh = self
            .output
            .backward(&acts.hidden_out, dq, n, &mut grads[out_idx], true)
            .expect("input grad");
        leaky_relu_backward(&mut dh, &acts.hidden_out, slope);
        let dcat = self
            .hidden
            .backward(&acts.hidden_in, &dh, n, &mut grads[hidden_idx], true)
            .expect("input grad");
        let split = self.config.local_width * n;
        let mut dlocal = dcat[..split].to_vec();
        if let Some(g) = &self.global {
            let mut dglobal = dcat[split..].to_vec();
            leaky_relu_backward(&mut dglobal, &acts.global_out, slope);
            g.backward(&acts.global_in, &dglobal, n, &mut grads[5], false);
        }
        leaky_relu_backward(&mut dlocal, &acts.local_out, slope);
        let dflat = self
            .local
            .backward(&acts.local_in, &dlocal, n, &mut grads[local_idx], true)
            .expect("input grad");
        let last = acts.conv_in[3];
        let plane = last.out_height() * last.out_width();
        let mut dy = layers::unflatten(&dflat, self.convs[3].outputs(), n, plane);
        for k in (0..4).rev() {
            leaky_relu_backward(&mut dy, &acts.conv_out[k], slope);
            let shape = acts.conv_in[k];
            let dcols = self.convs[k].backward(&acts.conv_cols[k], &dy, shape.positions(), &mut grads[k], k > 0);
            if let Some(dcols) = dcols {
                dy = layers::col2im(&dcols, shape);
            }
        }
        grads
    }

    /// Q-values of one state.
    pub fn q_values(&self, state: &CuState) -> Result<Vec<f64>> {
        let batch = StateBatch::new(&[state], &self.config)?;
        let acts = self.forward(&batch);
        Ok(acts.q_row(0, self.config.actions).into_iter().map(Real::f64).collect())
    }
}
