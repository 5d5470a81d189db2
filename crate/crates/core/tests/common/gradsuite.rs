//! Finite-difference checks shared by the gradient tests and the
//! acceptance run. Each returns the worst relative error it saw.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsc_core::agent::gradcheck::{check_gradients, check_gradients_with, relative_error, GradCheckReport, FD_STEP};
use rsc_core::agent::layers::{col2im, im2col, leaky_relu, leaky_relu_backward, ConvShape, Linear};
use rsc_core::agent::*;
use rsc_core::env::CuState;

use super::{random_state, small_config};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random weights and nonzero biases so no pre-activation sits on a kink.
pub fn random_net(cfg: QNetConfig, seed: u64) -> QNetwork<f64> {
    let mut r = rng(seed);
    let mut net = QNetwork::<f64>::init(cfg, &mut r).unwrap();
    for l in net.layers_mut() {
        for b in l.bias.data_mut() {
            *b = r.gen_range(-0.3..0.3);
        }
    }
    net
}

pub fn batch(seed: u64, patch: usize, n: usize) -> Vec<Transition> {
    let mut r = rng(seed);
    (0..n)
        .map(|i| Transition {
            state: random_state(&mut r, patch),
            action: (i * 7) % 30,
            reward: r.gen_range(-1.0..1.0),
            next: (i % 3 != 0).then(|| random_state(&mut r, patch)),
        })
        .collect()
}

/// Every parameter of a narrow network, with and without the global branch.
pub fn td_small() -> Vec<GradCheckReport> {
    [small_config(), small_config().without_global_branch()]
        .into_iter()
        .map(|cfg| {
            let net = random_net(cfg, 1);
            let target = random_net(cfg, 2);
            let ts = batch(3, 16, 5);
            let refs: Vec<&Transition> = ts.iter().collect();
            let all: Vec<usize> = (0..net.param_count()).collect();
            check_gradients(&net, |n| td_loss_and_gradients(n, &target, &refs, 0.9), &all, FD_STEP).unwrap()
        })
        .collect()
}

/// Six parameters from every tensor of the full-size network; probes that
/// straddle an activation kink are skipped.
pub fn td_full() -> (GradCheckReport, usize) {
    let cfg = QNetConfig::default();
    let net = random_net(cfg, 4);
    let target = random_net(cfg, 5);
    let ts = batch(6, 64, 3);
    let refs: Vec<&Transition> = ts.iter().collect();
    let mut indices = Vec::new();
    let mut at = 0;
    let mut r = rng(7);
    for l in net.layers() {
        for len in [l.weight.len(), l.bias.len()] {
            for _ in 0..6 {
                indices.push(at + r.gen_range(0..len));
            }
            at += len;
        }
    }
    let states: Vec<&CuState> = ts.iter().map(|t| &t.state).collect();
    let input = StateBatch::new(&states, &cfg).unwrap();
    let pattern = |n: &QNetwork<f64>| n.forward(&input).sign_pattern();
    let report = check_gradients_with(
        &net,
        |n| td_loss_and_gradients(n, &target, &refs, 0.9),
        Some(pattern),
        &indices,
        FD_STEP,
    )
    .unwrap();
    (report, indices.len())
}

/// Worst error of `backward` against central differences of `Σ c·f(x)`.
pub fn check_function(f: impl Fn(&[f64]) -> Vec<f64>, backward: impl Fn(&[f64], &[f64]) -> Vec<f64>, x: &[f64], seed: u64) -> f64 {
    let y = f(x);
    let mut r = rng(seed);
    let c: Vec<f64> = (0..y.len()).map(|_| r.gen_range(-1.0..1.0)).collect();
    let loss = |x: &[f64]| f(x).iter().zip(&c).map(|(a, b)| a * b).sum::<f64>();
    let analytic = backward(x, &c);
    let mut probe = x.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        probe[i] = x[i] + FD_STEP;
        let p = loss(&probe);
        probe[i] = x[i] - FD_STEP;
        let m = loss(&probe);
        probe[i] = x[i];
        worst = worst.max(relative_error(analytic[i], (p - m) / (2.0 * FD_STEP)));
    }
    worst
}

fn randomize(layer: &mut Linear<f64>, r: &mut ChaCha8Rng) {
    layer.weight.data_mut().iter_mut().for_each(|w| *w = r.gen_range(-1.0..1.0));
    layer.bias.data_mut().iter_mut().for_each(|w| *w = r.gen_range(-1.0..1.0));
}

/// Input and parameter gradients of `layer` applied to `cols` columns
/// produced from `x` by `lower`, mapped back by `raise`.
fn layer_checks(
    layer: &Linear<f64>,
    x: &[f64],
    cols: usize,
    lower: impl Fn(&[f64]) -> Vec<f64>,
    raise: impl Fn(&[f64]) -> Vec<f64>,
    seed: u64,
) -> (f64, f64) {
    let input = check_function(
        |x| layer.forward(&lower(x), cols),
        |x, dy| {
            let mut g = layer.zeros_like();
            raise(&layer.backward(&lower(x), dy, cols, &mut g, true).unwrap())
        },
        x,
        seed,
    );
    let wlen = layer.weight.len();
    let params: Vec<f64> = layer.weight.data().iter().chain(layer.bias.data()).copied().collect();
    let rebuild = |p: &[f64]| {
        let mut l = layer.clone();
        l.weight.data_mut().copy_from_slice(&p[..wlen]);
        l.bias.data_mut().copy_from_slice(&p[wlen..]);
        l
    };
    let lowered = lower(x);
    let param = check_function(
        |p| rebuild(p).forward(&lowered, cols),
        |p, dy| {
            let l = rebuild(p);
            let mut g = l.zeros_like();
            l.backward(&lowered, dy, cols, &mut g, false);
            g.weight.data().iter().chain(g.bias.data()).copied().collect()
        },
        &params,
        seed + 1,
    );
    (input, param)
}

/// (input, parameter) errors of a dense layer.
pub fn dense_layer() -> (f64, f64) {
    let mut r = rng(10);
    let (fan_in, out, cols) = (5, 4, 3);
    let mut layer = Linear::<f64>::dense(fan_in, out);
    randomize(&mut layer, &mut r);
    let x: Vec<f64> = (0..fan_in * cols).map(|_| r.gen_range(-1.0..1.0)).collect();
    layer_checks(&layer, &x, cols, |x| x.to_vec(), |g| g.to_vec(), 11)
}

/// (input, parameter) errors of a strided conv layer, im2col included.
pub fn conv_layer() -> (f64, f64) {
    let mut r = rng(20);
    let s = ConvShape {
        channels: 2,
        batch: 2,
        height: 7,
        width: 6,
    };
    let mut layer = Linear::<f64>::conv(2, 3);
    randomize(&mut layer, &mut r);
    let x: Vec<f64> = (0..2 * 2 * 7 * 6).map(|_| r.gen_range(-1.0..1.0)).collect();
    layer_checks(&layer, &x, s.positions(), |x| im2col(x, s), |g| col2im(g, s), 21)
}

pub fn leaky_relu_layer() -> f64 {
    // no sample closer than 0.065 to the kink
    let x: Vec<f64> = (0..40).map(|i| (i as f64 - 19.5) * 0.13).collect();
    check_function(
        |x| {
            let mut y = x.to_vec();
            leaky_relu(&mut y, 0.25);
            y
        },
        |x, dy| {
            let mut y = x.to_vec();
            leaky_relu(&mut y, 0.25);
            let mut g = dy.to_vec();
            leaky_relu_backward(&mut g, &y, 0.25);
            g
        },
        &x,
        30,
    )
}
