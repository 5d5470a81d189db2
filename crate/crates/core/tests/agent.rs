mod common;

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rsc_core::agent::*;
use rsc_core::codec::Frame;
use rsc_core::env::{CuState, StateBuilder};
use rsc_core::semantics::ProxyOracle;
use rsc_core::Error;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn q_row(net: &QNetwork<f64>, s: &CuState) -> Vec<f64> {
    net.q_values(s).unwrap()
}

#[test]
fn zero_network_outputs_zero() {
    let net = QNetwork::<f64>::zeros(QNetConfig::default()).unwrap();
    let s = random_state(&mut rng(1), 64);
    assert_eq!(q_row(&net, &s), vec![0.0; 30]);
}

#[test]
fn parameter_accounting() {
    let full = QNetwork::<f32>::zeros(QNetConfig::default()).unwrap();
    assert_eq!(full.param_count(), 267_118);
    let ablated = QNetwork::<f32>::zeros(QNetConfig::default().without_global_branch()).unwrap();
    // global dense 15→128 removed, hidden input shrinks by 128
    assert_eq!(ablated.param_count(), 267_118 - (15 * 128 + 128) - 128 * 256);
    assert_eq!(ablated.config().actions, 30);
    let s = random_state(&mut rng(2), 64);
    assert_eq!(ablated.q_values(&s).unwrap().len(), 30);
}

#[test]
fn seeded_output_is_pinned() {
    let net = QNetwork::<f32>::init(QNetConfig::default(), &mut rng(42)).unwrap();
    let s = random_state(&mut rng(43), 64);
    let q = net.q_values(&s).unwrap();
    let pinned = PINNED_Q;
    for (a, (x, p)) in q.iter().zip(pinned).enumerate() {
        assert!((x - p).abs() < 1e-5 * p.abs().max(1.0), "action {a}: {x} vs {p}");
    }
}

// seed 42 net, seed 43 state
const PINNED_Q: [f64; 30] = [
    0.6515668034553528,
    0.1857125461101532,
    -0.7834012508392334,
    0.6170248985290527,
    -0.051834285259246826,
    -0.4589371681213379,
    -0.6385616660118103,
    0.4972219169139862,
    0.4263820946216583,
    -0.14865261316299438,
    -0.014410371892154217,
    0.32925352454185486,
    0.5045456290245056,
    0.08140020817518234,
    0.45641687512397766,
    -0.7414516806602478,
    -0.3190697133541107,
    1.0981438159942627,
    0.20917075872421265,
    0.2090614140033722,
    -0.048707015812397,
    -0.6259444355964661,
    -0.21540367603302002,
    -0.2685548663139343,
    -0.286391943693161,
    -0.19588977098464966,
    -0.3832685351371765,
    0.11337631195783615,
    0.09907878935337067,
    0.017209632322192192,
];

#[test]
fn batch_rows_are_independent() {
    let cfg = QNetConfig::default();
    let net = QNetwork::<f32>::init(cfg, &mut rng(5)).unwrap();
    let a = random_state(&mut rng(6), 64);
    let b = random_state(&mut rng(7), 64);
    let acts = net.forward(&StateBatch::new(&[&a, &b, &a], &cfg).unwrap());
    assert_eq!(acts.q_row(0, 30), acts.q_row(2, 30));
    assert_ne!(acts.q_row(0, 30), acts.q_row(1, 30));
    let single = net.forward(&StateBatch::new(&[&b], &cfg).unwrap());
    for (x, y) in single.q_row(0, 30).iter().zip(acts.q_row(1, 30)) {
        assert!((x - y).abs() <= 1e-5 * x.abs().max(1.0));
    }
}

#[test]
fn wrong_patch_size_is_invalid_input() {
    let net = QNetwork::<f32>::zeros(QNetConfig::default()).unwrap();
    let s = random_state(&mut rng(1), 16);
    assert!(matches!(net.q_values(&s), Err(Error::InvalidInput(_))));
}

fn with_output_bias(bias: &[f64]) -> QNetwork<f64> {
    let mut net = QNetwork::<f64>::zeros(small_config()).unwrap();
    let n = net.param_count();
    for (a, &b) in bias.iter().enumerate() {
        *net.param_mut(n - 30 + a).unwrap() = b;
    }
    net
}

#[test]
fn greedy_selection_and_ties() {
    let s = random_state(&mut rng(1), 16);
    let mut one_hot = vec![0.0; 30];
    one_hot[7] = 1.0;
    assert_eq!(select_action(&with_output_bias(&one_hot), &s, 0.0, &mut rng(0)).unwrap(), 7);
    assert_eq!(select_action(&with_output_bias(&[0.5; 30]), &s, 0.0, &mut rng(0)).unwrap(), 0);
    assert!(select_action(&with_output_bias(&[0.5; 30]), &s, 1.5, &mut rng(0)).is_err());
}

#[test]
fn full_exploration_is_uniform() {
    let net = with_output_bias(&[0.0; 30]);
    let s = random_state(&mut rng(1), 16);
    let mut r = rng(9);
    let mut counts = [0usize; 30];
    let draws = 30_000;
    for _ in 0..draws {
        counts[select_action(&net, &s, 1.0, &mut r).unwrap()] += 1;
    }
    let expected = draws as f64 / 30.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    // 29 degrees of freedom, 0.999 quantile
    assert!(chi2 < 58.3, "chi2 {chi2}");
    for c in counts {
        assert!((c as f64 / draws as f64 - 1.0 / 30.0).abs() <= 0.005);
    }
}

#[test]
fn constant_bias_shift_keeps_policy() {
    let mut net = QNetwork::<f64>::init(small_config(), &mut rng(3)).unwrap();
    let states: Vec<CuState> = (0..20).map(|i| random_state(&mut rng(100 + i), 16)).collect();
    let before: Vec<usize> = states.iter().map(|s| select_action(&net, s, 0.0, &mut rng(0)).unwrap()).collect();
    let n = net.param_count();
    for a in 0..30 {
        *net.param_mut(n - 30 + a).unwrap() += 3.25;
    }
    let after: Vec<usize> = states.iter().map(|s| select_action(&net, s, 0.0, &mut rng(0)).unwrap()).collect();
    assert_eq!(before, after);
}

fn transition(state: CuState, action: usize, reward: f64, next: Option<CuState>) -> Transition {
    Transition {
        state,
        action,
        reward,
        next,
    }
}

#[test]
fn zero_nets_single_reward_loss_is_one() {
    let net = QNetwork::<f64>::zeros(small_config()).unwrap();
    let s = random_state(&mut rng(1), 16);
    let t = transition(s.clone(), 4, 1.0, Some(s));
    let (loss, _) = td_loss_and_gradients(&net, &net, &[&t], 0.9).unwrap();
    assert_eq!(loss, 1.0);
}

#[test]
fn zero_gamma_regresses_on_reward() {
    let net = QNetwork::<f64>::init(small_config(), &mut rng(1)).unwrap();
    let target = QNetwork::<f64>::init(small_config(), &mut rng(2)).unwrap();
    let s = random_state(&mut rng(3), 16);
    let n = random_state(&mut rng(4), 16);
    let t = transition(s.clone(), 3, 0.7, Some(n));
    let q = net.q_values(&s).unwrap()[3];
    let (loss, _) = td_loss_and_gradients(&net, &target, &[&t], 0.0).unwrap();
    assert!((loss - (q - 0.7).powi(2)).abs() < 1e-12);
    let terminal = transition(s, 3, 0.7, None);
    let (l2, _) = td_loss_and_gradients(&net, &target, &[&terminal], 0.9).unwrap();
    assert!((l2 - loss).abs() < 1e-12);
}

#[test]
fn sync_copies_and_only_online_net_steps() {
    let mut net = QNetwork::<f64>::init(small_config(), &mut rng(1)).unwrap();
    let mut target = QNetwork::<f64>::init(small_config(), &mut rng(2)).unwrap();
    sync_target(&net, &mut target).unwrap();
    assert_eq!(net.flat_params(), target.flat_params());
    sync_target(&net, &mut target).unwrap();
    assert_eq!(net.flat_params(), target.flat_params());
    let s = random_state(&mut rng(3), 16);
    assert_eq!(net.q_values(&s).unwrap(), target.q_values(&s).unwrap());
    let t = transition(s.clone(), 1, 1.0, Some(s));
    let snapshot = target.clone();
    let mut adam = Adam::new(&net, AdamConfig::default());
    td_update(&mut net, &target, &[&t], 0.9, &mut adam).unwrap();
    assert_ne!(net.flat_params(), target.flat_params());
    assert_eq!(target, snapshot);
    let other = QNetwork::<f64>::zeros(small_config().without_global_branch()).unwrap();
    assert!(matches!(sync_target(&other, &mut target), Err(Error::InvalidInput(_))));
}

#[test]
fn repeated_batch_loss_decreases() {
    let cfg = QNetConfig::default();
    let mut net = QNetwork::<f32>::init(cfg, &mut rng(11)).unwrap();
    let target = net.clone();
    let mut r = rng(12);
    let ts: Vec<Transition> = (0..64)
        .map(|i| {
            let s = random_state(&mut r, 64);
            let n = random_state(&mut r, 64);
            transition(s, i % 30, 1.0 + 0.5 * (i % 7) as f64, Some(n))
        })
        .collect();
    let batch: Vec<&Transition> = ts.iter().collect();
    let mut adam = Adam::new(&net, AdamConfig::default());
    let mut last = f64::INFINITY;
    for step in 0..25 {
        let loss = td_update(&mut net, &target, &batch, 0.9, &mut adam).unwrap();
        assert!(loss < last, "step {step}: {loss} >= {last}");
        last = loss;
    }
}

#[test]
fn training_is_deterministic() {
    let cfg = TrainConfig {
        steps: 120,
        batch_size: 8,
        target_sync_every: 10,
        seed: 5,
        ..TrainConfig::default()
    };
    let run = || {
        let mut env = BanditEnv::new(peaked_rewards(12), 16, 3);
        train(&mut env, small_config(), &cfg).unwrap()
    };
    let (a, la) = run();
    let (b, lb) = run();
    assert_eq!(a.flat_params(), b.flat_params());
    assert_eq!(la, lb);
    assert_eq!(la.rows.len(), 120);
    assert!(la.rows[..7].iter().all(|r| r.loss.is_none()));
    assert!(la.rows[7..].iter().all(|r| r.loss.is_some()));
    let mut csv = Vec::new();
    la.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("# seed=5\nstep,episode,epsilon,loss,return\n"));
    assert_eq!(text.lines().count(), 122);
}

#[test]
fn epsilon_schedule() {
    let c = TrainConfig::default();
    assert_eq!(c.epsilon(0), 1.0);
    assert!((c.epsilon(25_000) - 0.525).abs() < 1e-12);
    assert_eq!(c.epsilon(50_000), 0.05);
    assert_eq!(c.epsilon(90_000), 0.05);
    assert!(TrainConfig { gamma: 1.0, ..c }.validate().is_err());
}

#[test]
fn inference_is_deterministic_and_sized() {
    let net = QNetwork::<f32>::init(QNetConfig::default(), &mut rng(8)).unwrap();
    let frame = corpus_frame("coins");
    let sem = ProxyOracle::default().semantics(&frame);
    let b = StateBuilder::new(&frame, &sem).unwrap();
    let a = infer_qpmap(&net, &b).unwrap();
    assert_eq!(a.len(), 81);
    assert_eq!(a, infer_qpmap(&net, &b).unwrap());
    let one = Frame::filled(64, 64, 90).unwrap();
    let b1 = StateBuilder::new(&one, &ProxyOracle::default().semantics(&one)).unwrap();
    assert_eq!(infer_qpmap(&net, &b1).unwrap().len(), 1);
}

#[test]
fn model_round_trip_and_size() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.rscq");
    let meta = ModelMeta {
        seed: 77,
        alpha_s: 0.25,
    };
    for cfg in [QNetConfig::default(), QNetConfig::default().without_global_branch()] {
        let net = QNetwork::<f32>::init(cfg, &mut rng(4)).unwrap();
        save_model(&path, &net, &meta).unwrap();
        let layers = if cfg.global_branch { 8 } else { 7 };
        let header = 4 + 4 + 8 + 8 + 4 * 4 + 8 + 4 + 12 * layers + 8;
        let len = std::fs::metadata(&path).unwrap().len() as usize;
        assert_eq!(len, header + 4 * net.param_count());
        let (back, m) = load_model(&path).unwrap();
        assert_eq!(m, meta);
        assert_eq!(back, net);
        let s = random_state(&mut rng(9), 64);
        assert_eq!(back.q_values(&s).unwrap(), net.q_values(&s).unwrap());
    }
    let full = std::fs::read(&path).unwrap();
    let mut bad = full.clone();
    bad[0] = b'X';
    assert!(matches!(decode_model(&bad), Err(Error::Model(_))));
    let mut version = full.clone();
    version[4] = 9;
    assert!(matches!(decode_model(&version), Err(Error::Model(_))));
    assert!(decode_model(&full[..full.len() - 1]).is_err());
}
