#![allow(dead_code)]

pub mod bdoracle;
pub mod gradsuite;

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rsc_core::agent::QNetConfig;
use rsc_core::codec::Frame;
use rsc_core::env::{CuState, Environment, GlobalFeatures, Step};
use rsc_core::Result;

pub fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/corpus")
}

pub fn corpus_frame(name: &str) -> Frame {
    Frame::read_pgm(&corpus_dir().join(format!("{name}.pgm"))).unwrap()
}

/// A narrow network with the full topology, for exhaustive checks.
pub fn small_config() -> QNetConfig {
    QNetConfig {
        patch: 16,
        conv_channels: [3, 4, 4, 5],
        local_width: 6,
        global_inputs: 15,
        global_width: 5,
        hidden_width: 7,
        actions: 30,
        global_branch: true,
        leaky_slope: 0.25,
    }
}

pub fn random_state(rng: &mut impl Rng, patch: usize) -> CuState {
    let n = patch * patch;
    let mut g = [0.0; 15];
    for v in g.iter_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    g[0] = 81.0;
    CuState {
        luma_patch: (0..n).map(|_| rng.gen::<f32>()).collect::<Vec<_>>().into(),
        map_patch: (0..n).map(|_| rng.gen::<f32>()).collect::<Vec<_>>().into(),
        globals: GlobalFeatures(g),
    }
}

/// One CU per episode with a random observation and fixed per-action
/// rewards.
pub struct BanditEnv {
    pub rewards: Vec<f64>,
    pub patch: usize,
    rng: ChaCha8Rng,
    fixed: Option<CuState>,
}

impl BanditEnv {
    pub fn new(rewards: Vec<f64>, patch: usize, seed: u64) -> Self {
        BanditEnv {
            rewards,
            patch,
            rng: ChaCha8Rng::seed_from_u64(seed),
            fixed: None,
        }
    }

    /// One CU that every episode revisits.
    pub fn single_cu(rewards: Vec<f64>, patch: usize, seed: u64) -> Self {
        let mut env = BanditEnv::new(rewards, patch, seed);
        env.fixed = Some(env.observe());
        env
    }

    pub fn observe(&mut self) -> CuState {
        let mut s = random_state(&mut self.rng, self.patch);
        s.globals.0 = [-1.0; 15];
        s.globals.0[0] = 1.0;
        s.globals.0[1] = 0.0;
        s
    }
}

impl Environment for BanditEnv {
    fn reset(&mut self) -> Result<CuState> {
        if let Some(s) = &self.fixed {
            return Ok(s.clone());
        }
        Ok(self.observe())
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        Ok(Step {
            reward: self.rewards[action],
            next: None,
        })
    }

    fn action_count(&self) -> usize {
        self.rewards.len()
    }
}

/// Rewards peaking at `best` with a clear margin.
pub fn peaked_rewards(best: usize) -> Vec<f64> {
    (0..30).map(|a| 1.0 - 0.05 * (a as f64 - best as f64).abs()).collect()
}
