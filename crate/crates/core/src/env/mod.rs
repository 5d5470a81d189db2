//! The CU-by-CU QP decision process: one episode codes one frame, one step
//! picks the QP of one CU in raster order.

mod state;
mod table;

pub use state::{normalize_qp, slot, CuState, GlobalFeatures, StateBuilder, GLOBAL_FEATURES, MISSING, PATCH_SIZE};
pub use table::RewardTable;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::codec::{Frame, Qp, ACTION_COUNT};
use crate::dataset::DatasetCache;
use crate::error::{Error, Result};
use crate::semantics::{OracleQuery, SemanticOracle, View};

pub const DEFAULT_ALPHA: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeConfig {
    pub alpha_s: f64,
    pub anchor_qp: Qp,
    pub action_count: usize,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            alpha_s: DEFAULT_ALPHA,
            anchor_qp: Qp::new(crate::codec::ACTION_QP_MIN).expect("action qp"),
            action_count: ACTION_COUNT,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub reward: f64,
    /// `None` once the last CU has been decided.
    pub next: Option<CuState>,
}

/// Anything the agent can be trained against.
pub trait Environment {
    fn reset(&mut self) -> Result<CuState>;
    fn step(&mut self, action: usize) -> Result<Step>;
    fn action_count(&self) -> usize;
}

/// Everything an episode over one frame needs.
#[derive(Debug, Clone)]
pub struct FrameContext {
    pub id: String,
    pub states: StateBuilder,
    pub rewards: RewardTable,
}

impl FrameContext {
    /// Tabular context: rewards come from `cache`, observations from the
    /// oracle's map of the original frame.
    pub fn from_cache(cache: &DatasetCache, id: &str, frame: &Frame, oracle: &dyn SemanticOracle) -> Result<Self> {
        let index = cache
            .frame_index(id)
            .ok_or_else(|| Error::NotFound(format!("frame `{id}` is not in the cache")))?;
        let meta = &cache.frames[index];
        if meta.width != frame.width() || meta.height != frame.height() {
            return Err(Error::invalid(format!(
                "frame `{id}` is {}x{}, cache says {}x{}",
                frame.width(),
                frame.height(),
                meta.width,
                meta.height
            )));
        }
        let semantics = oracle.evaluate(frame, OracleQuery::new(id, View::Original))?;
        Ok(FrameContext {
            id: id.to_string(),
            states: StateBuilder::new(frame, &semantics)?,
            rewards: RewardTable::from_cache(cache, index)?,
        })
    }

    /// Live context: rewards are computed by running the codec and oracle.
    pub fn live(id: &str, frame: &Frame, oracle: &dyn SemanticOracle, anchor_qp: Qp) -> Result<Self> {
        let semantics = oracle.evaluate(frame, OracleQuery::new(id, View::Original))?;
        Ok(FrameContext {
            id: id.to_string(),
            states: StateBuilder::new(frame, &semantics)?,
            rewards: RewardTable::live(frame, id, oracle, anchor_qp)?,
        })
    }
}

#[derive(Debug, Clone)]
struct Episode {
    frame: usize,
    cu: usize,
    chosen: Vec<Option<Qp>>,
    total: f64,
}

/// Episodes over a fixed set of frames. `reset` walks the frames in a
/// seeded order that is reshuffled after every pass.
#[derive(Debug, Clone)]
pub struct SemanticEnv {
    frames: Vec<FrameContext>,
    config: EpisodeConfig,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
    episode: Option<Episode>,
}

impl SemanticEnv {
    pub fn new(frames: Vec<FrameContext>, config: EpisodeConfig, seed: u64) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::invalid("environment needs at least one frame"));
        }
        if config.action_count != ACTION_COUNT {
            return Err(Error::invalid(format!(
                "action count {} (the action set has {ACTION_COUNT} QPs)",
                config.action_count
            )));
        }
        if !config.alpha_s.is_finite() || config.alpha_s < 0.0 {
            return Err(Error::invalid(format!("alpha must be finite and >= 0, got {}", config.alpha_s)));
        }
        let order = (0..frames.len()).collect();
        Ok(SemanticEnv {
            frames,
            config,
            rng: ChaCha8Rng::seed_from_u64(seed),
            order,
            cursor: usize::MAX,
            episode: None,
        })
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.config
    }

    pub fn frames(&self) -> &[FrameContext] {
        &self.frames
    }

    /// Start an episode on the frame called `id`.
    pub fn reset_to(&mut self, id: &str) -> Result<CuState> {
        let index = self
            .frames
            .iter()
            .position(|f| f.id == id)
            .ok_or_else(|| Error::NotFound(format!("frame `{id}` is not loaded")))?;
        Ok(self.begin(index))
    }

    /// QPs decided so far in the running episode.
    pub fn chosen(&self) -> &[Option<Qp>] {
        self.episode.as_ref().map(|e| e.chosen.as_slice()).unwrap_or(&[])
    }

    /// Cumulative reward of the running (or just finished) episode.
    pub fn episode_total(&self) -> f64 {
        self.episode.as_ref().map(|e| e.total).unwrap_or(0.0)
    }

    fn begin(&mut self, frame: usize) -> CuState {
        let n = self.frames[frame].states.cu_count();
        let chosen = vec![None; n];
        let state = self.frames[frame].states.state(0, &chosen);
        self.episode = Some(Episode {
            frame,
            cu: 0,
            chosen,
            total: 0.0,
        });
        state
    }
}

impl Environment for SemanticEnv {
    fn reset(&mut self) -> Result<CuState> {
        if self.cursor >= self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let frame = self.order[self.cursor];
        self.cursor += 1;
        Ok(self.begin(frame))
    }

    fn step(&mut self, action: usize) -> Result<Step> {
        if action >= self.config.action_count {
            return Err(Error::invalid(format!(
                "action {action} outside [0, {})",
                self.config.action_count
            )));
        }
        let alpha = self.config.alpha_s;
        let ep = self
            .episode
            .as_mut()
            .ok_or_else(|| Error::invalid("step called before reset"))?;
        let ctx = &self.frames[ep.frame];
        if ep.cu >= ctx.states.cu_count() {
            return Err(Error::invalid("episode already finished"));
        }
        let reward = ctx.rewards.reward(ep.cu, action, alpha);
        ep.chosen[ep.cu] = Some(Qp::from_action(action)?);
        ep.total += reward;
        ep.cu += 1;
        let next = (ep.cu < ctx.states.cu_count()).then(|| ctx.states.state(ep.cu, &ep.chosen));
        Ok(Step { reward, next })
    }

    fn action_count(&self) -> usize {
        self.config.action_count
    }
}

/// Total reward of coding a frame with `qpmap` (one QP per CU).
pub fn episode_return(rewards: &RewardTable, qpmap: &[Qp], alpha_s: f64) -> Result<f64> {
    if qpmap.len() != rewards.cu_count() {
        return Err(Error::invalid(format!(
            "qp map has {} entries for {} CUs",
            qpmap.len(),
            rewards.cu_count()
        )));
    }
    let mut total = 0.0;
    for (cu, &qp) in qpmap.iter().enumerate() {
        total += rewards.reward(cu, table::action_of(qp)?, alpha_s);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::ProxyOracle;

    fn textured(width: usize, height: usize) -> Frame {
        let mut luma = Vec::with_capacity(width * height);
        let mut s = 0x2545_f491u32;
        for y in 0..height {
            for x in 0..width {
                s ^= s << 13;
                s ^= s >> 17;
                s ^= s << 5;
                let square = (x % 64 > 16 && x % 64 < 48 && y > 16 && y < 48) as u32 * 120;
                luma.push((40 + (x * 3 + y) % 50 + square as usize + (s % 24) as usize).min(255) as u8);
            }
        }
        Frame::new(width, height, luma).unwrap()
    }

    fn three_cu() -> FrameContext {
        FrameContext::live("tri", &textured(192, 64), &ProxyOracle::default(), Qp::new(22).unwrap()).unwrap()
    }

    #[test]
    fn exhaustive_search_matches_independent_argmax() {
        let ctx = three_cu();
        let alpha = 0.3;
        let mut best = (f64::NEG_INFINITY, vec![]);
        for a in 0..30 {
            for b in 0..30 {
                for c in 0..30 {
                    let map: Vec<Qp> = [a, b, c].iter().map(|&i| Qp::from_action(i).unwrap()).collect();
                    let r = episode_return(&ctx.rewards, &map, alpha).unwrap();
                    if r > best.0 {
                        best = (r, vec![a, b, c]);
                    }
                }
            }
        }
        assert_eq!(best.1, ctx.rewards.best_actions(alpha));
    }

    #[test]
    fn stepping_accumulates_table_rewards() {
        let ctx = three_cu();
        let table = ctx.rewards.clone();
        let mut env = SemanticEnv::new(vec![ctx], EpisodeConfig::default(), 1).unwrap();
        let s0 = env.reset().unwrap();
        assert_eq!(s0.globals.0[slot::CU_COUNT], 3.0);
        assert_eq!(s0.globals.0[slot::QP_LEFT], MISSING);
        let mut total = 0.0;
        let mut steps = 0;
        for &a in &[5usize, 29, 0] {
            let step = env.step(a).unwrap();
            total += step.reward;
            steps += 1;
            if let Some(next) = &step.next {
                assert_eq!(next.globals.0[slot::QP_LEFT], normalize_qp(Qp::from_action(a).unwrap()));
                assert_eq!(next.globals.0[slot::QP_ABOVE], MISSING);
            } else {
                assert_eq!(steps, 3);
            }
        }
        let map: Vec<Qp> = [5, 29, 0].iter().map(|&i| Qp::from_action(i).unwrap()).collect();
        let expected = episode_return(&table, &map, DEFAULT_ALPHA).unwrap();
        assert!((total - expected).abs() < 1e-12);
        assert!(env.step(0).is_err());
    }

    #[test]
    fn anchor_action_rewards_are_zero() {
        let ctx = three_cu();
        for cu in 0..3 {
            assert_eq!(ctx.rewards.reward(cu, 0, 0.7), 0.0);
        }
    }

    #[test]
    fn out_of_range_action_is_rejected() {
        let mut env = SemanticEnv::new(vec![three_cu()], EpisodeConfig::default(), 1).unwrap();
        env.reset().unwrap();
        assert!(matches!(env.step(30), Err(Error::InvalidInput(_))));
        assert!(matches!(env.reset_to("missing"), Err(Error::NotFound(_))));
    }

    #[test]
    fn larger_alpha_never_picks_larger_map_change() {
        let ctx = three_cu();
        let alphas = [0.0, 0.1, 0.5, 1.0, 4.0, 50.0];
        for cu in 0..3 {
            let dms: Vec<f64> = alphas
                .iter()
                .map(|&a| ctx.rewards.delta_m(cu, ctx.rewards.best_actions(a)[cu]))
                .collect();
            for w in dms.windows(2) {
                assert!(w[1] <= w[0] + 1e-15, "cu {cu}: {dms:?}");
            }
        }
    }

    #[test]
    fn neighbour_slots() {
        let frame = textured(192, 128);
        let sem = ProxyOracle::default().semantics(&frame);
        let b = StateBuilder::new(&frame, &sem).unwrap();
        let chosen = vec![Some(Qp::new(51).unwrap()), Some(Qp::new(22).unwrap()), None, None, None, None];
        let s = b.state(4, &chosen).globals.0;
        assert_eq!(s[slot::CU_INDEX], 4.0 / 6.0);
        assert_eq!(s[slot::QP_LEFT], MISSING);
        assert_eq!(s[slot::QP_ABOVE], 0.0);
        assert_eq!(s[slot::MASK_NEIGHBOURS + 3], MISSING);
        assert!(s[slot::MASK_NEIGHBOURS + 2] >= 0.0);
        let s3 = b.state(3, &chosen).globals.0;
        assert_eq!(s3[slot::QP_ABOVE], 1.0);
        let corner = b.state(5, &chosen).globals.0;
        assert_eq!(corner[slot::MASK_NEIGHBOURS + 2], MISSING);
        assert_eq!(corner[slot::INSTANCES_NEIGHBOURS + 2], MISSING);
    }
}
