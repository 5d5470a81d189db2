use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::adam::{Adam, AdamConfig};
use super::network::{Gradients, QNetConfig, QNetwork, StateBatch};
use super::replay::{ReplayBuffer, Transition, REPLAY_CAPACITY};
use super::scalar::Real;
use crate::codec::Qp;
use crate::env::{Environment, StateBuilder};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// Environment steps; one gradient update per step once the buffer
    /// holds a full batch.
    pub steps: usize,
    pub learning_rate: f64,
    pub gamma: f64,
    pub batch_size: usize,
    pub target_sync_every: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: usize,
    pub replay_capacity: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 5_000,
            learning_rate: 1e-4,
            gamma: 0.9,
            batch_size: 64,
            target_sync_every: 300,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 50_000,
            replay_capacity: REPLAY_CAPACITY,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::invalid(format!("gamma must lie in [0, 1), got {}", self.gamma)));
        }
        if !(self.learning_rate > 0.0) || self.batch_size == 0 || self.target_sync_every == 0 || self.replay_capacity == 0 {
            return Err(Error::invalid("learning rate, batch, sync period and capacity must be positive"));
        }
        for e in [self.epsilon_start, self.epsilon_end] {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::invalid(format!("epsilon {e} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Linear decay from start to end, then constant.
    pub fn epsilon(&self, step: usize) -> f64 {
        if self.epsilon_decay_steps == 0 || step >= self.epsilon_decay_steps {
            return self.epsilon_end;
        }
        let f = step as f64 / self.epsilon_decay_steps as f64;
        self.epsilon_start + f * (self.epsilon_end - self.epsilon_start)
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// ε-greedy action. No random numbers are drawn when ε = 0.
pub fn select_action<T: Real, R: Rng>(net: &QNetwork<T>, state: &crate::env::CuState, epsilon: f64, rng: &mut R) -> Result<usize> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::invalid(format!("epsilon {epsilon} outside [0, 1]")));
    }
    let actions = net.config().actions;
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        return Ok(rng.gen_range(0..actions));
    }
    Ok(argmax(&net.q_values(state)?))
}

/// `max_a' Q_target(s', a')` for every transition with a successor, in
/// batch order; terminal transitions get `None`.
pub fn target_maxima<T: Real>(target: &QNetwork<T>, batch: &[&Transition]) -> Result<Vec<Option<f64>>> {
    let cfg = target.config();
    let next: Vec<_> = batch.iter().filter_map(|t| t.next.as_ref()).collect();
    let mut out = vec![None; batch.len()];
    if next.is_empty() {
        return Ok(out);
    }
    let acts = target.forward(&StateBatch::new(&next, cfg)?);
    let mut j = 0;
    for (o, t) in out.iter_mut().zip(batch) {
        if t.next.is_some() {
            let row = acts.q_row(j, cfg.actions);
            *o = Some(row[argmax(&row)].f64());
            j += 1;
        }
    }
    Ok(out)
}

/// Mean squared error between `Q(s, a)` and the regression targets `y`,
/// with its gradient.
pub fn regression_loss_and_gradients<T: Real>(net: &QNetwork<T>, batch: &[&Transition], y: &[f64]) -> Result<(f64, Gradients<T>)> {
    if batch.is_empty() || batch.len() != y.len() {
        return Err(Error::invalid("batch and targets must be non-empty and of equal length"));
    }
    let cfg = net.config();
    let n = batch.len();
    for t in batch {
        if t.action >= cfg.actions {
            return Err(Error::invalid(format!("transition action {} out of range", t.action)));
        }
    }
    let states: Vec<_> = batch.iter().map(|t| &t.state).collect();
    let acts = net.forward(&StateBatch::new(&states, cfg)?);
    let mut dq = vec![T::zero(); cfg.actions * n];
    let mut loss = 0.0;
    for (i, t) in batch.iter().enumerate() {
        let err = acts.q_of(i, t.action).f64() - y[i];
        loss += err * err;
        dq[t.action * n + i] = T::of(2.0 * err / n as f64);
    }
    Ok((loss / n as f64, net.backward(&acts, &dq)))
}

fn td_targets(batch: &[&Transition], maxima: &[Option<f64>], gamma: f64) -> Vec<f64> {
    batch
        .iter()
        .zip(maxima)
        .map(|(t, m)| t.reward + m.map_or(0.0, |m| gamma * m))
        .collect()
}

/// Mean squared TD error of `batch` and its gradient with respect to the
/// online network. The target network is held fixed.
pub fn td_loss_and_gradients<T: Real>(
    net: &QNetwork<T>,
    target: &QNetwork<T>,
    batch: &[&Transition],
    gamma: f64,
) -> Result<(f64, Gradients<T>)> {
    if net.config() != target.config() {
        return Err(Error::invalid("online and target networks differ in shape"));
    }
    let maxima = if gamma == 0.0 {
        vec![None; batch.len()]
    } else {
        target_maxima(target, batch)?
    };
    regression_loss_and_gradients(net, batch, &td_targets(batch, &maxima, gamma))
}

/// One optimizer step on `net`; returns the loss before the step.
pub fn td_update<T: Real>(
    net: &mut QNetwork<T>,
    target: &QNetwork<T>,
    batch: &[&Transition],
    gamma: f64,
    optimizer: &mut Adam<T>,
) -> Result<f64> {
    let (loss, grads) = td_loss_and_gradients(net, target, batch, gamma)?;
    optimizer.step(net, &grads)?;
    Ok(loss)
}

pub fn sync_target<T: Real>(net: &QNetwork<T>, target: &mut QNetwork<T>) -> Result<()> {
    if net.config() != target.config() {
        return Err(Error::invalid("online and target networks differ in shape"));
    }
    target.clone_from(net);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub step: usize,
    pub episode: usize,
    pub epsilon: f64,
    /// `None` before the first gradient update.
    pub loss: Option<f64>,
    /// Reward accumulated in the current episode up to this step.
    pub episode_return: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingLog {
    pub seed: u64,
    pub rows: Vec<LogRow>,
}

impl TrainingLog {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "# seed={}", self.seed)?;
        writeln!(w, "step,episode,epsilon,loss,return")?;
        for r in &self.rows {
            let loss = r.loss.map(|l| format!("{l:.9e}")).unwrap_or_default();
            writeln!(w, "{},{},{:.6},{},{:.9e}", r.step, r.episode, r.epsilon, loss, r.episode_return)?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
    }
}

/// DQN with experience replay and a periodically synced target network.
/// Every random draw comes from one stream seeded by `config.seed`.
pub fn train(env: &mut dyn Environment, net_config: QNetConfig, config: &TrainConfig) -> Result<(QNetwork<f32>, TrainingLog)> {
    config.validate()?;
    if net_config.actions != env.action_count() {
        return Err(Error::invalid("network action count differs from the environment's"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut net = QNetwork::<f32>::init(net_config, &mut rng)?;
    let mut target = net.clone();
    let mut adam = Adam::new(
        &net,
        AdamConfig {
            learning_rate: config.learning_rate,
            ..AdamConfig::default()
        },
    );
    let mut replay = ReplayBuffer::new(config.replay_capacity)?;
    // Target maxima per replay slot, valid while the target net is unchanged.
    let mut cached: Vec<Option<Option<f64>>> = vec![None; config.replay_capacity];
    let mut log = TrainingLog {
        seed: config.seed,
        rows: Vec::with_capacity(config.steps),
    };
    let mut state = env.reset()?;
    let mut episode = 0;
    let mut ret = 0.0;
    let mut updates = 0usize;
    for step in 0..config.steps {
        let epsilon = config.epsilon(step);
        let action = select_action(&net, &state, epsilon, &mut rng)?;
        let outcome = env.step(action)?;
        ret += outcome.reward;
        let done = outcome.next.is_none();
        let next_state = outcome.next.clone();
        let slot = replay.push(Transition {
            state: state.clone(),
            action,
            reward: outcome.reward,
            next: outcome.next,
        });
        cached[slot] = None;
        let mut loss = None;
        if replay.len() >= config.batch_size {
            let slots = replay.sample_slots(config.batch_size, &mut rng)?;
            let batch: Vec<&Transition> = slots.iter().map(|&i| replay.get(i).expect("sampled")).collect();
            let missing: Vec<usize> = (0..slots.len()).filter(|&j| cached[slots[j]].is_none()).collect();
            if !missing.is_empty() {
                let sub: Vec<&Transition> = missing.iter().map(|&j| batch[j]).collect();
                let fresh = if config.gamma == 0.0 {
                    vec![None; sub.len()]
                } else {
                    target_maxima(&target, &sub)?
                };
                for (&j, m) in missing.iter().zip(fresh) {
                    cached[slots[j]] = Some(m);
                }
            }
            let maxima: Vec<Option<f64>> = slots.iter().map(|&i| cached[i].expect("filled")).collect();
            let (l, grads) = regression_loss_and_gradients(&net, &batch, &td_targets(&batch, &maxima, config.gamma))?;
            adam.step(&mut net, &grads)?;
            loss = Some(l);
            updates += 1;
            if updates % config.target_sync_every == 0 {
                sync_target(&net, &mut target)?;
                cached.iter_mut().for_each(|c| *c = None);
            }
        }
        log.rows.push(LogRow {
            step,
            episode,
            epsilon,
            loss,
            episode_return: ret,
        });
        state = match next_state {
            Some(s) if !done => s,
            _ => {
                episode += 1;
                ret = 0.0;
                env.reset()?
            }
        };
    }
    Ok((net, log))
}

/// Greedy raster-order QP decisions for one frame.
pub fn infer_qpmap<T: Real>(net: &QNetwork<T>, states: &StateBuilder) -> Result<Vec<Qp>> {
    let mut chosen: Vec<Option<Qp>> = vec![None; states.cu_count()];
    for i in 0..states.cu_count() {
        let q = net.q_values(&states.state(i, &chosen))?;
        chosen[i] = Some(Qp::from_action(argmax(&q))?);
    }
    Ok(chosen.into_iter().map(|q| q.expect("all decided")).collect())
}
