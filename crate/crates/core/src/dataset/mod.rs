//! Per-CU rate/semantic-distortion table built by encoding every frame at
//! each action QP, relative to an anchor QP.

mod format;

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::codec::{encode_frame_uniform, Frame, Qp, ACTION_QP_MAX, ACTION_QP_MIN};
use crate::error::{Error, Result};
use crate::semantics::{map_diff, OracleQuery, SemanticOracle, View};

pub use format::{load_cache, save_cache, CACHE_MAGIC};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameMeta {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub cu_count: usize,
    pub split: Split,
}

/// One cached outcome: CU `cu_index` of frame `frame_index` coded at `qp`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdSample {
    pub frame_index: usize,
    pub cu_index: usize,
    pub qp: Qp,
    pub bpp: f64,
    /// Mean absolute map change over the CU versus the anchor reconstruction.
    pub delta_m: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetCache {
    pub seed: u64,
    pub anchor_qp: Qp,
    pub qp_min: Qp,
    pub qp_max: Qp,
    pub ctu_size: usize,
    pub frames: Vec<FrameMeta>,
    samples: BTreeMap<(usize, usize, u8), RdSample>,
}

#[derive(Debug, Clone, Copy)]
pub struct BuildConfig {
    pub seed: u64,
    pub anchor_qp: Qp,
    pub qp_min: Qp,
    pub qp_max: Qp,
    pub train_fraction: f64,
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            seed: 0,
            anchor_qp: Qp::new(ACTION_QP_MIN).unwrap(),
            qp_min: Qp::new(ACTION_QP_MIN).unwrap(),
            qp_max: Qp::new(ACTION_QP_MAX).unwrap(),
            train_fraction: 0.8,
        }
    }
}

impl DatasetCache {
    pub fn empty(seed: u64, anchor_qp: Qp, qp_min: Qp, qp_max: Qp, ctu_size: usize) -> Self {
        DatasetCache {
            seed,
            anchor_qp,
            qp_min,
            qp_max,
            ctu_size,
            frames: Vec::new(),
            samples: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, sample: RdSample) {
        self.samples.insert(
            (sample.frame_index, sample.cu_index, sample.qp.value()),
            sample,
        );
    }

    pub fn lookup(&self, frame_index: usize, cu_index: usize, qp: Qp) -> Result<&RdSample> {
        self.samples
            .get(&(frame_index, cu_index, qp.value()))
            .ok_or_else(|| {
                Error::NotFound(format!(
                    "no cached sample for frame {frame_index}, cu {cu_index}, qp {qp}"
                ))
            })
    }

    pub fn samples(&self) -> impl Iterator<Item = &RdSample> {
        self.samples.values()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn frame_index(&self, id: &str) -> Option<usize> {
        self.frames.iter().position(|f| f.id == id)
    }

    pub fn frames_in(&self, split: Split) -> impl Iterator<Item = usize> + '_ {
        self.frames
            .iter()
            .enumerate()
            .filter(move |(_, f)| f.split == split)
            .map(|(i, _)| i)
    }

    pub fn qps(&self) -> impl Iterator<Item = Qp> {
        (self.qp_min.value()..=self.qp_max.value()).map(|q| Qp::new(q).unwrap())
    }

    /// Every (frame, cu) must carry one row per QP of the range.
    pub fn validate(&self) -> Result<()> {
        let per_cu = (self.qp_max.value() - self.qp_min.value() + 1) as usize;
        let expected: usize = self.frames.iter().map(|f| f.cu_count * per_cu).sum();
        if expected != self.samples.len() {
            return Err(Error::invalid(format!(
                "cache holds {} samples, frame metadata implies {expected}",
                self.samples.len()
            )));
        }
        for (fi, f) in self.frames.iter().enumerate() {
            for cu in 0..f.cu_count {
                for qp in self.qps() {
                    self.lookup(fi, cu, qp)?;
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_cache(self, path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        load_cache(path)
    }
}

/// Seeded train/test assignment; `round(fraction·n)` frames train, keeping
/// at least one of each when `n >= 2`.
pub fn split_frames(n: usize, train_fraction: f64, seed: u64) -> Vec<Split> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut n_train = (train_fraction * n as f64).round() as usize;
    if n >= 2 {
        n_train = n_train.clamp(1, n - 1);
    } else {
        n_train = n;
    }
    let mut split = vec![Split::Test; n];
    for &i in &order[..n_train] {
        split[i] = Split::Train;
    }
    split
}

/// Encode each frame at every QP of the range and record per-CU rate,
/// MSE and map change against the anchor reconstruction's map.
pub fn build_cache(
    frames: &[(String, Frame)],
    oracle: &dyn SemanticOracle,
    config: &BuildConfig,
) -> Result<DatasetCache> {
    if frames.is_empty() {
        return Err(Error::invalid("no frames to build a cache from"));
    }
    if config.qp_min > config.qp_max || config.anchor_qp < config.qp_min || config.anchor_qp > config.qp_max {
        return Err(Error::invalid(format!(
            "anchor qp {} outside [{}, {}]",
            config.anchor_qp, config.qp_min, config.qp_max
        )));
    }
    let ctu_size = frames[0].1.ctu_size();
    let split = split_frames(frames.len(), config.train_fraction, config.seed);
    let mut cache = DatasetCache::empty(config.seed, config.anchor_qp, config.qp_min, config.qp_max, ctu_size);

    for (fi, (id, frame)) in frames.iter().enumerate() {
        if id.is_empty() || id.chars().any(char::is_whitespace) {
            return Err(Error::invalid(format!("frame id `{id}` must be non-empty without spaces")));
        }
        if frame.ctu_size() != ctu_size {
            return Err(Error::invalid("frames use different CTU sizes").in_frame(id.clone()));
        }
        build_frame(&mut cache, fi, id, frame, oracle, config).map_err(|e| e.in_frame(id.clone()))?;
        cache.frames.push(FrameMeta {
            id: id.clone(),
            width: frame.width(),
            height: frame.height(),
            cu_count: frame.cu_count(),
            split: split[fi],
        });
    }
    Ok(cache)
}

fn build_frame(
    cache: &mut DatasetCache,
    fi: usize,
    id: &str,
    frame: &Frame,
    oracle: &dyn SemanticOracle,
    config: &BuildConfig,
) -> Result<()> {
    let evaluate = |qp: Qp| -> Result<_> {
        let coded = encode_frame_uniform(frame, qp);
        let semantics = oracle.evaluate(&coded.reconstruction, OracleQuery::new(id, View::Uniform(qp)))?;
        if semantics.map.width() != frame.width() || semantics.map.height() != frame.height() {
            return Err(Error::invalid("oracle map size differs from the frame"));
        }
        Ok((coded, semantics.map))
    };
    let (_, anchor_map) = evaluate(config.anchor_qp)?;
    for q in config.qp_min.value()..=config.qp_max.value() {
        let qp = Qp::new(q)?;
        let (coded, map) = evaluate(qp)?;
        for (cu_index, (cu, rect)) in coded.cus.iter().zip(frame.cu_rects()).enumerate() {
            cache.insert(RdSample {
                frame_index: fi,
                cu_index,
                qp,
                bpp: cu.bpp,
                delta_m: map_diff(&map, &anchor_map, Some(rect))?,
                mse: cu.mse,
            });
        }
    }
    Ok(())
}
