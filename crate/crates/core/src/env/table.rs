use crate::codec::{encode_frame_uniform, Frame, Qp, ACTION_COUNT, ACTION_QP_MIN};
use crate::dataset::DatasetCache;
use crate::error::{Error, Result};
use crate::semantics::{map_diff, OracleQuery, SemanticOracle, View};

/// Per-CU, per-action outcomes of one frame: rate gain over the anchor and
/// map change against the anchor map.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardTable {
    delta_bpp: Vec<[f64; ACTION_COUNT]>,
    delta_m: Vec<[f64; ACTION_COUNT]>,
}

impl RewardTable {
    /// From raw `bpp` and `delta_m` rows indexed `[cu][action]`; rate gains
    /// are taken against action `anchor_action`.
    pub fn from_rows(bpp: Vec<[f64; ACTION_COUNT]>, delta_m: Vec<[f64; ACTION_COUNT]>, anchor_action: usize) -> Result<Self> {
        if bpp.len() != delta_m.len() || bpp.is_empty() {
            return Err(Error::invalid("reward rows must be non-empty and of equal length"));
        }
        if anchor_action >= ACTION_COUNT {
            return Err(Error::invalid(format!("anchor action {anchor_action}")));
        }
        let delta_bpp = bpp
            .iter()
            .map(|row| {
                let mut out = [0.0; ACTION_COUNT];
                for (o, &b) in out.iter_mut().zip(row) {
                    *o = row[anchor_action] - b;
                }
                out
            })
            .collect();
        Ok(RewardTable { delta_bpp, delta_m })
    }

    /// Tabular mode: read a cached frame.
    pub fn from_cache(cache: &DatasetCache, frame_index: usize) -> Result<Self> {
        let meta = cache
            .frames
            .get(frame_index)
            .ok_or_else(|| Error::NotFound(format!("frame index {frame_index} not in cache")))?;
        let anchor_action = cache
            .anchor_qp
            .action_index()
            .ok_or_else(|| Error::invalid(format!("anchor qp {} outside action range", cache.anchor_qp)))?;
        let mut bpp = Vec::with_capacity(meta.cu_count);
        let mut dm = Vec::with_capacity(meta.cu_count);
        for cu in 0..meta.cu_count {
            let mut b = [0.0; ACTION_COUNT];
            let mut d = [0.0; ACTION_COUNT];
            for a in 0..ACTION_COUNT {
                let row = cache.lookup(frame_index, cu, Qp::from_action(a)?)?;
                b[a] = row.bpp;
                d[a] = row.delta_m;
            }
            bpp.push(b);
            dm.push(d);
        }
        Self::from_rows(bpp, dm, anchor_action)
    }

    /// Live mode: encode the frame at every action QP and query the oracle.
    pub fn live(frame: &Frame, frame_id: &str, oracle: &dyn SemanticOracle, anchor_qp: Qp) -> Result<Self> {
        let anchor_action = anchor_qp
            .action_index()
            .ok_or_else(|| Error::invalid(format!("anchor qp {anchor_qp} outside action range")))?;
        let n = frame.cu_count();
        let mut bpp = vec![[0.0; ACTION_COUNT]; n];
        let mut dm = vec![[0.0; ACTION_COUNT]; n];
        let mut maps = Vec::with_capacity(ACTION_COUNT);
        for a in 0..ACTION_COUNT {
            let qp = Qp::from_action(a)?;
            let coded = encode_frame_uniform(frame, qp);
            let sem = oracle.evaluate(&coded.reconstruction, OracleQuery::new(frame_id, View::Uniform(qp)))?;
            for (cu, r) in coded.cus.iter().enumerate() {
                bpp[cu][a] = r.bpp;
            }
            maps.push(sem.map);
        }
        for a in 0..ACTION_COUNT {
            for (cu, rect) in frame.cu_rects().enumerate() {
                dm[cu][a] = map_diff(&maps[a], &maps[anchor_action], Some(rect))?;
            }
        }
        Self::from_rows(bpp, dm, anchor_action)
    }

    pub fn cu_count(&self) -> usize {
        self.delta_bpp.len()
    }

    pub fn delta_bpp(&self, cu: usize, action: usize) -> f64 {
        self.delta_bpp[cu][action]
    }

    pub fn delta_m(&self, cu: usize, action: usize) -> f64 {
        self.delta_m[cu][action]
    }

    /// `ΔBpp − α_s·ΔM` for taking `action` on `cu`.
    pub fn reward(&self, cu: usize, action: usize, alpha_s: f64) -> f64 {
        self.delta_bpp[cu][action] - alpha_s * self.delta_m[cu][action]
    }

    /// Reward-maximizing action per CU (lowest index on ties).
    pub fn best_actions(&self, alpha_s: f64) -> Vec<usize> {
        (0..self.cu_count())
            .map(|cu| {
                let mut best = 0;
                for a in 1..ACTION_COUNT {
                    if self.reward(cu, a, alpha_s) > self.reward(cu, best, alpha_s) {
                        best = a;
                    }
                }
                best
            })
            .collect()
    }
}

pub(crate) fn action_of(qp: Qp) -> Result<usize> {
    qp.action_index().ok_or_else(|| {
        Error::invalid(format!(
            "qp {qp} is outside the action range starting at {ACTION_QP_MIN}"
        ))
    })
}
