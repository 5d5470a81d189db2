use std::sync::Arc;

use crate::codec::{Frame, Qp, Rect, ACTION_QP_MAX, ACTION_QP_MIN};
use crate::error::{Error, Result};
use crate::semantics::{instances_in, mask_ratio, Semantics, MASK_THRESHOLD};

pub const GLOBAL_FEATURES: usize = 15;
pub const PATCH_SIZE: usize = 64;

/// Slot layout of [`GlobalFeatures`].
pub mod slot {
    pub const CU_COUNT: usize = 0;
    pub const CU_INDEX: usize = 1;
    pub const MASK_CURRENT: usize = 2;
    /// Left, above, right, below.
    pub const MASK_NEIGHBOURS: usize = 3;
    pub const MASK_FRAME: usize = 7;
    pub const INSTANCES_CURRENT: usize = 8;
    /// Left, above, right, below.
    pub const INSTANCES_NEIGHBOURS: usize = 9;
    pub const QP_LEFT: usize = 13;
    pub const QP_ABOVE: usize = 14;
}

/// Value used for a neighbour that does not exist or a QP not yet decided.
pub const MISSING: f64 = -1.0;

const INSTANCE_SCALE: f64 = 10.0;

/// The 15-d global part of the observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalFeatures(pub [f64; GLOBAL_FEATURES]);

impl GlobalFeatures {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn normalize_qp(qp: Qp) -> f64 {
    (qp.value() as f64 - ACTION_QP_MIN as f64) / (ACTION_QP_MAX - ACTION_QP_MIN) as f64
}

fn normalize_instances(count: usize) -> f64 {
    (count as f64 / INSTANCE_SCALE).min(1.0)
}

/// Observation for one CU: luma and map patches plus global features.
///
/// Patches depend only on the frame and CU, so they are shared between the
/// states that differ only in previously chosen QPs.
#[derive(Debug, Clone, PartialEq)]
pub struct CuState {
    /// `PATCH_SIZE²` luma samples scaled to `[0, 1]`, zero outside the frame.
    pub luma_patch: Arc<[f32]>,
    /// `PATCH_SIZE²` importance values from the pre-coding map.
    pub map_patch: Arc<[f32]>,
    pub globals: GlobalFeatures,
}

#[derive(Debug, Clone)]
struct CuStatic {
    luma: Arc<[f32]>,
    map: Arc<[f32]>,
    mask: f64,
    instances: f64,
    /// Left, above, right, below.
    neighbours: [Option<usize>; 4],
}

/// Precomputed per-CU observation parts of one frame.
#[derive(Debug, Clone)]
pub struct StateBuilder {
    cols: usize,
    cus: Vec<CuStatic>,
    frame_mask: f64,
}

impl StateBuilder {
    pub fn new(frame: &Frame, semantics: &Semantics) -> Result<Self> {
        if frame.ctu_size() != PATCH_SIZE {
            return Err(Error::invalid(format!(
                "observation patches are {PATCH_SIZE}x{PATCH_SIZE}, frame uses {} CTUs",
                frame.ctu_size()
            )));
        }
        let map = &semantics.map;
        if map.width() != frame.width() || map.height() != frame.height() {
            return Err(Error::invalid(format!(
                "map {}x{} does not match frame {}x{}",
                map.width(),
                map.height(),
                frame.width(),
                frame.height()
            )));
        }
        let (cols, rows) = (frame.cu_cols(), frame.cu_rows());
        let frame_mask = mask_ratio(map, map.full_rect(), MASK_THRESHOLD)?;
        let mut cus = Vec::with_capacity(frame.cu_count());
        for (index, rect) in frame.cu_rects().enumerate() {
            let (cx, cy) = (index % cols, index / cols);
            let neighbours = [
                (cx > 0).then(|| index - 1),
                (cy > 0).then(|| index - cols),
                (cx + 1 < cols).then(|| index + 1),
                (cy + 1 < rows).then(|| index + cols),
            ];
            cus.push(CuStatic {
                luma: patch(rect, |x, y| frame.at(x, y) as f32 / 255.0),
                map: patch(rect, |x, y| map.at(x, y) as f32),
                mask: mask_ratio(map, rect, MASK_THRESHOLD)?,
                instances: normalize_instances(instances_in(&semantics.layout, rect)),
                neighbours,
            });
        }
        Ok(StateBuilder {
            cols,
            cus,
            frame_mask,
        })
    }

    pub fn cu_count(&self) -> usize {
        self.cus.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// State of CU `index` given the QPs decided so far (`chosen[i]` for
    /// earlier CUs in raster order).
    pub fn state(&self, index: usize, chosen: &[Option<Qp>]) -> CuState {
        let cu = &self.cus[index];
        let total = self.cus.len() as f64;
        let mut g = [MISSING; GLOBAL_FEATURES];
        g[slot::CU_COUNT] = total;
        g[slot::CU_INDEX] = index as f64 / total;
        g[slot::MASK_CURRENT] = cu.mask;
        g[slot::MASK_FRAME] = self.frame_mask;
        g[slot::INSTANCES_CURRENT] = cu.instances;
        for (k, n) in cu.neighbours.iter().enumerate() {
            if let Some(n) = *n {
                g[slot::MASK_NEIGHBOURS + k] = self.cus[n].mask;
                g[slot::INSTANCES_NEIGHBOURS + k] = self.cus[n].instances;
            }
        }
        let qp_of = |n: Option<usize>| {
            n.and_then(|n| chosen.get(n).copied().flatten())
                .map(normalize_qp)
                .unwrap_or(MISSING)
        };
        g[slot::QP_LEFT] = qp_of(cu.neighbours[0]);
        g[slot::QP_ABOVE] = qp_of(cu.neighbours[1]);
        CuState {
            luma_patch: cu.luma.clone(),
            map_patch: cu.map.clone(),
            globals: GlobalFeatures(g),
        }
    }
}

fn patch(rect: Rect, value: impl Fn(usize, usize) -> f32) -> Arc<[f32]> {
    let mut p = vec![0.0f32; PATCH_SIZE * PATCH_SIZE];
    for y in 0..rect.height {
        for x in 0..rect.width {
            p[y * PATCH_SIZE + x] = value(rect.x + x, rect.y + y);
        }
    }
    p.into()
}
