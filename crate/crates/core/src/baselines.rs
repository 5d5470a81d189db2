//! Non-learned QP allocations: uniform QP and importance-to-QP curves.

use crate::codec::{Frame, Qp, ACTION_QP_MAX, ACTION_QP_MIN};
use crate::error::{Error, Result};
use crate::semantics::SemanticMap;

pub const DEFAULT_EXPONENT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    Linear,
    Nonlinear,
}

impl CurveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CurveKind::Linear => "linear",
            CurveKind::Nonlinear => "nonlinear",
        }
    }
}

impl std::str::FromStr for CurveKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(CurveKind::Linear),
            "nonlinear" => Ok(CurveKind::Nonlinear),
            _ => Err(Error::invalid(format!("unknown baseline `{s}` (linear or nonlinear)"))),
        }
    }
}

/// Importance `S ∈ [0,1]` to QP. `S = 1` maps to `qp_min`, `S = 0` to
/// `qp_max`; the nonlinear curve bends by `S^exponent`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappingCurve {
    pub kind: CurveKind,
    pub qp_min: Qp,
    pub qp_max: Qp,
    pub exponent: f64,
}

impl MappingCurve {
    pub fn new(kind: CurveKind) -> Self {
        MappingCurve {
            kind,
            qp_min: Qp::new(ACTION_QP_MIN).expect("qp"),
            qp_max: Qp::new(ACTION_QP_MAX).expect("qp"),
            exponent: DEFAULT_EXPONENT,
        }
    }

    pub fn linear() -> Self {
        Self::new(CurveKind::Linear)
    }

    pub fn nonlinear(exponent: f64) -> Self {
        MappingCurve {
            exponent,
            ..Self::new(CurveKind::Nonlinear)
        }
    }

    pub fn with_qp_min(self, qp_min: Qp) -> Self {
        MappingCurve { qp_min, ..self }
    }

    fn validate(&self) -> Result<()> {
        if self.qp_min > self.qp_max {
            return Err(Error::invalid(format!("curve range [{}, {}] is empty", self.qp_min, self.qp_max)));
        }
        if !(self.exponent > 0.0 && self.exponent.is_finite()) {
            return Err(Error::invalid(format!("curve exponent must be positive, got {}", self.exponent)));
        }
        Ok(())
    }
}

/// Mean map value of every CU, normalized by the largest CU mean
/// (all zeros when the map is empty).
pub fn cu_importance(frame: &Frame, map: &SemanticMap) -> Result<Vec<f64>> {
    if map.width() != frame.width() || map.height() != frame.height() {
        return Err(Error::invalid("map does not match the frame"));
    }
    let means: Vec<f64> = frame.cu_rects().map(|r| map.mean_in(r)).collect();
    let max = means.iter().copied().fold(0.0, f64::max);
    Ok(if max > 0.0 {
        means.iter().map(|m| m / max).collect()
    } else {
        vec![0.0; means.len()]
    })
}

pub fn map_to_qp(s: f64, curve: &MappingCurve) -> Result<Qp> {
    curve.validate()?;
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::invalid(format!("importance {s} outside [0, 1]")));
    }
    let shaped = match curve.kind {
        CurveKind::Linear => s,
        CurveKind::Nonlinear => s.powf(curve.exponent),
    };
    let (lo, hi) = (curve.qp_min.value() as f64, curve.qp_max.value() as f64);
    let qp = (hi - shaped * (hi - lo) + 0.5).floor().clamp(lo, hi);
    Qp::new(qp as u8)
}

pub fn handcrafted_qpmap(frame: &Frame, map: &SemanticMap, curve: &MappingCurve) -> Result<Vec<Qp>> {
    cu_importance(frame, map)?.into_iter().map(|s| map_to_qp(s, curve)).collect()
}
