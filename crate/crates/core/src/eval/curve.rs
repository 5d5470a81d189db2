use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Rate (bpp) against a quality metric.
#[derive(Debug, Clone, PartialEq)]
pub struct RdCurve {
    label: String,
    points: Vec<(f64, f64)>,
}

impl RdCurve {
    /// Points are stored sorted by rate.
    pub fn new(label: impl Into<String>, mut points: Vec<(f64, f64)>) -> Result<Self> {
        let label = label.into();
        if label.contains(',') || label.contains('\n') {
            return Err(Error::invalid(format!("curve label `{label}` may not contain commas")));
        }
        for &(r, m) in &points {
            if !(r > 0.0 && r.is_finite() && m.is_finite()) {
                return Err(Error::invalid(format!("curve point ({r}, {m}) needs a positive rate and finite metric")));
            }
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid(format!("curve `{label}` repeats a rate")));
        }
        Ok(RdCurve { label, points })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn rates(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn log_rates(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.0.ln()).collect()
    }

    pub fn metrics(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }
}

pub const CURVE_HEADER: &str = "rate,metric,label";

/// Curves as `rate,metric,label` rows.
pub fn curves_to_csv(curves: &[RdCurve], seed: Option<u64>) -> String {
    let mut out = String::new();
    if let Some(seed) = seed {
        let _ = writeln!(out, "# seed={seed}");
    }
    out.push_str(CURVE_HEADER);
    out.push('\n');
    for c in curves {
        for &(r, m) in &c.points {
            let _ = writeln!(out, "{r:e},{m:e},{}", c.label);
        }
    }
    out
}

/// Inverse of [`curves_to_csv`]; curve order is first appearance.
pub fn curves_from_csv(text: &str) -> Result<Vec<RdCurve>> {
    let mut order: Vec<String> = Vec::new();
    let mut points: Vec<Vec<(f64, f64)>> = Vec::new();
    let mut header = false;
    for (i, line) in text.lines().enumerate() {
        let err = |msg: String| Error::Parse {
            path: "<curves>".into(),
            line: i + 1,
            msg,
        };
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !header {
            if line != CURVE_HEADER {
                return Err(err(format!("expected header `{CURVE_HEADER}`")));
            }
            header = true;
            continue;
        }
        let f: Vec<&str> = line.splitn(3, ',').collect();
        if f.len() != 3 {
            return Err(err("expected 3 fields".into()));
        }
        let r: f64 = f[0].parse().map_err(|_| err(format!("bad rate `{}`", f[0])))?;
        let m: f64 = f[1].parse().map_err(|_| err(format!("bad metric `{}`", f[1])))?;
        let k = match order.iter().position(|l| l == f[2]) {
            Some(k) => k,
            None => {
                order.push(f[2].to_string());
                points.push(Vec::new());
                order.len() - 1
            }
        };
        points[k].push((r, m));
    }
    order.into_iter().zip(points).map(|(l, p)| RdCurve::new(l, p)).collect()
}
