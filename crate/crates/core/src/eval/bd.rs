use nalgebra::{DMatrix, DVector};

use super::curve::RdCurve;
use crate::error::{Error, Result};

pub const MIN_BD_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BdResult {
    /// Average rate change at equal metric, percent.
    pub bd_br: f64,
    /// Average metric change at equal rate.
    pub bd_metric: f64,
}

/// Coefficients `c0..c3` of the least-squares cubic through `(x, y)`.
pub fn fit_cubic(x: &[f64], y: &[f64]) -> Result<[f64; 4]> {
    if x.len() != y.len() || x.len() < MIN_BD_POINTS {
        return Err(Error::Eval(format!("a cubic fit needs at least {MIN_BD_POINTS} points")));
    }
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let scale = x.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::Eval("cubic fit over a single abscissa".into()));
    }
    let a = DMatrix::from_fn(x.len(), 4, |i, j| ((x[i] - mean) / scale).powi(j as i32));
    let svd = a.svd(true, true);
    if svd.singular_values.iter().any(|&s| s < 1e-12 * svd.singular_values[0]) {
        return Err(Error::Eval("cubic fit is rank deficient (fewer than 4 distinct abscissae)".into()));
    }
    let c = svd
        .solve(&DVector::from_column_slice(y), 0.0)
        .map_err(|e| Error::Eval(format!("cubic fit failed: {e}")))?;
    // Expand p((x − mean)/scale) into powers of x.
    let u = [c[0], c[1] / scale, c[2] / scale.powi(2), c[3] / scale.powi(3)];
    let m = -mean;
    Ok([
        u[0] + u[1] * m + u[2] * m * m + u[3] * m * m * m,
        u[1] + 2.0 * u[2] * m + 3.0 * u[3] * m * m,
        u[2] + 3.0 * u[3] * m,
        u[3],
    ])
}

pub fn poly_integral(c: &[f64; 4], lo: f64, hi: f64) -> f64 {
    let f = |x: f64| c[0] * x + c[1] * x * x / 2.0 + c[2] * x.powi(3) / 3.0 + c[3] * x.powi(4) / 4.0;
    f(hi) - f(lo)
}

fn overlap(a: &[f64], b: &[f64]) -> Result<(f64, f64)> {
    let (amin, amax) = bounds(a);
    let (bmin, bmax) = bounds(b);
    let (lo, hi) = (amin.max(bmin), amax.min(bmax));
    if !(hi > lo) {
        return Err(Error::Eval(format!("curves do not overlap ([{amin}, {amax}] vs [{bmin}, {bmax}])")));
    }
    Ok((lo, hi))
}

fn bounds(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Overlap intervals used for the two deltas: metric range, then
/// log-rate range.
pub fn bd_bounds(test: &RdCurve, anchor: &RdCurve) -> Result<((f64, f64), (f64, f64))> {
    let (tm, am) = (test.metrics(), anchor.metrics());
    let (tr, ar) = (test.log_rates(), anchor.log_rates());
    Ok((overlap(&tm, &am)?, overlap(&tr, &ar)?))
}

/// Bjontegaard deltas of `test` against `anchor` from cubic fits,
/// integrated over the overlapping ranges only.
pub fn bd_rate(test: &RdCurve, anchor: &RdCurve) -> Result<BdResult> {
    for c in [test, anchor] {
        if c.points().len() < MIN_BD_POINTS {
            return Err(Error::Eval(format!(
                "curve `{}` has {} points, BD needs {MIN_BD_POINTS}",
                c.label(),
                c.points().len()
            )));
        }
    }
    let ((mlo, mhi), (rlo, rhi)) = bd_bounds(test, anchor)?;
    let (tm, am) = (test.metrics(), anchor.metrics());
    let (tr, ar) = (test.log_rates(), anchor.log_rates());

    let rate_t = fit_cubic(&tm, &tr)?;
    let rate_a = fit_cubic(&am, &ar)?;
    let avg_log_diff = (poly_integral(&rate_t, mlo, mhi) - poly_integral(&rate_a, mlo, mhi)) / (mhi - mlo);

    let metric_t = fit_cubic(&tr, &tm)?;
    let metric_a = fit_cubic(&ar, &am)?;
    let avg_metric_diff = (poly_integral(&metric_t, rlo, rhi) - poly_integral(&metric_a, rlo, rhi)) / (rhi - rlo);

    let out = BdResult {
        bd_br: (avg_log_diff.exp() - 1.0) * 100.0,
        bd_metric: avg_metric_diff,
    };
    if !out.bd_br.is_finite() || !out.bd_metric.is_finite() {
        return Err(Error::Eval("BD result is not finite".into()));
    }
    Ok(out)
}
