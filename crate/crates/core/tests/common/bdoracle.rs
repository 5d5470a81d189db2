//! A pinned pair of 4-point RD curves and a brute-force BD oracle for them.

pub const ANCHOR: [(f64, f64); 4] = [(0.12, 0.61), (0.25, 0.74), (0.48, 0.85), (0.90, 0.93)];
pub const TEST: [(f64, f64); 4] = [(0.09, 0.60), (0.19, 0.75), (0.37, 0.86), (0.74, 0.95)];

/// Value at `x` of the cubic through four points.
fn lagrange(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    (0..4)
        .map(|i| {
            let w: f64 = (0..4).filter(|&j| j != i).map(|j| (x - xs[j]) / (xs[i] - xs[j])).product();
            ys[i] * w
        })
        .sum()
}

/// Midpoint-rule average of `f − g` over `[lo, hi]` with 10⁶ samples.
fn average_gap(f: impl Fn(f64) -> f64, g: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let n = 1_000_000;
    let dx = (hi - lo) / n as f64;
    (0..n).map(|k| lo + (k as f64 + 0.5) * dx).map(|x| f(x) - g(x)).sum::<f64>() / n as f64
}

fn unzip(p: &[(f64, f64)]) -> (Vec<f64>, Vec<f64>) {
    (p.iter().map(|q| q.0.ln()).collect(), p.iter().map(|q| q.1).collect())
}

/// (bd_br percent, bd_metric) of `test` against `anchor` by numeric
/// integration of the interpolating cubics. Both curves must have
/// increasing metrics.
pub fn numeric_bd(test: &[(f64, f64)], anchor: &[(f64, f64)]) -> (f64, f64) {
    let (tr, tm) = unzip(test);
    let (ar, am) = unzip(anchor);
    let (mlo, mhi) = (tm[0].max(am[0]), tm[3].min(am[3]));
    let (rlo, rhi) = (tr[0].max(ar[0]), tr[3].min(ar[3]));
    let log_gap = average_gap(|m| lagrange(&tm, &tr, m), |m| lagrange(&am, &ar, m), mlo, mhi);
    let metric_gap = average_gap(|r| lagrange(&tr, &tm, r), |r| lagrange(&ar, &am, r), rlo, rhi);
    ((log_gap.exp() - 1.0) * 100.0, metric_gap)
}
