//! λ/QP relations and the hyperbolic rate-distortion model `D = C·R^(-K)`.

use crate::error::{Error, Result};

const QP_PER_LN_LAMBDA: f64 = 4.2005;
const QP_AT_UNIT_LAMBDA: f64 = 13.7122;

/// `λ = exp((qp - 13.7122) / 4.2005)`; takes a real QP so that fractional
/// values can be probed.
pub fn qp_to_lambda(qp: f64) -> f64 {
    ((qp - QP_AT_UNIT_LAMBDA) / QP_PER_LN_LAMBDA).exp()
}

/// `qp = 4.2005·ln λ + 13.7122`.
pub fn lambda_to_qp(lambda: f64) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("lambda {lambda} must be positive and finite")));
    }
    Ok(QP_PER_LN_LAMBDA * lambda.ln() + QP_AT_UNIT_LAMBDA)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperbolicRdModel {
    pub c: f64,
    pub k: f64,
}

impl HyperbolicRdModel {
    pub fn new(c: f64, k: f64) -> Result<Self> {
        if !(c > 0.0 && k > 0.0) || !c.is_finite() || !k.is_finite() {
            return Err(Error::Fit(format!("model parameters C={c}, K={k} must be positive")));
        }
        Ok(HyperbolicRdModel { c, k })
    }

    pub fn distortion(&self, rate: f64) -> f64 {
        self.c * rate.powf(-self.k)
    }

    /// `α = C·K` in `λ = α·R^β`.
    pub fn alpha(&self) -> f64 {
        self.c * self.k
    }

    /// `β = -K - 1`.
    pub fn beta(&self) -> f64 {
        -self.k - 1.0
    }

    /// Slope magnitude `-dD/dR = C·K·R^(-K-1)`.
    pub fn lambda_at(&self, rate: f64) -> f64 {
        self.alpha() * rate.powf(self.beta())
    }

    /// Rate achieving slope `lambda`: `R = (λ/α)^(1/β)`.
    pub fn rate_at(&self, lambda: f64) -> f64 {
        (lambda / self.alpha()).powf(1.0 / self.beta())
    }
}

/// Least-squares line through `(ln R, ln D)`: `K = -slope`, `C = exp(intercept)`.
pub fn fit_hyperbolic_rd(samples: &[(f64, f64)]) -> Result<HyperbolicRdModel> {
    if samples.len() < 2 {
        return Err(Error::Fit(format!("{} samples, need at least 2", samples.len())));
    }
    if let Some(&(r, d)) = samples
        .iter()
        .find(|(r, d)| !(*r > 0.0 && *d > 0.0) || !r.is_finite() || !d.is_finite())
    {
        return Err(Error::Fit(format!("sample (R={r}, D={d}) is not strictly positive")));
    }
    let n = samples.len() as f64;
    let xs: Vec<f64> = samples.iter().map(|(r, _)| r.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|(_, d)| d.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= f64::EPSILON * n * mx.abs().max(1.0) {
        return Err(Error::Fit("all samples share the same rate".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    HyperbolicRdModel::new(intercept.exp(), -slope)
}
