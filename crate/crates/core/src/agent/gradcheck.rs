//! Central finite-difference checks of analytic gradients.

use super::network::{Gradients, QNetwork};
use crate::error::{Error, Result};

pub const FD_STEP: f64 = 1e-5;
pub const MAX_RELATIVE_ERROR: f64 = 1e-4;
/// Denominator floor so that near-zero gradients are compared absolutely.
pub const ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    /// Parameters left out because their perturbation crossed a kink.
    pub skipped: usize,
    pub max_relative_error: f64,
    /// Flat index of the worst parameter.
    pub worst: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradCheckReport {
    pub fn passes(&self) -> bool {
        self.max_relative_error < MAX_RELATIVE_ERROR
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(ERROR_FLOOR)
}

pub fn flatten_gradients(grads: &Gradients<f64>) -> Vec<f64> {
    let mut out = Vec::new();
    for g in grads {
        out.extend_from_slice(g.weight.data());
        out.extend_from_slice(g.bias.data());
    }
    out
}

/// Compares `loss`'s analytic gradient against central differences for the
/// parameters listed in `indices` (flat ordering).
pub fn check_gradients<F>(net: &QNetwork<f64>, loss: F, indices: &[usize], h: f64) -> Result<GradCheckReport>
where
    F: Fn(&QNetwork<f64>) -> Result<(f64, Gradients<f64>)>,
{
    check_gradients_with(net, loss, None::<fn(&QNetwork<f64>) -> Vec<bool>>, indices, h)
}

/// As [`check_gradients`], but a parameter is skipped when `pattern` (e.g.
/// [`Activations::sign_pattern`](super::Activations::sign_pattern) over the
/// batch) differs between the two probes: the loss is not differentiable
/// across the step there and the central difference means nothing.
pub fn check_gradients_with<F, P>(
    net: &QNetwork<f64>,
    loss: F,
    pattern: Option<P>,
    indices: &[usize],
    h: f64,
) -> Result<GradCheckReport>
where
    F: Fn(&QNetwork<f64>) -> Result<(f64, Gradients<f64>)>,
    P: Fn(&QNetwork<f64>) -> Vec<bool>,
{
    let (_, grads) = loss(net)?;
    let analytic = flatten_gradients(&grads);
    let mut probe = net.clone();
    let mut report = GradCheckReport {
        checked: 0,
        skipped: 0,
        max_relative_error: 0.0,
        worst: 0,
        analytic: 0.0,
        numeric: 0.0,
    };
    for &i in indices {
        let original = *probe
            .param_mut(i)
            .ok_or_else(|| Error::invalid(format!("parameter {i} out of range")))?;
        *probe.param_mut(i).expect("checked") = original + h;
        let plus = loss(&probe)?.0;
        let above = pattern.as_ref().map(|p| p(&probe));
        *probe.param_mut(i).expect("checked") = original - h;
        let minus = loss(&probe)?.0;
        let below = pattern.as_ref().map(|p| p(&probe));
        *probe.param_mut(i).expect("checked") = original;
        if above != below {
            report.skipped += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * h);
        let err = relative_error(analytic[i], numeric);
        if report.checked == 0 || err > report.max_relative_error {
            report.max_relative_error = err;
            report.worst = i;
            report.analytic = analytic[i];
            report.numeric = numeric;
        }
        report.checked += 1;
    }
    Ok(report)
}
