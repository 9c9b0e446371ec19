//! Central finite-difference check of the analytic gradient.

use serde::{Deserialize, Serialize};

use super::model::{loss, loss_and_grad, HanConfig, HanParams, SectionInput};
use crate::error::Result;

/// Gradient magnitudes below this are compared on an absolute scale; a
/// central difference with step 1e-4 cannot resolve smaller values.
pub const REL_ERROR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub worst_tensor: String,
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compares every parameter's analytic derivative against
/// `(L(p + eps) - L(p - eps)) / 2 eps`.
pub fn check(
    config: &HanConfig,
    params: &HanParams,
    batch: &[(SectionInput, usize)],
    eps: f64,
) -> Result<GradCheckReport> {
    let (_, grad) = loss_and_grad(config, params, batch)?;
    let analytic: Vec<(&'static str, Vec<f64>)> = grad
        .tensors()
        .into_iter()
        .map(|(n, t)| (n, t.to_vec()))
        .collect();
    let mut probe = params.clone();
    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst_tensor: String::new(),
        worst_index: 0,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
    };
    for (ti, (name, g)) in analytic.iter().enumerate() {
        for (i, &a) in g.iter().enumerate() {
            let orig = params.tensors()[ti].1[i];
            probe.tensors_mut()[ti].1[i] = orig + eps;
            let up = loss(config, &probe, batch)?;
            probe.tensors_mut()[ti].1[i] = orig - eps;
            let down = loss(config, &probe, batch)?;
            probe.tensors_mut()[ti].1[i] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let rel = rel_error(a, numeric);
            report.checked += 1;
            report.max_abs_error = report.max_abs_error.max((a - numeric).abs());
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_tensor = name.to_string();
                report.worst_index = i;
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    Ok(report)
}
