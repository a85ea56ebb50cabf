//! Central finite-difference verification of the analytic gradients.
//!
//! The numeric side always runs in 64-bit, on a widened copy of the
//! parameters and inputs, so a 32-bit model is checked against an oracle
//! that does not share its rounding.

use ndarray::{ArrayView2, ArrayView3};

use super::network::{backward, forward, loss};
use super::params::{Gradients, ModelParams};
use super::LstmError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_tensor: &'static str,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub checked: usize,
}

/// `|a - n| / max(|a| + |n|, 1e-8)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8)
}

fn loss64(p: &ModelParams<f64>, batch: ArrayView3<'_, f64>, targets: ArrayView2<'_, f64>, lambda: f64) -> Result<f64, LstmError> {
    let (probs, _) = forward(p, batch)?;
    loss(probs.view(), targets, p, lambda)
}

/// Compares the analytic gradient of the model to central differences with
/// step `epsilon` over every parameter and returns the worst relative error.
pub fn grad_check<F: Scalar>(
    params: &ModelParams<F>,
    batch: ArrayView3<'_, F>,
    targets: ArrayView2<'_, F>,
    lambda: f64,
    epsilon: f64,
) -> Result<GradCheckReport, LstmError> {
    let (_, cache) = forward(params, batch)?;
    let grads = backward(&cache, targets, params, F::of(lambda))?;
    grad_check_against(params, &grads, batch, targets, lambda, epsilon)
}

/// Same as [`grad_check`] but with caller-supplied analytic gradients.
pub fn grad_check_against<F: Scalar>(
    params: &ModelParams<F>,
    grads: &Gradients<F>,
    batch: ArrayView3<'_, F>,
    targets: ArrayView2<'_, F>,
    lambda: f64,
    epsilon: f64,
) -> Result<GradCheckReport, LstmError> {
    if !grads.same_shape(params) {
        return Err(LstmError::ShapeMismatch("gradients do not match parameters".into()));
    }
    let batch64 = batch.mapv(|v| v.as_f64());
    let targets64 = targets.mapv(|v| v.as_f64());
    let mut probe: ModelParams<f64> = params.cast();

    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_tensor: "",
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        checked: 0,
    };
    let analytic: Vec<(&'static str, Vec<f64>)> = grads
        .tensors()
        .iter()
        .map(|t| (t.name, t.data.iter().map(|v| v.as_f64()).collect()))
        .collect();

    for (ti, (name, a_vals)) in analytic.iter().enumerate() {
        for (k, &a) in a_vals.iter().enumerate() {
            let orig = probe.tensors()[ti].data[k];
            probe.tensors_mut()[ti].data[k] = orig + epsilon;
            let plus = loss64(&probe, batch64.view(), targets64.view(), lambda)?;
            probe.tensors_mut()[ti].data[k] = orig - epsilon;
            let minus = loss64(&probe, batch64.view(), targets64.view(), lambda)?;
            probe.tensors_mut()[ti].data[k] = orig;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let err = relative_error(a, numeric);
            report.checked += 1;
            if err > report.max_relative_error || report.worst_tensor.is_empty() {
                report.max_relative_error = err;
                report.worst_tensor = name;
                report.worst_index = k;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
