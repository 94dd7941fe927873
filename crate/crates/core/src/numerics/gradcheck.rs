//! Central finite-difference gradient checker.
//!
//! Only defined for 64-bit stores; finite differences at 32 bits are too
//! noisy to say anything useful about an analytic backward pass.

use crate::error::{Error, Result};
use crate::numerics::ParamStore;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: Option<String>,
    pub worst_index: usize,
    /// Analytic and numeric values at the worst entry.
    pub worst_values: (f64, f64),
    pub checked: usize,
}

/// Compares the gradients already stored in `params` with
/// `(f(θ+ε) − f(θ−ε)) / 2ε`, entry by entry over every parameter.
///
/// Relative error per entry uses the denominator `max(|analytic|, |numeric|, 1e-8)`.
pub fn grad_check<F>(params: &mut ParamStore<f64>, epsilon: f64, mut loss_fn: F) -> Result<GradCheckReport>
where
    F: FnMut(&ParamStore<f64>) -> Result<f64>,
{
    if !(1e-6..=1e-3).contains(&epsilon) {
        return Err(Error::Config(format!("grad_check epsilon {epsilon} outside [1e-6, 1e-3]")));
    }
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: None,
        worst_index: 0,
        worst_values: (0.0, 0.0),
        checked: 0,
    };
    let analytic: Vec<Vec<f64>> = params.iter().map(|p| p.grad.data().to_vec()).collect();
    let names: Vec<String> = params.iter().map(|p| p.name.clone()).collect();

    for (pi, (name, grads)) in names.iter().zip(&analytic).enumerate() {
        for (k, &a) in grads.iter().enumerate() {
            let original = nth_value(params, pi, k);
            set_nth_value(params, pi, k, original + epsilon);
            let plus = loss_fn(params);
            set_nth_value(params, pi, k, original - epsilon);
            let minus = loss_fn(params);
            set_nth_value(params, pi, k, original);

            let (plus, minus) = match (plus, minus) {
                (Ok(p), Ok(m)) if p.is_finite() && m.is_finite() => (p, m),
                (Err(e), _) | (_, Err(e)) => return Err(Error::NonFinite(format!("loss while perturbing `{name}`[{k}]: {e}"))),
                _ => return Err(Error::NonFinite(format!("loss while perturbing `{name}`[{k}]"))),
            };
            let numeric = (plus - minus) / (2.0 * epsilon);
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            let rel = (a - numeric).abs() / denom;
            report.checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_param = Some(name.clone());
                report.worst_index = k;
                report.worst_values = (a, numeric);
            }
        }
    }
    Ok(report)
}

fn nth_value(params: &ParamStore<f64>, pi: usize, k: usize) -> f64 {
    params.iter().nth(pi).expect("param index").value.data()[k]
}

fn set_nth_value(params: &mut ParamStore<f64>, pi: usize, k: usize, v: f64) {
    params.iter_mut().nth(pi).expect("param index").value.data_mut()[k] = v;
}
