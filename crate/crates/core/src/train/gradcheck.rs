use super::bptt::{backward, loss, BackwardOptions};
use crate::error::Result;
use crate::linalg::Matrix;
use crate::model::Model;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Matrix name and coordinate of the worst entry.
    pub worst: (String, usize, usize),
    pub analytic: f64,
    pub numeric: f64,
}

/// Largest relative disagreement between the analytic gradient and central
/// differences, `|g_a - g_fd| / max(1e-8, |g_a| + |g_fd|)`.
pub fn grad_check(model: &Model, inputs: &Matrix, targets: &Matrix, step: f64, l2: f64) -> Result<f64> {
    Ok(grad_check_report(model, inputs, targets, step, l2)?.max_rel_error)
}

pub fn grad_check_report(model: &Model, inputs: &Matrix, targets: &Matrix, step: f64, l2: f64) -> Result<GradCheckReport> {
    let opts = BackwardOptions { l2, truncation_window: None };
    let (_, grads) = backward(model, inputs, targets, &opts)?;
    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (String::new(), 0, 0),
        analytic: 0.0,
        numeric: 0.0,
    };
    for (mi, name) in grads.names.iter().enumerate() {
        let (rows, cols) = grads.mats[mi].shape();
        for r in 0..rows {
            for c in 0..cols {
                let original = probe.matrices()[mi][(r, c)];
                probe.matrices_mut()[mi][(r, c)] = original + step;
                let plus = loss(&probe, inputs, targets, l2)?;
                probe.matrices_mut()[mi][(r, c)] = original - step;
                let minus = loss(&probe, inputs, targets, l2)?;
                probe.matrices_mut()[mi][(r, c)] = original;

                let numeric = (plus - minus) / (2.0 * step);
                let analytic = grads.mats[mi][(r, c)];
                let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(1e-8);
                if rel > report.max_rel_error {
                    report = GradCheckReport {
                        max_rel_error: rel,
                        worst: (name.clone(), r, c),
                        analytic,
                        numeric,
                    };
                }
            }
        }
    }
    Ok(report)
}
