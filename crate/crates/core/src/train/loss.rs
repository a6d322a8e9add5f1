use crate::error::{Error, Result};
use crate::linalg::Matrix;

const CLAMP: f64 = 1e-12;

/// Frame-wise binary cross-entropy: the mean over timesteps of the summed
/// per-unit cross-entropy, with predictions clamped to `[1e-12, 1 - 1e-12]`.
pub fn bce_loss(predictions: &Matrix, targets: &Matrix) -> Result<f64> {
    check_targets(predictions, targets)?;
    let l = predictions.rows() as f64;
    let total: f64 = predictions
        .data()
        .iter()
        .zip(targets.data())
        .map(|(&y, &t)| {
            let y = y.clamp(CLAMP, 1.0 - CLAMP);
            -(t * y.ln() + (1.0 - t) * (1.0 - y).ln())
        })
        .sum();
    Ok(total / l)
}

/// Gradient of [`bce_loss`] with respect to the sigmoid pre-activations:
/// `(y - t) / l`.
pub fn bce_output_delta(predictions: &Matrix, targets: &Matrix) -> Result<Matrix> {
    check_targets(predictions, targets)?;
    let mut delta = predictions.sub(targets);
    delta.scale(1.0 / predictions.rows() as f64);
    Ok(delta)
}

fn check_targets(predictions: &Matrix, targets: &Matrix) -> Result<()> {
    if predictions.shape() != targets.shape() {
        return Err(Error::shape(
            "loss targets",
            format!("{:?}", predictions.shape()),
            format!("{:?}", targets.shape()),
        ));
    }
    if targets.data().iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::InvalidInput("loss targets must lie in [0, 1]".into()));
    }
    Ok(())
}
