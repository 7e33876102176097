use ndarray::{Array2, ArrayView2};

use crate::{Error, Result};

/// Floor applied to probabilities before taking logs.
pub const LOG_EPSILON: f64 = 1e-12;

/// Mean negative log-likelihood of `hard_labels` under row-stochastic
/// `soft_labels`, and its gradient with respect to the logits that produced
/// them through a softmax: `(p − onehot)/B`.
pub fn cross_entropy(soft_labels: ArrayView2<f64>, hard_labels: &[usize]) -> Result<(f64, Array2<f64>)> {
    let (b, k) = soft_labels.dim();
    if hard_labels.len() != b {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {b} predictions",
            hard_labels.len()
        )));
    }
    if let Some(&label) = hard_labels.iter().find(|&&l| l >= k) {
        return Err(Error::LabelOutOfRange { label, classes: k });
    }
    if b == 0 {
        return Ok((0.0, Array2::zeros((0, k))));
    }
    let scale = 1.0 / b as f64;
    let mut loss = 0.0;
    let mut grad = soft_labels.to_owned();
    for (i, &y) in hard_labels.iter().enumerate() {
        loss -= soft_labels[[i, y]].max(LOG_EPSILON).ln();
        grad[[i, y]] -= 1.0;
    }
    grad.mapv_inplace(|g| g * scale);
    Ok((loss * scale, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn perfect_predictions() {
        let (l, _) = cross_entropy(array![[1.0, 0.0], [0.0, 1.0]].view(), &[0, 1]).unwrap();
        assert!(l <= 1e-9);
    }

    #[test]
    fn uniform_predictions_give_ln_k() {
        let p = Array2::from_elem((3, 5), 0.2);
        let (l, _) = cross_entropy(p.view(), &[0, 3, 4]).unwrap();
        assert!((l - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn zero_probability_is_floored() {
        let (l, _) = cross_entropy(array![[1.0, 0.0]].view(), &[1]).unwrap();
        assert!((l + LOG_EPSILON.ln()).abs() < 1e-9);
    }

    #[test]
    fn bad_labels() {
        assert!(cross_entropy(array![[1.0, 0.0]].view(), &[2]).is_err());
        assert!(cross_entropy(array![[1.0, 0.0]].view(), &[0, 1]).is_err());
    }
}
