use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::glorot_bound;
use crate::linalg::{matmul, matmul_nt, matmul_tn, softmax_rows};
use crate::{Error, Result};

/// Linear softmax classifier `softmax(x·W + b)` with `W: d×K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LinearClassifier {
    pub fn zeros(latent_dim: usize, classes: usize) -> Self {
        Self {
            weights: Array2::zeros((latent_dim, classes)),
            bias: Array1::zeros(classes),
        }
    }

    pub fn new<R: Rng + ?Sized>(latent_dim: usize, classes: usize, rng: &mut R) -> Self {
        let bound = glorot_bound(latent_dim, classes);
        Self {
            weights: Array2::from_shape_simple_fn((latent_dim, classes), || {
                rng.gen_range(-bound..=bound)
            }),
            bias: Array1::zeros(classes),
        }
    }

    pub fn classes(&self) -> usize {
        self.bias.len()
    }

    pub fn latent_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }

    pub fn logits(&self, latent: ArrayView2<f64>) -> Result<Array2<f64>> {
        if latent.ncols() != self.latent_dim() {
            return Err(Error::DimensionMismatch(format!(
                "latent has {} columns, classifier expects {}",
                latent.ncols(),
                self.latent_dim()
            )));
        }
        let mut z = matmul(latent, self.weights.view());
        for mut row in z.outer_iter_mut() {
            row += &self.bias;
        }
        Ok(z)
    }

    /// `(∂W, ∂b, ∂latent)` for an upstream gradient on the logits.
    pub fn backward(
        &self,
        latent: ArrayView2<f64>,
        grad_logits: ArrayView2<f64>,
    ) -> (Array2<f64>, Array1<f64>, Array2<f64>) {
        let dw = matmul_tn(latent, grad_logits);
        let db = grad_logits.sum_axis(Axis(0));
        let dx = matmul_nt(grad_logits, self.weights.view());
        (dw, db, dx)
    }
}

/// Row-stochastic class probabilities.
pub fn classify(clf: &LinearClassifier, latent: ArrayView2<f64>) -> Result<Array2<f64>> {
    if latent.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("classifier input".into()));
    }
    Ok(softmax_rows(clf.logits(latent)?.view()))
}
