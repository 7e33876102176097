use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::ot::TransportPlan;
use crate::{Error, Result};

/// Floor applied to the second plan before taking logs in [`kl_plans`].
pub const KL_CLAMP: f64 = 1e-30;

/// Which plan divergence to report and penalize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KlVariant {
    /// `−Σ A_ij log B_ij`, nonzero for `A = B`.
    #[default]
    CrossEntropy,
    /// `Σ A_ij log(A_ij / B_ij)`.
    TrueKl,
}

/// Mean over rows of `−Σ_k a_k log a_k`, with `0·log 0 = 0`.
pub fn target_entropy(soft_labels: ArrayView2<f64>) -> f64 {
    let rows = soft_labels.nrows();
    if rows == 0 {
        return 0.0;
    }
    let total: f64 = soft_labels
        .iter()
        .map(|&p| if p > 0.0 { -p * p.ln() } else { 0.0 })
        .sum();
    total / rows as f64
}

/// Gradient of [`target_entropy`] with respect to the logits that produced
/// `soft_labels` through a row softmax.
pub fn entropy_grad_logits(soft_labels: ArrayView2<f64>) -> Array2<f64> {
    let b = soft_labels.nrows().max(1) as f64;
    let mut out = Array2::zeros(soft_labels.dim());
    for (p, mut g) in soft_labels.outer_iter().zip(out.outer_iter_mut()) {
        let plogp: f64 = p.iter().map(|&v| if v > 0.0 { v * v.ln() } else { 0.0 }).sum();
        for (gk, &pk) in g.iter_mut().zip(p.iter()) {
            if pk > 0.0 {
                *gk = -pk * (pk.ln() - plogp) / b;
            }
        }
    }
    out
}

/// `−Σ A_ij log max(B_ij, 1e-30)`.
pub fn kl_plans(plan_a: &TransportPlan, plan_b: &TransportPlan) -> Result<f64> {
    kl_plans_with(plan_a, plan_b, KlVariant::CrossEntropy)
}

pub fn kl_plans_with(plan_a: &TransportPlan, plan_b: &TransportPlan, variant: KlVariant) -> Result<f64> {
    kl_entries(plan_a.entries(), plan_b.entries(), variant)
}

pub(crate) fn kl_entries(a: ArrayView2<f64>, b: ArrayView2<f64>, variant: KlVariant) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "plans have shapes {:?} and {:?}",
            a.dim(),
            b.dim()
        )));
    }
    let cross: f64 = a
        .iter()
        .zip(b.iter())
        .map(|(&x, &y)| if x == 0.0 { 0.0 } else { -x * y.max(KL_CLAMP).ln() })
        .sum();
    Ok(match variant {
        KlVariant::CrossEntropy => cross,
        KlVariant::TrueKl => {
            let neg_entropy: f64 = a.iter().map(|&x| if x > 0.0 { x * x.ln() } else { 0.0 }).sum();
            cross + neg_entropy
        }
    })
}
