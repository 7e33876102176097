use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::objective::{entropy_grad_logits, kl_entries, target_entropy};
use super::{CollabConfig, DualPlans, KlVariant};
use crate::cost::{feature_gradients, geodesic_entries, label_gradients, GeodesicCostParams};
use crate::linalg::{one_hot, softmax_rows};
use crate::models::{cross_entropy, Gradients, LinearClassifier, MlpEmbedding, Tape};
use crate::ot::{transport_cost, CostMatrix};
use crate::{Error, Result};

/// Weights of the terms of the total loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub alpha_plan: f64,
    pub kl_variant: KlVariant,
}

impl LossWeights {
    pub fn from_config(cfg: &CollabConfig) -> Self {
        Self {
            lambda1: cfg.lambda1,
            lambda2: cfg.lambda2,
            lambda3: cfg.lambda3,
            alpha_plan: cfg.alpha_plan,
            kl_variant: cfg.kl_variant,
        }
    }
}

/// Forward-pass outputs of one source and one target minibatch together
/// with both cost matrices.
#[derive(Debug, Clone)]
pub struct BatchState {
    pub source_latent: Array2<f64>,
    pub source_logits: Array2<f64>,
    pub source_soft: Array2<f64>,
    pub source_labels: Vec<usize>,
    pub target_latent: Array2<f64>,
    pub target_logits: Array2<f64>,
    pub target_soft: Array2<f64>,
    /// k-NN labels of the target batch.
    pub target_pseudo_labels: Vec<usize>,
    pub num_classes: usize,
    pub cost_params: GeodesicCostParams,
    /// Classifier soft labels on both sides.
    pub cost1: CostMatrix,
    /// True source labels against k-NN target labels, one-hot.
    pub cost2: CostMatrix,
}

impl BatchState {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        source_latent: Array2<f64>,
        source_logits: Array2<f64>,
        source_labels: Vec<usize>,
        target_latent: Array2<f64>,
        target_logits: Array2<f64>,
        target_pseudo_labels: Vec<usize>,
        num_classes: usize,
        cost_params: GeodesicCostParams,
    ) -> Result<Self> {
        if source_labels.len() != source_latent.nrows() || target_pseudo_labels.len() != target_latent.nrows() {
            return Err(Error::DimensionMismatch("label count differs from batch size".into()));
        }
        if source_logits.ncols() != num_classes || target_logits.ncols() != num_classes {
            return Err(Error::DimensionMismatch("logit width differs from class count".into()));
        }
        if let Some(&label) = source_labels.iter().chain(&target_pseudo_labels).find(|&&l| l >= num_classes) {
            return Err(Error::LabelOutOfRange { label, classes: num_classes });
        }
        let source_soft = softmax_rows(source_logits.view());
        let target_soft = softmax_rows(target_logits.view());
        let (c1, _) = geodesic_entries(
            source_latent.view(),
            target_latent.view(),
            source_soft.view(),
            target_soft.view(),
            &cost_params,
        );
        let (c2, _) = geodesic_entries(
            source_latent.view(),
            target_latent.view(),
            one_hot(&source_labels, num_classes).view(),
            one_hot(&target_pseudo_labels, num_classes).view(),
            &cost_params,
        );
        // Overflowing latents are a training blow-up, not bad input.
        for (name, c) in [("classifier", &c1), ("k-NN", &c2)] {
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("{name} cost matrix of the minibatch")));
            }
        }
        Ok(Self {
            source_latent,
            source_logits,
            source_soft,
            source_labels,
            target_latent,
            target_logits,
            target_soft,
            target_pseudo_labels,
            num_classes,
            cost_params,
            cost1: CostMatrix::new(c1)?,
            cost2: CostMatrix::new(c2)?,
        })
    }
}

/// Per-component values of the total loss.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub ce: f64,
    /// `⟨γ₁, C̃₁⟩`.
    pub ot_classifier: f64,
    /// `⟨γ₂, C̃₂⟩`.
    pub ot_knn: f64,
    /// `a·⟨γ₁,C̃₁⟩ + (1−a)·⟨γ₂,C̃₂⟩`.
    pub ot: f64,
    pub entropy: f64,
    pub kl: f64,
    pub total: f64,
}

/// Gradients of the total loss on the forward-pass outputs, plans fixed.
#[derive(Debug, Clone)]
pub struct LossGradients {
    pub source_latent: Array2<f64>,
    pub source_logits: Array2<f64>,
    pub target_latent: Array2<f64>,
    pub target_logits: Array2<f64>,
}

/// Pulls a gradient on softmax outputs back to the logits.
fn softmax_backward(p: ArrayView2<f64>, g: ArrayView2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(p.dim());
    for ((pr, gr), mut o) in p.outer_iter().zip(g.outer_iter()).zip(out.outer_iter_mut()) {
        let inner: f64 = pr.iter().zip(gr.iter()).map(|(a, b)| a * b).sum();
        for ((ok, &pk), &gk) in o.iter_mut().zip(pr.iter()).zip(gr.iter()) {
            *ok = pk * (gk - inner);
        }
    }
    out
}

/// `CE + λ₁[a⟨γ₁,C̃₁⟩ + (1−a)⟨γ₂,C̃₂⟩] + λ₂H(Ŷᵗ) + λ₃KL(γ₁‖γ₂)` and its
/// gradients with both plans held fixed.
pub fn total_loss(state: &BatchState, plans: &DualPlans, w: &LossWeights) -> Result<(LossBreakdown, LossGradients)> {
    let (ce, ce_grad) = cross_entropy(state.source_soft.view(), &state.source_labels)?;
    let ot1 = transport_cost(&plans.plan1, &state.cost1)?;
    let ot2 = transport_cost(&plans.plan2, &state.cost2)?;
    let a = w.alpha_plan;
    let ot = a * ot1 + (1.0 - a) * ot2;
    let entropy = target_entropy(state.target_soft.view());
    let kl = kl_entries(plans.plan1.entries(), plans.plan2.entries(), w.kl_variant)?;
    let total = ce + w.lambda1 * ot + w.lambda2 * entropy + w.lambda3 * kl;
    let breakdown = LossBreakdown {
        ce,
        ot_classifier: ot1,
        ot_knn: ot2,
        ot,
        entropy,
        kl,
        total,
    };
    for (name, v) in [("ce", ce), ("ot", ot), ("entropy", entropy), ("kl", kl)] {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("loss component {name} = {v}; breakdown {breakdown:?}")));
        }
    }

    let mut source_logits = ce_grad;
    let mut target_logits = Array2::zeros(state.target_logits.dim());
    let mut source_latent = Array2::zeros(state.source_latent.dim());
    let mut target_latent = Array2::zeros(state.target_latent.dim());
    let params = &state.cost_params;
    let scale = 2.0 * params.alpha;
    let w1 = w.lambda1 * a;
    let w2 = w.lambda1 * (1.0 - a);
    if w1 != 0.0 {
        let (gs, gt) = feature_gradients(
            state.source_latent.view(),
            state.target_latent.view(),
            plans.plan1.entries(),
            scale,
        );
        source_latent.scaled_add(w1, &gs);
        target_latent.scaled_add(w1, &gt);
        let (ls, lt) = label_gradients(
            state.source_soft.view(),
            state.target_soft.view(),
            plans.plan1.entries(),
            params,
        );
        source_logits.scaled_add(w1, &softmax_backward(state.source_soft.view(), ls.view()));
        target_logits.scaled_add(w1, &softmax_backward(state.target_soft.view(), lt.view()));
    }
    if w2 != 0.0 {
        let (gs, gt) = feature_gradients(
            state.source_latent.view(),
            state.target_latent.view(),
            plans.plan2.entries(),
            scale,
        );
        source_latent.scaled_add(w2, &gs);
        target_latent.scaled_add(w2, &gt);
    }
    if w.lambda2 != 0.0 {
        target_logits.scaled_add(w.lambda2, &entropy_grad_logits(state.target_soft.view()));
    }
    Ok((
        breakdown,
        LossGradients {
            source_latent,
            source_logits,
            target_latent,
            target_logits,
        },
    ))
}

/// Forward pass of both minibatches.
#[allow(clippy::too_many_arguments)]
pub(crate) fn forward_batch(
    model: &MlpEmbedding,
    clf: &LinearClassifier,
    xs: ArrayView2<f64>,
    ys: &[usize],
    xt: ArrayView2<f64>,
    pseudo: &[usize],
    num_classes: usize,
    params: GeodesicCostParams,
) -> Result<(BatchState, Tape, Tape)> {
    let (zs, tape_s) = model.forward(xs)?;
    let (zt, tape_t) = model.forward(xt)?;
    let ls = clf.logits(zs.view())?;
    let lt = clf.logits(zt.view())?;
    let state = BatchState::new(zs, ls, ys.to_vec(), zt, lt, pseudo.to_vec(), num_classes, params)?;
    Ok((state, tape_s, tape_t))
}

pub(crate) fn parameter_gradients(
    model: &MlpEmbedding,
    clf: &LinearClassifier,
    state: &BatchState,
    tapes: (&Tape, &Tape),
    grads: &LossGradients,
) -> Result<Gradients> {
    let mut g = Gradients::compute(
        model,
        clf,
        tapes.0,
        state.source_latent.view(),
        grads.source_logits.view(),
        grads.source_latent.view(),
    )?;
    let gt = Gradients::compute(
        model,
        clf,
        tapes.1,
        state.target_latent.view(),
        grads.target_logits.view(),
        grads.target_latent.view(),
    )?;
    g.accumulate(&gt);
    Ok(g)
}

/// Total loss and its gradient with respect to every network parameter,
/// for fixed plans and fixed k-NN labels.
#[allow(clippy::too_many_arguments)]
pub fn loss_and_gradients(
    model: &MlpEmbedding,
    clf: &LinearClassifier,
    source_x: ArrayView2<f64>,
    source_labels: &[usize],
    target_x: ArrayView2<f64>,
    target_pseudo_labels: &[usize],
    plans: &DualPlans,
    weights: &LossWeights,
    cost_params: GeodesicCostParams,
) -> Result<(LossBreakdown, Gradients)> {
    let (state, ts, tt) = forward_batch(
        model,
        clf,
        source_x,
        source_labels,
        target_x,
        target_pseudo_labels,
        clf.classes(),
        cost_params,
    )?;
    let (breakdown, lg) = total_loss(&state, plans, weights)?;
    let grads = parameter_gradients(model, clf, &state, (&ts, &tt), &lg)?;
    Ok((breakdown, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collab::{kl_plans, solve_collaborative};
    use crate::ot::DiscreteMeasure;
    use ndarray::array;

    fn toy_state() -> BatchState {
        BatchState::new(
            array![[0.1, 0.2], [0.5, -0.3], [1.0, 0.0], [0.0, 0.4]],
            array![[2.0, -1.0], [0.3, 0.1], [-0.5, 0.5], [1.0, 1.0]],
            vec![0, 0, 1, 1],
            array![[0.2, 0.1], [0.4, -0.2], [0.9, 0.3], [-0.1, 0.5]],
            array![[1.0, 0.0], [0.0, 0.2], [-1.0, 0.7], [0.4, 0.4]],
            vec![0, 1, 1, 0],
            2,
            GeodesicCostParams::default(),
        )
        .unwrap()
    }

    fn plans(state: &BatchState) -> DualPlans {
        let mu = DiscreteMeasure::uniform(4);
        solve_collaborative(&state.cost1, &state.cost2, &mu, &mu, &CollabConfig::default()).unwrap()
    }

    #[test]
    fn components_sum_to_total() {
        let s = toy_state();
        let p = plans(&s);
        let w = LossWeights::from_config(&CollabConfig::default());
        let (b, _) = total_loss(&s, &p, &w).unwrap();
        let (ce, _) = cross_entropy(s.source_soft.view(), &s.source_labels).unwrap();
        let ot1 = transport_cost(&p.plan1, &s.cost1).unwrap();
        let ot2 = transport_cost(&p.plan2, &s.cost2).unwrap();
        let h = target_entropy(s.target_soft.view());
        let kl = kl_plans(&p.plan1, &p.plan2).unwrap();
        let hand = ce + 1.0 * (0.5 * ot1 + 0.5 * ot2) + 0.1 * h + 0.1 * kl;
        assert!((b.total - hand).abs() < 1e-10);
        assert!((b.total - (b.ce + b.ot + 0.1 * b.entropy + 0.1 * b.kl)).abs() < 1e-12);
    }

    #[test]
    fn zero_weights_leave_cross_entropy() {
        let s = toy_state();
        let p = plans(&s);
        let w = LossWeights { lambda1: 0.0, lambda2: 0.0, lambda3: 0.0, alpha_plan: 0.5, kl_variant: KlVariant::CrossEntropy };
        let (b, g) = total_loss(&s, &p, &w).unwrap();
        let (ce, ce_grad) = cross_entropy(s.source_soft.view(), &s.source_labels).unwrap();
        assert_eq!(b.total, ce);
        assert_eq!(g.source_logits, ce_grad);
        assert!(g.target_logits.iter().chain(g.source_latent.iter()).all(|&v| v == 0.0));
    }

    #[test]
    fn softmax_backward_matches_finite_differences() {
        let logits = array![[0.3, -0.2, 1.1]];
        let g = array![[0.7, -1.3, 0.4]];
        let f = |l: &Array2<f64>| -> f64 { (softmax_rows(l.view()) * &g).sum() };
        let p = softmax_rows(logits.view());
        let an = softmax_backward(p.view(), g.view());
        for k in 0..3 {
            let (mut lp, mut lm) = (logits.clone(), logits.clone());
            lp[[0, k]] += 1e-6;
            lm[[0, k]] -= 1e-6;
            let fd = (f(&lp) - f(&lm)) / 2e-6;
            assert!((fd - an[[0, k]]).abs() < 1e-8);
        }
    }
}
