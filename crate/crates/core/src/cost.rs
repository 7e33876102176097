//! Pairwise transport costs between labeled feature sets.
//!
//! All costs start from the squared Euclidean distance between latent
//! features. The label-aware variants differ in how they treat pairs whose
//! labels disagree:
//!
//! | builder | same label | different label |
//! |---|---|---|
//! | [`hard_class_cost`] | `‖Δx‖²` | sentinel `M` |
//! | [`penalized_cost`] | `‖Δx‖²` | `‖Δx‖² + m` |
//! | [`geodesic_cost`] | `α‖Δx‖² + (1−α)` | `α‖Δx‖² + (1−α)·exp(β‖Δỹ‖²)` |
//!
//! The geodesic cost is continuous in the label vectors `ỹ`, which are soft
//! classifier probabilities when present and one-hot hard labels otherwise.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::linalg::{one_hot, pairwise_sq_dist};
use crate::ot::{CostMatrix, TransportPlan};
use crate::{Error, Result};

/// Exponents `β‖Δỹ‖²` above this are clamped before `exp`.
pub const MAX_EXPONENT: f64 = 700.0;

/// Minimum ratio between the "infinite" sentinel and the largest finite cost.
pub const SENTINEL_RATIO: f64 = 1e6;

/// Latent features with optional hard and/or soft labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFeatureSet {
    features: Array2<f64>,
    hard_labels: Option<Vec<usize>>,
    soft_labels: Option<Array2<f64>>,
    num_classes: usize,
}

impl LabeledFeatureSet {
    pub fn new(features: Array2<f64>) -> Result<Self> {
        if let Some(((i, j), v)) = features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite(format!("feature ({i},{j}) is {v}")));
        }
        Ok(Self {
            features,
            hard_labels: None,
            soft_labels: None,
            num_classes: 0,
        })
    }

    pub fn with_hard_labels(mut self, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} labels for {} points",
                labels.len(),
                self.len()
            )));
        }
        if self.soft_labels.is_some() && num_classes != self.num_classes {
            return Err(Error::DimensionMismatch(format!(
                "hard labels declare {num_classes} classes, soft labels have {}",
                self.num_classes
            )));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::LabelOutOfRange {
                label,
                classes: num_classes,
            });
        }
        self.hard_labels = Some(labels);
        self.num_classes = num_classes;
        Ok(self)
    }

    pub fn with_soft_labels(mut self, soft: Array2<f64>) -> Result<Self> {
        if soft.nrows() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} soft label rows for {} points",
                soft.nrows(),
                self.len()
            )));
        }
        if self.hard_labels.is_some() && soft.ncols() != self.num_classes {
            return Err(Error::DimensionMismatch(format!(
                "soft labels have {} classes, hard labels declare {}",
                soft.ncols(),
                self.num_classes
            )));
        }
        for (i, row) in soft.outer_iter().enumerate() {
            if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::InvalidParameter(format!(
                    "soft label row {i} has entries outside [0,1]"
                )));
            }
            if (row.sum() - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "soft label row {i} sums to {}",
                    row.sum()
                )));
            }
        }
        self.num_classes = soft.ncols();
        self.soft_labels = Some(soft);
        Ok(self)
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn hard_labels(&self) -> Option<&[usize]> {
        self.hard_labels.as_deref()
    }

    pub fn soft_labels(&self) -> Option<ArrayView2<'_, f64>> {
        self.soft_labels.as_ref().map(|s| s.view())
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Label vectors `ỹ` for the geodesic term: soft labels when present,
    /// one-hot hard labels otherwise.
    pub fn label_vectors(&self) -> Result<Array2<f64>> {
        if let Some(s) = &self.soft_labels {
            return Ok(s.clone());
        }
        match &self.hard_labels {
            Some(h) => Ok(one_hot(h, self.num_classes)),
            None => Err(Error::MissingLabels(
                "set carries neither soft nor hard labels".into(),
            )),
        }
    }

    fn require_hard(&self, side: &str) -> Result<&[usize]> {
        self.hard_labels
            .as_deref()
            .ok_or_else(|| Error::MissingLabels(format!("{side} set has no hard labels")))
    }

    /// Rows selected by `indices`, labels carried along.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let features = self.features.select(ndarray::Axis(0), indices);
        Self {
            features,
            hard_labels: self
                .hard_labels
                .as_ref()
                .map(|h| indices.iter().map(|&i| h[i]).collect()),
            soft_labels: self
                .soft_labels
                .as_ref()
                .map(|s| s.select(ndarray::Axis(0), indices)),
            num_classes: self.num_classes,
        }
    }
}

/// Hyperparameters of the label-aware costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodesicCostParams {
    /// Weight on the feature term, in `[0, 1]`.
    pub alpha: f64,
    /// Scale of the label-distance exponent, `> 0`.
    pub beta: f64,
    /// Additive inter-class penalty of [`penalized_cost`], `≥ 0`.
    pub penalty_m: f64,
    /// Floor for the "infinite" inter-class cost of [`hard_class_cost`].
    /// The value actually used is raised to at least `10⁶ ×` the largest
    /// finite entry of the instance.
    pub large_m: f64,
}

impl Default for GeodesicCostParams {
    fn default() -> Self {
        Self {
            alpha: 0.7,
            beta: 1.0,
            penalty_m: 1.0,
            large_m: 1e6,
        }
    }
}

impl GeodesicCostParams {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(0.0..=1.0).contains(&self.alpha) {
            problems.push(format!("alpha must lie in [0,1], got {}", self.alpha));
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            problems.push(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.penalty_m >= 0.0) || !self.penalty_m.is_finite() {
            problems.push(format!("penalty_m must be non-negative, got {}", self.penalty_m));
        }
        if !(self.large_m > 0.0) || !self.large_m.is_finite() {
            problems.push(format!("large_m must be positive, got {}", self.large_m));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(problems.join("; ")))
        }
    }

    /// Sentinel used for an instance whose largest finite cost is `max_finite`.
    pub fn sentinel_for(&self, max_finite: f64) -> f64 {
        self.large_m.max(SENTINEL_RATIO * max_finite)
    }
}

fn check_dims(source: &LabeledFeatureSet, target: &LabeledFeatureSet) -> Result<()> {
    if source.dim() != target.dim() {
        return Err(Error::DimensionMismatch(format!(
            "source features have dimension {}, target {}",
            source.dim(),
            target.dim()
        )));
    }
    Ok(())
}

/// `C_ij = ‖x_i^s − x_j^t‖²`.
pub fn squared_euclidean_cost(
    source: &LabeledFeatureSet,
    target: &LabeledFeatureSet,
) -> Result<CostMatrix> {
    check_dims(source, target)?;
    CostMatrix::new(pairwise_sq_dist(source.features(), target.features()))
}

/// Squared Euclidean within a class, the sentinel across classes.
pub fn hard_class_cost(
    source: &LabeledFeatureSet,
    target: &LabeledFeatureSet,
    params: &GeodesicCostParams,
) -> Result<CostMatrix> {
    params.validate()?;
    check_dims(source, target)?;
    let ys = source.require_hard("source")?;
    let yt = target.require_hard("target")?;
    let sq = pairwise_sq_dist(source.features(), target.features());
    let max_finite = sq.iter().copied().fold(0.0, f64::max);
    let sentinel = params.sentinel_for(max_finite);
    let c = Array2::from_shape_fn(sq.dim(), |(i, j)| {
        if ys[i] == yt[j] {
            sq[[i, j]]
        } else {
            sentinel
        }
    });
    CostMatrix::new(c)
}

/// `C_ij = ‖Δx‖² + m·[y_i^s ≠ y_j^t]`.
pub fn penalized_cost(
    source: &LabeledFeatureSet,
    target: &LabeledFeatureSet,
    params: &GeodesicCostParams,
) -> Result<CostMatrix> {
    params.validate()?;
    check_dims(source, target)?;
    let ys = source.require_hard("source")?;
    let yt = target.require_hard("target")?;
    let mut c = pairwise_sq_dist(source.features(), target.features());
    for ((i, j), v) in c.indexed_iter_mut() {
        if ys[i] != yt[j] {
            *v += params.penalty_m;
        }
    }
    CostMatrix::new(c)
}

/// Geodesic cost together with the number of entries whose exponent was clamped.
#[derive(Debug, Clone)]
pub struct GeodesicCost {
    pub cost: CostMatrix,
    pub clamped_entries: usize,
}

/// `C_ij = α‖x_i^s − x_j^t‖² + (1−α)·exp(β‖ỹ_i^s − ỹ_j^t‖²)`.
///
/// Exponents above [`MAX_EXPONENT`] are clamped; use
/// [`geodesic_cost_with_diagnostics`] to see how many.
pub fn geodesic_cost(
    source: &LabeledFeatureSet,
    target: &LabeledFeatureSet,
    params: &GeodesicCostParams,
) -> Result<CostMatrix> {
    geodesic_cost_with_diagnostics(source, target, params).map(|g| g.cost)
}

pub fn geodesic_cost_with_diagnostics(
    source: &LabeledFeatureSet,
    target: &LabeledFeatureSet,
    params: &GeodesicCostParams,
) -> Result<GeodesicCost> {
    params.validate()?;
    check_dims(source, target)?;
    let ls = source.label_vectors()?;
    let lt = target.label_vectors()?;
    if ls.ncols() != lt.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "source labels have {} classes, target {}",
            ls.ncols(),
            lt.ncols()
        )));
    }
    let (c, clamped) = geodesic_entries(source.features(), target.features(), ls.view(), lt.view(), params);
    Ok(GeodesicCost {
        cost: CostMatrix::new(c)?,
        clamped_entries: clamped,
    })
}

/// Raw geodesic cost entries and the number of clamped exponents.
pub(crate) fn geodesic_entries(
    xs: ArrayView2<f64>,
    xt: ArrayView2<f64>,
    ls: ArrayView2<f64>,
    lt: ArrayView2<f64>,
    params: &GeodesicCostParams,
) -> (Array2<f64>, usize) {
    let sq = pairwise_sq_dist(xs, xt);
    let label_sq = pairwise_sq_dist(ls, lt);
    let mut clamped = 0;
    let alpha = params.alpha;
    let c = Array2::from_shape_fn(sq.dim(), |(i, j)| {
        let mut e = params.beta * label_sq[[i, j]];
        if e > MAX_EXPONENT {
            e = MAX_EXPONENT;
            clamped += 1;
        }
        alpha * sq[[i, j]] + (1.0 - alpha) * e.exp()
    });
    if clamped > 0 {
        log::warn!("geodesic cost: clamped {clamped} label exponents at {MAX_EXPONENT}");
    }
    (c, clamped)
}

fn check_plan(plan: &TransportPlan, source: &LabeledFeatureSet, target: &LabeledFeatureSet) -> Result<()> {
    if plan.shape() != (source.len(), target.len()) {
        return Err(Error::DimensionMismatch(format!(
            "plan is {:?}, sets have {} and {} points",
            plan.shape(),
            source.len(),
            target.len()
        )));
    }
    Ok(())
}

/// Gradients of `⟨γ, C⟩` with respect to source and target features for the
/// geodesic cost, plan held fixed. With `α = 1` this is the gradient for the
/// squared Euclidean cost.
pub fn cost_gradient_wrt_features(
    source: &LabeledFeatureSet,
    target: &LabeledFeatureSet,
    params: &GeodesicCostParams,
    plan: &TransportPlan,
) -> Result<(Array2<f64>, Array2<f64>)> {
    check_dims(source, target)?;
    check_plan(plan, source, target)?;
    Ok(feature_gradients(
        source.features(),
        target.features(),
        plan.entries(),
        2.0 * params.alpha,
    ))
}

/// `∂/∂x_i^s Σ γ_ij·w‖x_i^s − x_j^t‖²` (with `w = scale/2`) and its target counterpart.
pub(crate) fn feature_gradients(
    xs: ArrayView2<f64>,
    xt: ArrayView2<f64>,
    plan: ArrayView2<f64>,
    scale: f64,
) -> (Array2<f64>, Array2<f64>) {
    let d = xs.ncols();
    let mut gs = Array2::<f64>::zeros((xs.nrows(), d));
    let mut gt = Array2::<f64>::zeros((xt.nrows(), d));
    for (i, xi) in xs.outer_iter().enumerate() {
        for (j, xj) in xt.outer_iter().enumerate() {
            let w = plan[[i, j]] * scale;
            if w == 0.0 {
                continue;
            }
            for k in 0..d {
                let g = w * (xi[k] - xj[k]);
                gs[[i, k]] += g;
                gt[[j, k]] -= g;
            }
        }
    }
    (gs, gt)
}

/// Gradients of `⟨γ, C⟩` with respect to the soft label vectors of both
/// sets, plan held fixed. Clamped entries contribute zero.
pub fn cost_gradient_wrt_soft_labels(
    source: &LabeledFeatureSet,
    target: &LabeledFeatureSet,
    params: &GeodesicCostParams,
    plan: &TransportPlan,
) -> Result<(Array2<f64>, Array2<f64>)> {
    check_plan(plan, source, target)?;
    let ys = source
        .soft_labels()
        .ok_or_else(|| Error::MissingLabels("source set has no soft labels".into()))?;
    let yt = target
        .soft_labels()
        .ok_or_else(|| Error::MissingLabels("target set has no soft labels".into()))?;
    if ys.ncols() != yt.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "source labels have {} classes, target {}",
            ys.ncols(),
            yt.ncols()
        )));
    }
    Ok(label_gradients(ys, yt, plan.entries(), params))
}

pub(crate) fn label_gradients(
    ys: ArrayView2<f64>,
    yt: ArrayView2<f64>,
    plan: ArrayView2<f64>,
    params: &GeodesicCostParams,
) -> (Array2<f64>, Array2<f64>) {
    let k = ys.ncols();
    let mut gs = Array2::<f64>::zeros(ys.dim());
    let mut gt = Array2::<f64>::zeros(yt.dim());
    let outer = 1.0 - params.alpha;
    if outer == 0.0 {
        return (gs, gt);
    }
    for (i, yi) in ys.outer_iter().enumerate() {
        for (j, yj) in yt.outer_iter().enumerate() {
            let g = plan[[i, j]];
            if g == 0.0 {
                continue;
            }
            let dist: f64 = yi.iter().zip(yj.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            let e = params.beta * dist;
            if e > MAX_EXPONENT {
                continue;
            }
            let w = g * outer * params.beta * e.exp() * 2.0;
            for c in 0..k {
                let v = w * (yi[c] - yj[c]);
                gs[[i, c]] += v;
                gt[[j, c]] -= v;
            }
        }
    }
    (gs, gt)
}
