use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::MASS_TOLERANCE;
use crate::linalg::{col_sums, row_sums};
use crate::{Error, Result};

/// Probability weights on a finite support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    weights: Array1<f64>,
}

impl DiscreteMeasure {
    /// Validates non-negativity and unit mass (within [`MASS_TOLERANCE`]).
    pub fn new(weights: Array1<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidMeasure("empty support".into()));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(Error::InvalidMeasure(format!("weight {i} is {w}")));
        }
        let total = weights.sum();
        if total == 0.0 {
            return Err(Error::InvalidMeasure("zero total mass".into()));
        }
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidMeasure(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { weights })
    }

    /// Rescales arbitrary non-negative weights to unit mass.
    pub fn normalized(weights: Array1<f64>) -> Result<Self> {
        let total: f64 = weights.iter().filter(|w| w.is_finite()).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidMeasure("zero total mass".into()));
        }
        Self::new(weights / total)
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform measure needs a non-empty support");
        Self {
            weights: Array1::from_elem(n, 1.0 / n as f64),
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> ArrayView1<'_, f64> {
        self.weights.view()
    }
}

/// Dense non-negative pairwise cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    entries: Array2<f64>,
}

impl CostMatrix {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::InvalidCost("empty cost matrix".into()));
        }
        if let Some(((i, j), v)) = entries
            .indexed_iter()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidCost(format!("entry ({i},{j}) is {v}")));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> ArrayView2<'_, f64> {
        self.entries.view()
    }

    pub fn into_entries(self) -> Array2<f64> {
        self.entries
    }

    pub fn shape(&self) -> (usize, usize) {
        self.entries.dim()
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }

    /// Cost multiplied by a non-negative scalar.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(&self.entries * s)
    }

    pub(crate) fn check_against(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
        let (r, c) = self.shape();
        if r != mu.len() || c != nu.len() {
            return Err(Error::DimensionMismatch(format!(
                "cost is {r}x{c} but measures have {} and {} points",
                mu.len(),
                nu.len()
            )));
        }
        Ok(())
    }
}

/// A coupling between two discrete measures.
///
/// Feasibility is not enforced at construction; use [`marginal_violation`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportPlan {
    entries: Array2<f64>,
    source_marginal: DiscreteMeasure,
    target_marginal: DiscreteMeasure,
}

impl TransportPlan {
    pub fn new(
        entries: Array2<f64>,
        source_marginal: DiscreteMeasure,
        target_marginal: DiscreteMeasure,
    ) -> Result<Self> {
        if entries.dim() != (source_marginal.len(), target_marginal.len()) {
            return Err(Error::DimensionMismatch(format!(
                "plan is {:?} but marginals have {} and {} points",
                entries.dim(),
                source_marginal.len(),
                target_marginal.len()
            )));
        }
        Ok(Self {
            entries,
            source_marginal,
            target_marginal,
        })
    }

    /// The independent coupling `μ νᵀ`.
    pub fn outer(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Self {
        let entries = Array2::from_shape_fn((mu.len(), nu.len()), |(i, j)| {
            mu.weights()[i] * nu.weights()[j]
        });
        Self {
            entries,
            source_marginal: mu.clone(),
            target_marginal: nu.clone(),
        }
    }

    pub fn entries(&self) -> ArrayView2<'_, f64> {
        self.entries.view()
    }

    pub fn into_entries(self) -> Array2<f64> {
        self.entries
    }

    pub fn shape(&self) -> (usize, usize) {
        self.entries.dim()
    }

    pub fn source_marginal(&self) -> &DiscreteMeasure {
        &self.source_marginal
    }

    pub fn target_marginal(&self) -> &DiscreteMeasure {
        &self.target_marginal
    }

    pub fn total_mass(&self) -> f64 {
        self.entries.sum()
    }
}

/// `⟨C, γ⟩ = Σ γ_ij C_ij`.
pub fn transport_cost(plan: &TransportPlan, cost: &CostMatrix) -> Result<f64> {
    if plan.shape() != cost.shape() {
        return Err(Error::DimensionMismatch(format!(
            "plan is {:?}, cost is {:?}",
            plan.shape(),
            cost.shape()
        )));
    }
    Ok(plan
        .entries
        .iter()
        .zip(cost.entries.iter())
        .map(|(g, c)| g * c)
        .sum())
}

/// Largest absolute deviation of the plan's row and column sums from its marginals.
pub fn marginal_violation(plan: &TransportPlan) -> f64 {
    let rows = row_sums(plan.entries.view());
    let cols = col_sums(plan.entries.view());
    let r = rows
        .iter()
        .zip(plan.source_marginal.weights.iter())
        .map(|(a, b)| (a - b).abs());
    let c = cols
        .iter()
        .zip(plan.target_marginal.weights.iter())
        .map(|(a, b)| (a - b).abs());
    r.chain(c).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn measure_rejects_bad_weights() {
        assert!(DiscreteMeasure::new(array![0.5, 0.6]).is_err());
        assert!(DiscreteMeasure::new(array![1.5, -0.5]).is_err());
        assert!(DiscreteMeasure::new(array![0.0, 0.0]).is_err());
        assert!(DiscreteMeasure::normalized(array![0.0, 0.0]).is_err());
        assert!(DiscreteMeasure::new(array![0.25, 0.75]).is_ok());
        let m = DiscreteMeasure::normalized(array![1.0, 3.0]).unwrap();
        assert_eq!(m.weights(), array![0.25, 0.75].view());
    }

    #[test]
    fn cost_rejects_negative_and_nan() {
        assert!(CostMatrix::new(array![[0.0, -1.0]]).is_err());
        assert!(CostMatrix::new(array![[f64::NAN]]).is_err());
        assert!(CostMatrix::new(array![[f64::INFINITY]]).is_err());
    }

    #[test]
    fn transport_cost_examples() {
        let c = CostMatrix::new(array![[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let u = DiscreteMeasure::uniform(2);
        let diag = TransportPlan::new(array![[0.5, 0.0], [0.0, 0.5]], u.clone(), u.clone()).unwrap();
        let anti = TransportPlan::new(array![[0.0, 0.5], [0.5, 0.0]], u.clone(), u.clone()).unwrap();
        assert_eq!(transport_cost(&diag, &c).unwrap(), 0.0);
        assert_eq!(transport_cost(&anti, &c).unwrap(), 1.0);
        let c3 = c.scaled(3.0).unwrap();
        assert_eq!(transport_cost(&anti, &c3).unwrap(), 3.0);
        let wrong = CostMatrix::new(array![[1.0]]).unwrap();
        assert!(transport_cost(&diag, &wrong).is_err());
    }

    #[test]
    fn violation_of_outer_product_and_perturbation() {
        let mu = DiscreteMeasure::new(array![0.2, 0.3, 0.5]).unwrap();
        let nu = DiscreteMeasure::new(array![0.6, 0.4]).unwrap();
        let p = TransportPlan::outer(&mu, &nu);
        assert!(marginal_violation(&p) <= 1e-15);
        let mut e = p.clone().into_entries();
        e[[1, 0]] += 0.01;
        let q = TransportPlan::new(e, mu, nu).unwrap();
        assert!(marginal_violation(&q) >= 0.01 - 1e-12);
    }
}
