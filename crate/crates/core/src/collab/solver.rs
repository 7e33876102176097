use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::KlVariant;
use crate::linalg::frobenius_diff;
use crate::ot::{sinkhorn_log_kernel, CostMatrix, DiscreteMeasure, SinkhornParams, TransportPlan};
use crate::{Error, Result};

/// Hyperparameters of the collaborative objective and its solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollabConfig {
    /// Feature/label mixing weight inside each cost matrix.
    pub alpha_cost: f64,
    /// Label-distance exponent scale inside each cost matrix.
    pub beta: f64,
    /// Weight of the classifier-label plan against the k-NN plan.
    pub alpha_plan: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub sinkhorn_reg: f64,
    pub k_neighbors: usize,
    pub epochs: usize,
    pub seed: u64,
    pub kl_variant: KlVariant,
    pub max_outer_iter: usize,
    /// Stop when neither plan moves more than this in Frobenius norm.
    pub outer_tol: f64,
    pub inner_max_iter: usize,
    pub inner_tol: f64,
}

impl Default for CollabConfig {
    fn default() -> Self {
        Self {
            alpha_cost: 0.7,
            beta: 1.0,
            alpha_plan: 0.5,
            lambda1: 1.0,
            lambda2: 0.1,
            lambda3: 0.1,
            sinkhorn_reg: 0.1,
            k_neighbors: 5,
            epochs: 30,
            seed: 17,
            kl_variant: KlVariant::CrossEntropy,
            max_outer_iter: 20_000,
            outer_tol: 1e-6,
            inner_max_iter: 10_000,
            inner_tol: 1e-10,
        }
    }
}

impl CollabConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        for (name, v) in [("alpha_cost", self.alpha_cost), ("alpha_plan", self.alpha_plan)] {
            if !(0.0..=1.0).contains(&v) {
                p.push(format!("{name} must lie in [0,1], got {v}"));
            }
        }
        for (name, v) in [("lambda1", self.lambda1), ("lambda2", self.lambda2), ("lambda3", self.lambda3)] {
            if !(v >= 0.0) || !v.is_finite() {
                p.push(format!("{name} must be non-negative, got {v}"));
            }
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            p.push(format!("beta must be positive, got {}", self.beta));
        }
        if !(self.sinkhorn_reg > 0.0) || !self.sinkhorn_reg.is_finite() {
            p.push(format!("sinkhorn_reg must be positive, got {}", self.sinkhorn_reg));
        }
        if self.k_neighbors == 0 {
            p.push("k_neighbors must be at least 1".into());
        }
        if self.max_outer_iter == 0 || self.inner_max_iter == 0 {
            p.push("iteration caps must be positive".into());
        }
        if !(self.outer_tol > 0.0) || !(self.inner_tol > 0.0) {
            p.push("solver tolerances must be positive".into());
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(p))
        }
    }

    pub fn cost_params(&self) -> crate::cost::GeodesicCostParams {
        crate::cost::GeodesicCostParams {
            alpha: self.alpha_cost,
            beta: self.beta,
            ..Default::default()
        }
    }
}

/// The classifier-label plan and the k-NN-label plan.
#[derive(Debug, Clone)]
pub struct DualPlans {
    pub plan1: TransportPlan,
    pub plan2: TransportPlan,
    pub outer_iterations: usize,
    /// Frobenius change of the last outer sweep.
    pub residual: f64,
    /// Largest marginal deviation of either plan.
    pub violation: f64,
    pub converged: bool,
}

impl DualPlans {
    /// `‖γ₁ − γ₂‖_F`.
    pub fn disagreement(&self) -> f64 {
        frobenius_diff(self.plan1.entries(), self.plan2.entries())
    }
}

/// Block-coordinate minimization over couplings `γ₁, γ₂` of
///
/// `a(⟨γ₁,C₁⟩ + ε·Σγ₁logγ₁) + (1−a)(⟨γ₂,C₂⟩ + ε·Σγ₂logγ₂) + λ·Σγ₁log(γ₁/γ₂)`
///
/// with `a = alpha_plan`, `ε = sinkhorn_reg`, `λ = lambda3`. The γ₁-step is an
/// entropic OT with log-kernel `(−aC₁ + λ log γ₂)/(aε + λ)`; the γ₂-step runs
/// entropic mirror descent projected by Sinkhorn. With `λ = 0` the result is
/// exactly two independent Sinkhorn solves.
pub fn solve_collaborative(
    cost1: &CostMatrix,
    cost2: &CostMatrix,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cfg: &CollabConfig,
) -> Result<DualPlans> {
    cfg.validate()?;
    cost1.check_against(mu, nu)?;
    cost2.check_against(mu, nu)?;
    let eps = cfg.sinkhorn_reg;
    let a = cfg.alpha_plan;
    let lambda = cfg.lambda3;
    let sk = SinkhornParams::new(eps, cfg.inner_max_iter, cfg.inner_tol);
    let s1 = sk.solve_unchecked(cost1, mu, nu)?;
    let s2 = sk.solve_unchecked(cost2, mu, nu)?;
    if lambda == 0.0 {
        let violation = s1.violation.max(s2.violation);
        let converged = s1.converged && s2.converged;
        return Ok(DualPlans {
            plan1: s1.plan,
            plan2: s2.plan,
            outer_iterations: 0,
            residual: 0.0,
            violation,
            converged,
        });
    }

    let (muw, nuw) = (mu.weights(), nu.weights());
    let c1 = cost1.entries();
    let c2 = cost2.entries();
    let mut g1 = s1.plan.into_entries();
    let mut g2 = s2.plan.into_entries();
    let mut log_g2 = g2.mapv(|x| x.max(f64::MIN_POSITIVE).ln());
    let mut warm1: Option<(Array1<f64>, Array1<f64>)> = None;
    let mut md = MirrorState::default();
    let e2 = (1.0 - a) * eps;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut inner_ok = true;

    for it in 1..=cfg.max_outer_iter {
        iterations = it;
        let denom = a * eps + lambda;
        let lk = Array2::from_shape_fn(c1.dim(), |(i, j)| (-a * c1[[i, j]] + lambda * log_g2[[i, j]]) / denom);
        let sol = sinkhorn_log_kernel(
            lk.view(),
            muw,
            nuw,
            cfg.inner_max_iter,
            cfg.inner_tol,
            warm1.as_ref().map(|(u, v)| (u.view(), v.view())),
        );
        inner_ok &= sol.converged;
        let new_g1 = sol.plan;
        warm1 = Some((sol.log_u, sol.log_v));

        let (new_g2, new_log_g2) = if e2 == 0.0 {
            let lg = new_g1.mapv(|x| x.max(f64::MIN_POSITIVE).ln());
            (new_g1.clone(), lg)
        } else {
            let step = CoupledStep {
                lin: c2.mapv(|x| (1.0 - a) * x),
                e: e2,
                coupling: new_g1.mapv(|x| lambda * x),
            };
            let (lg, ok) = step.solve(&mut md, log_g2.view(), muw, nuw, cfg);
            inner_ok &= ok;
            (lg.mapv(f64::exp), lg)
        };

        residual = frobenius_diff(new_g1.view(), g1.view()).max(frobenius_diff(new_g2.view(), g2.view()));
        g1 = new_g1;
        g2 = new_g2;
        log_g2 = new_log_g2;
        if residual <= cfg.outer_tol {
            break;
        }
    }
    let plan1 = TransportPlan::new(g1, mu.clone(), nu.clone())?;
    let plan2 = TransportPlan::new(g2, mu.clone(), nu.clone())?;
    let violation = crate::ot::marginal_violation(&plan1).max(crate::ot::marginal_violation(&plan2));
    let converged = residual <= cfg.outer_tol && inner_ok;
    if !converged {
        log::warn!(
            "collaborative solve stopped after {iterations} sweeps: plan change {residual:e}, marginal violation {violation:e}"
        );
    }
    Ok(DualPlans {
        plan1,
        plan2,
        outer_iterations: iterations,
        residual,
        violation,
        converged,
    })
}

/// The γ₂ subproblem `min ⟨C,γ⟩ + e·Σγ log γ − ΣB log γ` over couplings.
struct CoupledStep {
    lin: Array2<f64>,
    e: f64,
    coupling: Array2<f64>,
}

/// Mirror-descent step size and projection scalings carried across calls.
#[derive(Default)]
struct MirrorState {
    step: Option<f64>,
    warm: Option<(Array1<f64>, Array1<f64>)>,
}

/// Mirror steps per outer sweep; the outer loop supplies the remaining iterations.
const MIRROR_STEPS_PER_SWEEP: usize = 1;

impl CoupledStep {
    fn objective(&self, log_g: ArrayView2<f64>) -> f64 {
        let mut acc = 0.0;
        for ((&lg, &c), &b) in log_g.iter().zip(self.lin.iter()).zip(self.coupling.iter()) {
            let g = lg.exp();
            acc += c * g + self.e * g * lg - b * lg;
        }
        acc
    }

    /// Entropic mirror descent: `γ⁺ ∝ γ·exp(−t∇G(γ))` projected onto the
    /// couplings by Sinkhorn, with the step size backtracked until the
    /// relative-smoothness bound holds. Returns `log γ` and whether the
    /// projections converged.
    fn solve(
        &self,
        state: &mut MirrorState,
        start: ArrayView2<f64>,
        mu: ArrayView1<f64>,
        nu: ArrayView1<f64>,
        cfg: &CollabConfig,
    ) -> (Array2<f64>, bool) {
        let t_max = 1.0 / self.e;
        let mut t = state.step.unwrap_or(t_max).min(t_max);
        let mut log_g = start.to_owned();
        let mut value = self.objective(log_g.view());
        let mut projections_ok = true;
        for _ in 0..MIRROR_STEPS_PER_SWEEP {
            let grad = Array2::from_shape_fn(log_g.dim(), |(i, j)| {
                let lg = log_g[[i, j]];
                self.lin[[i, j]] + self.e * lg - self.coupling[[i, j]] * (-lg).exp()
            });
            let (next, next_value, sol_ok, warm) = loop {
                let kernel = &log_g - &(&grad * t);
                let sol = sinkhorn_log_kernel(
                    kernel.view(),
                    mu,
                    nu,
                    cfg.inner_max_iter,
                    cfg.inner_tol,
                    state.warm.as_ref().map(|(u, v)| (u.view(), v.view())),
                );
                let next = Array2::from_shape_fn(kernel.dim(), |(i, j)| sol.log_u[i] + kernel[[i, j]] + sol.log_v[j]);
                let next_value = self.objective(next.view());
                let mut linear = 0.0;
                let mut div = 0.0;
                for ((&n, &o), &g) in next.iter().zip(log_g.iter()).zip(grad.iter()) {
                    let (pn, po) = (n.exp(), o.exp());
                    linear += g * (pn - po);
                    div += pn * (n - o) - pn + po;
                }
                let bound = value + linear + div / t;
                if next_value <= bound + 1e-14 * value.abs().max(1.0) || t < 1e-12 * t_max {
                    break (next, next_value, sol.converged, (sol.log_u, sol.log_v));
                }
                t *= 0.5;
            };
            projections_ok &= sol_ok;
            state.warm = Some(warm);
            let change = frobenius_diff(next.mapv(f64::exp).view(), log_g.mapv(f64::exp).view());
            log_g = next;
            value = next_value;
            state.step = Some(t);
            t = (2.0 * t).min(t_max);
            if change <= 0.1 * cfg.outer_tol {
                return (log_g, projections_ok);
            }
        }
        (log_g, projections_ok)
    }
}
