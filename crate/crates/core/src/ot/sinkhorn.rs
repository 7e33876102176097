use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use super::support::Support;
use super::{CostMatrix, DiscreteMeasure, TransportPlan};
use crate::linalg::log_sum_exp;
use crate::{Error, Result};

/// Which scaling representation to iterate in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScalingDomain {
    /// Log-domain when `max(C) > 200·reg`, plain scaling otherwise.
    #[default]
    Auto,
    Plain,
    Log,
}

#[derive(Debug, Clone, Copy)]
pub struct SinkhornParams {
    pub reg: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub domain: ScalingDomain,
}

impl SinkhornParams {
    pub fn new(reg: f64, max_iter: usize, tol: f64) -> Self {
        Self {
            reg,
            max_iter,
            tol,
            domain: ScalingDomain::Auto,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.reg > 0.0) || !self.reg.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sinkhorn reg must be positive, got {}",
                self.reg
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sinkhorn tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be at least 1".into()));
        }
        Ok(())
    }

    /// Solves and errors with [`Error::NotConverged`] when `max_iter` is hit.
    pub fn solve(
        &self,
        cost: &CostMatrix,
        mu: &DiscreteMeasure,
        nu: &DiscreteMeasure,
    ) -> Result<SinkhornSolution> {
        let sol = self.solve_unchecked(cost, mu, nu)?;
        if !sol.converged {
            return Err(Error::NotConverged {
                iterations: sol.iterations,
                violation: sol.violation,
            });
        }
        Ok(sol)
    }

    /// Like [`SinkhornParams::solve`] but returns the last iterate with
    /// `converged == false` instead of an error.
    pub fn solve_unchecked(
        &self,
        cost: &CostMatrix,
        mu: &DiscreteMeasure,
        nu: &DiscreteMeasure,
    ) -> Result<SinkhornSolution> {
        self.validate()?;
        cost.check_against(mu, nu)?;
        let support = Support::of(mu.weights(), nu.weights());
        let (c, a, b) = (
            support.compact_matrix(cost.entries()),
            support.compact_rows(mu.weights()),
            support.compact_cols(nu.weights()),
        );
        let max_c = c.iter().copied().fold(0.0, f64::max);
        let use_log = match self.domain {
            ScalingDomain::Log => true,
            ScalingDomain::Plain => false,
            ScalingDomain::Auto => max_c > 50.0 * self.reg,
        };

        let mut underflow = false;
        let mut result = None;
        if !use_log {
            match plain_scaling(c.view(), a.view(), b.view(), self) {
                PlainOutcome::Done(r) => result = Some(r),
                PlainOutcome::Underflow => {
                    log::warn!(
                        "sinkhorn scaling underflow at reg={}; switching to log-domain updates",
                        self.reg
                    );
                    underflow = true;
                }
            }
        }
        let (reduced, iterations, violation, converged) = match result {
            Some(r) => r,
            None => {
                let s = annealed_log_solve(c.view(), a.view(), b.view(), max_c, self);
                (s.plan, s.iterations, s.violation, s.converged)
            }
        };

        let entries = support.expand(&reduced);
        Ok(SinkhornSolution {
            plan: TransportPlan::new(entries, mu.clone(), nu.clone())?,
            iterations,
            violation,
            converged,
            log_domain: use_log || underflow,
            underflow_detected: underflow,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SinkhornSolution {
    pub plan: TransportPlan,
    pub iterations: usize,
    /// Max row/column marginal deviation of the returned plan.
    pub violation: f64,
    pub converged: bool,
    pub log_domain: bool,
    /// Plain scaling hit a zero or non-finite scaling factor and was redone in log-domain.
    pub underflow_detected: bool,
}

/// Entropic OT `min ⟨C,γ⟩ − reg·H(γ)` with automatic domain selection.
pub fn solve_sinkhorn(
    cost: &CostMatrix,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    reg: f64,
    max_iter: usize,
    tol: f64,
) -> Result<SinkhornSolution> {
    SinkhornParams::new(reg, max_iter, tol).solve(cost, mu, nu)
}

enum PlainOutcome {
    Done((Array2<f64>, usize, f64, bool)),
    Underflow,
}

fn plain_scaling(
    c: ArrayView2<f64>,
    mu: ArrayView1<f64>,
    nu: ArrayView1<f64>,
    p: &SinkhornParams,
) -> PlainOutcome {
    let kernel = c.mapv(|x| (-x / p.reg).exp());
    let (n, m) = kernel.dim();
    let mut u = Array1::<f64>::ones(n);
    let mut v = Array1::<f64>::ones(m);
    let bad = |x: f64| x == 0.0 || !x.is_finite();
    let mut iterations = 0;
    let mut converged = false;
    for it in 1..=p.max_iter {
        iterations = it;
        let kv: Array1<f64> = kernel.rows().into_iter().map(|r| crate::linalg::dot(r, v.view())).collect();
        if kv.iter().any(|&x| bad(x)) {
            return PlainOutcome::Underflow;
        }
        if it > 1 {
            let violation = u
                .iter()
                .zip(kv.iter())
                .zip(mu.iter())
                .map(|((ui, kvi), mi)| (ui * kvi - mi).abs())
                .fold(0.0, f64::max);
            if violation <= p.tol {
                converged = true;
                iterations = it - 1;
                break;
            }
        }
        u = &mu / &kv;
        let mut ktu = Array1::<f64>::zeros(m);
        for (i, row) in kernel.outer_iter().enumerate() {
            let ui = u[i];
            for (acc, &k) in ktu.iter_mut().zip(row.iter()) {
                *acc += ui * k;
            }
        }
        if ktu.iter().any(|&x| bad(x)) || u.iter().any(|&x| bad(x)) {
            return PlainOutcome::Underflow;
        }
        v = &nu / &ktu;
        if v.iter().any(|&x| bad(x)) {
            return PlainOutcome::Underflow;
        }
    }
    let plan = Array2::from_shape_fn((n, m), |(i, j)| u[i] * kernel[[i, j]] * v[j]);
    let violation = plan_violation(plan.view(), mu, nu);
    if !converged {
        converged = violation <= p.tol;
    }
    PlainOutcome::Done((plan, iterations, violation, converged))
}

/// Geometric ratio between successive regularization stages.
const ANNEAL_RATIO: f64 = 0.25;

/// Log-domain solve with the regularization annealed from the cost range
/// down to `p.reg`; each stage warm-starts the next through the dual
/// potentials `reg·log_u`, `reg·log_v`. Intermediate stages stop at a loose
/// tolerance; the iteration count covers all stages.
fn annealed_log_solve(
    c: ArrayView2<f64>,
    a: ArrayView1<f64>,
    b: ArrayView1<f64>,
    max_c: f64,
    p: &SinkhornParams,
) -> LogKernelSolution {
    let mut stages = vec![p.reg];
    while stages.last().is_some_and(|&r| r < max_c) {
        let next = stages.last().copied().unwrap_or(p.reg) / ANNEAL_RATIO;
        stages.push(next);
    }
    stages.reverse();
    let mut used = 0;
    let mut warm: Option<(Array1<f64>, Array1<f64>, f64)> = None;
    let last = stages.len() - 1;
    for (k, &reg) in stages.iter().enumerate() {
        let log_k = c.mapv(|x| -x / reg);
        let start = warm
            .as_ref()
            .map(|(u, v, r)| (u.mapv(|x| x * r / reg), v.mapv(|x| x * r / reg)));
        // Intermediate stages get at most half the remaining budget so the
        // total never exceeds max_iter.
        let remaining = p.max_iter.saturating_sub(used);
        let (budget, tol) = if k == last {
            (remaining.max(1), p.tol)
        } else {
            (remaining / 2, p.tol.max(1e-4))
        };
        if budget == 0 {
            continue;
        }
        let mut s = sinkhorn_log_kernel(
            log_k.view(),
            a,
            b,
            budget,
            tol,
            start.as_ref().map(|(u, v)| (u.view(), v.view())),
        );
        used += s.iterations;
        if k == last {
            s.iterations = used;
            return s;
        }
        warm = Some((s.log_u, s.log_v, reg));
    }
    unreachable!("stage list always ends with the target regularization")
}

/// Output of [`sinkhorn_log_kernel`].
#[derive(Debug, Clone)]
pub struct LogKernelSolution {
    pub plan: Array2<f64>,
    /// Log row scalings `a` with `plan = exp(a_i + L_ij + b_j)`.
    pub log_u: Array1<f64>,
    pub log_v: Array1<f64>,
    pub iterations: usize,
    pub violation: f64,
    pub converged: bool,
}

/// Log-domain Sinkhorn projection of the kernel `exp(L)` onto the couplings
/// of `mu` and `nu`: finds `a, b` with `exp(a_i + L_ij + b_j)` having the
/// prescribed marginals. `L = −C/reg` gives entropic OT; other log-kernels
/// give KL projections of arbitrary positive matrices.
///
/// Iterates until the row-marginal deviation (columns are exact after each
/// half-step) is at most `tol`, or `max_iter` is reached.
pub fn sinkhorn_log_kernel(
    log_kernel: ArrayView2<f64>,
    mu: ArrayView1<f64>,
    nu: ArrayView1<f64>,
    max_iter: usize,
    tol: f64,
    warm_start: Option<(ArrayView1<f64>, ArrayView1<f64>)>,
) -> LogKernelSolution {
    plain_projection(log_kernel, mu, nu, max_iter, tol, warm_start)
        .unwrap_or_else(|| log_domain_projection(log_kernel, mu, nu, max_iter, tol, warm_start))
}

/// Scaling-form projection on `exp(L + a + b − M)`, `M` the largest exponent,
/// with the warm start folded into the kernel. `None` when the kernel or a
/// scaling leaves the representable range.
fn plain_projection(
    log_kernel: ArrayView2<f64>,
    mu: ArrayView1<f64>,
    nu: ArrayView1<f64>,
    max_iter: usize,
    tol: f64,
    warm_start: Option<(ArrayView1<f64>, ArrayView1<f64>)>,
) -> Option<LogKernelSolution> {
    let (n, m) = log_kernel.dim();
    let (a0, b0) = match warm_start {
        Some((a, b)) => (a.to_owned(), b.to_owned()),
        None => (Array1::zeros(n), Array1::zeros(m)),
    };
    let shifted = Array2::from_shape_fn((n, m), |(i, j)| log_kernel[[i, j]] + a0[i] + b0[j]);
    let top = shifted.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return None;
    }
    let kernel = shifted.mapv(|x| (x - top).exp());
    if kernel.iter().any(|&k| k < 1e-290) {
        return None;
    }
    let bad = |x: f64| x == 0.0 || !x.is_finite();
    let mut u = Array1::<f64>::ones(n);
    let mut v = Array1::<f64>::ones(m);
    let mut kv = Array1::<f64>::zeros(n);
    let mut ktu = Array1::<f64>::zeros(m);
    let mut iterations = 0;
    let mut converged = false;
    for it in 1..=max_iter.max(1) {
        iterations = it;
        for (i, row) in kernel.outer_iter().enumerate() {
            kv[i] = crate::linalg::dot(row, v.view());
        }
        if kv.iter().any(|&x| bad(x)) {
            return None;
        }
        if it > 1 {
            let violation = (0..n).map(|i| (u[i] * kv[i] - mu[i]).abs()).fold(0.0, f64::max);
            if violation <= tol {
                converged = true;
                iterations = it - 1;
                break;
            }
        }
        for i in 0..n {
            u[i] = mu[i] / kv[i];
        }
        ktu.fill(0.0);
        for (i, row) in kernel.outer_iter().enumerate() {
            let ui = u[i];
            for (acc, &k) in ktu.iter_mut().zip(row.iter()) {
                *acc += ui * k;
            }
        }
        if ktu.iter().chain(u.iter()).any(|&x| bad(x)) {
            return None;
        }
        for j in 0..m {
            v[j] = nu[j] / ktu[j];
        }
        if v.iter().any(|&x| bad(x)) {
            return None;
        }
    }
    let plan = Array2::from_shape_fn((n, m), |(i, j)| u[i] * kernel[[i, j]] * v[j]);
    let violation = plan_violation(plan.view(), mu, nu);
    if !converged {
        converged = violation <= tol;
    }
    Some(LogKernelSolution {
        plan,
        log_u: Array1::from_shape_fn(n, |i| a0[i] + u[i].ln() - top),
        log_v: Array1::from_shape_fn(m, |j| b0[j] + v[j].ln()),
        iterations,
        violation,
        converged,
    })
}

fn log_domain_projection(
    log_kernel: ArrayView2<f64>,
    mu: ArrayView1<f64>,
    nu: ArrayView1<f64>,
    max_iter: usize,
    tol: f64,
    warm_start: Option<(ArrayView1<f64>, ArrayView1<f64>)>,
) -> LogKernelSolution {
    let (n, m) = log_kernel.dim();
    let log_mu = mu.mapv(f64::ln);
    let log_nu = nu.mapv(f64::ln);
    let (mut a, mut b) = match warm_start {
        Some((a0, b0)) => (a0.to_owned(), b0.to_owned()),
        None => (Array1::zeros(n), Array1::zeros(m)),
    };
    let mut row_lse = Array1::<f64>::zeros(n);
    let mut col_buf = Array1::<f64>::zeros(n);
    let mut iterations = 0;
    let mut converged = false;
    for it in 1..=max_iter.max(1) {
        iterations = it;
        for i in 0..n {
            let row = log_kernel.row(i);
            row_lse[i] = log_sum_exp(row.iter().zip(b.iter()).map(|(l, bj)| l + bj));
        }
        if it > 1 {
            let violation = (0..n)
                .map(|i| ((a[i] + row_lse[i]).exp() - mu[i]).abs())
                .fold(0.0, f64::max);
            if violation <= tol {
                converged = true;
                iterations = it - 1;
                break;
            }
        }
        for i in 0..n {
            a[i] = log_mu[i] - row_lse[i];
        }
        for j in 0..m {
            for i in 0..n {
                col_buf[i] = log_kernel[[i, j]] + a[i];
            }
            b[j] = log_nu[j] - log_sum_exp(col_buf.iter().copied());
        }
    }
    let plan = Array2::from_shape_fn((n, m), |(i, j)| (a[i] + log_kernel[[i, j]] + b[j]).exp());
    let violation = plan_violation(plan.view(), mu, nu);
    if !converged {
        converged = violation <= tol;
    }
    LogKernelSolution {
        plan,
        log_u: a,
        log_v: b,
        iterations,
        violation,
        converged,
    }
}

fn plan_violation(plan: ArrayView2<f64>, mu: ArrayView1<f64>, nu: ArrayView1<f64>) -> f64 {
    let rows = crate::linalg::row_sums(plan);
    let cols = crate::linalg::col_sums(plan);
    rows.iter()
        .zip(mu.iter())
        .chain(cols.iter().zip(nu.iter()))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
