//! Discrete optimal transport.
//!
//! Two solvers share the same inputs ([`CostMatrix`] plus two
//! [`DiscreteMeasure`]s) and output ([`TransportPlan`]):
//!
//! - [`solve_exact`]: transportation simplex on the bipartite network, exact
//!   up to floating-point pivoting, capped at 512×512 by default.
//! - [`solve_sinkhorn`]: entropically regularized transport by alternating
//!   scaling, switching to log-domain updates (with the regularization
//!   annealed down from the cost range) when the regularization is small
//!   relative to the cost range or when a scaling vector underflows.
//!
//! [`brute_force_oracle`] enumerates permutations for tiny uniform instances
//! and is the reference the exact solver is checked against.

mod exact;
mod oracle;
mod sinkhorn;
mod support;
mod types;

pub use exact::{solve_exact, ExactSolution, ExactSolver};
pub use oracle::{brute_force_oracle, MAX_ORACLE_SIZE};
pub use sinkhorn::{
    sinkhorn_log_kernel, solve_sinkhorn, LogKernelSolution, ScalingDomain, SinkhornParams,
    SinkhornSolution,
};
pub use types::{marginal_violation, transport_cost, CostMatrix, DiscreteMeasure, TransportPlan};

/// Absolute tolerance on the total mass of a [`DiscreteMeasure`].
pub const MASS_TOLERANCE: f64 = 1e-12;
