//! Transportation simplex (network simplex on the complete bipartite graph).
//!
//! The basis is a spanning tree over the `m + n` row/column nodes with exactly
//! `m + n − 1` basic cells, some of which may carry zero flow. Each pivot
//! recomputes the node potentials `u_i + v_j = C_ij` on the tree, prices every
//! non-basic cell, and pushes flow around the unique cycle closed by the
//! entering cell.

use ndarray::{Array1, Array2, ArrayView2};

use super::support::Support;
use super::{transport_cost, CostMatrix, DiscreteMeasure, TransportPlan};
use crate::{Error, Result};

/// Exact solver with a size cap.
#[derive(Debug, Clone, Copy)]
pub struct ExactSolver {
    pub max_rows: usize,
    pub max_cols: usize,
    /// Pivot budget; `None` picks `50·(m+n)² + 1000`.
    pub max_pivots: Option<usize>,
}

impl Default for ExactSolver {
    fn default() -> Self {
        Self {
            max_rows: 512,
            max_cols: 512,
            max_pivots: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExactSolution {
    pub plan: TransportPlan,
    pub objective: f64,
    pub pivots: usize,
}

/// Solves with the default 512×512 cap.
pub fn solve_exact(
    cost: &CostMatrix,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<TransportPlan> {
    ExactSolver::default().solve(cost, mu, nu).map(|s| s.plan)
}

impl ExactSolver {
    pub fn solve(
        &self,
        cost: &CostMatrix,
        mu: &DiscreteMeasure,
        nu: &DiscreteMeasure,
    ) -> Result<ExactSolution> {
        cost.check_against(mu, nu)?;
        let (rows, cols) = cost.shape();
        if rows > self.max_rows || cols > self.max_cols {
            return Err(Error::SolverCapExceeded {
                rows,
                cols,
                max_rows: self.max_rows,
                max_cols: self.max_cols,
            });
        }

        let support = Support::of(mu.weights(), nu.weights());
        let (c, a, b) = if support.is_full() {
            (
                cost.entries().to_owned(),
                mu.weights().to_owned(),
                nu.weights().to_owned(),
            )
        } else {
            (
                support.compact_matrix(cost.entries()),
                support.compact_rows(mu.weights()),
                support.compact_cols(nu.weights()),
            )
        };

        let (m, n) = c.dim();
        let budget = self
            .max_pivots
            .unwrap_or(50 * (m + n) * (m + n) + 1000);
        let mut simplex = Simplex::northwest(c.view(), &a, &b);
        let pivots = simplex.run(budget)?;
        let reduced = simplex.flows();
        let entries = if support.is_full() {
            reduced
        } else {
            support.expand(&reduced)
        };
        let plan = TransportPlan::new(entries, mu.clone(), nu.clone())?;
        let objective = transport_cost(&plan, cost)?;
        Ok(ExactSolution {
            plan,
            objective,
            pivots,
        })
    }
}

struct Simplex<'a> {
    cost: ArrayView2<'a, f64>,
    m: usize,
    n: usize,
    /// Basic cells `(row, col)` and their flows; slots are reused on pivot.
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
    /// For each node (rows `0..m`, columns `m..m+n`) the incident basic slots.
    adj: Vec<Vec<usize>>,
    u: Vec<f64>,
    v: Vec<f64>,
    parent_slot: Vec<usize>,
    depth: Vec<usize>,
}

const NO_PARENT: usize = usize::MAX;

impl<'a> Simplex<'a> {
    /// Initial basic feasible solution by the northwest-corner rule, which
    /// always yields a spanning tree of `m + n − 1` cells.
    fn northwest(cost: ArrayView2<'a, f64>, a: &Array1<f64>, b: &Array1<f64>) -> Self {
        let (m, n) = cost.dim();
        let mut ra = a.to_vec();
        let mut rb = b.to_vec();
        let mut cells = Vec::with_capacity(m + n - 1);
        let mut flow = Vec::with_capacity(m + n - 1);
        let (mut i, mut j) = (0, 0);
        loop {
            let x = if i == m - 1 && j == n - 1 {
                // Last cell absorbs the rounding residue of the two totals.
                ra[i].max(0.0)
            } else {
                ra[i].min(rb[j]).max(0.0)
            };
            cells.push((i, j));
            flow.push(x);
            ra[i] -= x;
            rb[j] -= x;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if i == m - 1 {
                j += 1;
            } else if j == n - 1 || ra[i] <= rb[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
        let mut adj = vec![Vec::new(); m + n];
        for (s, &(i, j)) in cells.iter().enumerate() {
            adj[i].push(s);
            adj[m + j].push(s);
        }
        Self {
            cost,
            m,
            n,
            cells,
            flow,
            adj,
            u: vec![0.0; m],
            v: vec![0.0; n],
            parent_slot: vec![NO_PARENT; m + n],
            depth: vec![0; m + n],
        }
    }

    fn flows(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.m, self.n));
        for (s, &(i, j)) in self.cells.iter().enumerate() {
            out[[i, j]] += self.flow[s];
        }
        out
    }

    fn other_end(&self, slot: usize, node: usize) -> usize {
        let (i, j) = self.cells[slot];
        if node < self.m {
            self.m + j
        } else {
            i
        }
    }

    /// Potentials and rooted-tree structure by DFS from row 0 (`u_0 = 0`).
    fn compute_potentials(&mut self) {
        let total = self.m + self.n;
        let mut seen = vec![false; total];
        let mut stack = vec![0usize];
        seen[0] = true;
        self.u[0] = 0.0;
        self.parent_slot[0] = NO_PARENT;
        self.depth[0] = 0;
        while let Some(node) = stack.pop() {
            for k in 0..self.adj[node].len() {
                let slot = self.adj[node][k];
                let next = self.other_end(slot, node);
                if seen[next] {
                    continue;
                }
                seen[next] = true;
                let (i, j) = self.cells[slot];
                let c = self.cost[[i, j]];
                if next < self.m {
                    self.u[next] = c - self.v[j];
                } else {
                    self.v[next - self.m] = c - self.u[i];
                }
                self.parent_slot[next] = slot;
                self.depth[next] = self.depth[node] + 1;
                stack.push(next);
            }
        }
        debug_assert!(seen.iter().all(|&s| s), "basis is not a spanning tree");
    }

    /// Most negative reduced cost among non-basic cells, with a tolerance
    /// proportional to the magnitudes entering the subtraction.
    fn price(&self, bland: bool) -> Option<(usize, usize)> {
        const SCALE: f64 = 8.0 * f64::EPSILON;
        let mut best: Option<(usize, usize)> = None;
        let mut best_rc = 0.0;
        for i in 0..self.m {
            let ui = self.u[i];
            let row = self.cost.row(i);
            for (j, &c) in row.iter().enumerate() {
                let vj = self.v[j];
                let rc = c - ui - vj;
                let tol = SCALE * (c.abs() + ui.abs() + vj.abs()) + 1e-300;
                if rc < -tol {
                    if bland {
                        return Some((i, j));
                    }
                    if rc < best_rc {
                        best_rc = rc;
                        best = Some((i, j));
                    }
                }
            }
        }
        best
    }

    /// Slots on the tree path from row `i` to column `j`, ordered from `i`.
    fn tree_path(&self, i: usize, j: usize) -> Vec<usize> {
        let mut a = i;
        let mut b = self.m + j;
        let mut from_a = Vec::new();
        let mut from_b = Vec::new();
        while self.depth[a] > self.depth[b] {
            let s = self.parent_slot[a];
            from_a.push(s);
            a = self.other_end(s, a);
        }
        while self.depth[b] > self.depth[a] {
            let s = self.parent_slot[b];
            from_b.push(s);
            b = self.other_end(s, b);
        }
        while a != b {
            let sa = self.parent_slot[a];
            from_a.push(sa);
            a = self.other_end(sa, a);
            let sb = self.parent_slot[b];
            from_b.push(sb);
            b = self.other_end(sb, b);
        }
        from_b.reverse();
        from_a.extend(from_b);
        from_a
    }

    fn pivot(&mut self, i: usize, j: usize) -> bool {
        let path = self.tree_path(i, j);
        // Along the path starting at row i, edges alternate −, +, −, …
        let mut theta = f64::INFINITY;
        let mut leaving = usize::MAX;
        for (t, &s) in path.iter().enumerate() {
            if t % 2 == 0 && self.flow[s] < theta {
                theta = self.flow[s];
                leaving = s;
            }
        }
        for (t, &s) in path.iter().enumerate() {
            if s == leaving {
                continue;
            }
            if t % 2 == 0 {
                self.flow[s] -= theta;
            } else {
                self.flow[s] += theta;
            }
        }
        let (li, lj) = self.cells[leaving];
        self.adj[li].retain(|&s| s != leaving);
        self.adj[self.m + lj].retain(|&s| s != leaving);
        self.cells[leaving] = (i, j);
        self.flow[leaving] = theta;
        self.adj[i].push(leaving);
        self.adj[self.m + j].push(leaving);
        theta == 0.0
    }

    fn run(&mut self, budget: usize) -> Result<usize> {
        let stall_limit = self.m + self.n;
        let mut degenerate_run = 0usize;
        for pivots in 0..budget {
            self.compute_potentials();
            let bland = degenerate_run > stall_limit;
            let Some((i, j)) = self.price(bland) else {
                return Ok(pivots);
            };
            if self.pivot(i, j) {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
        }
        Err(Error::SolverFailed(format!(
            "no optimal basis after {budget} pivots"
        )))
    }
}
