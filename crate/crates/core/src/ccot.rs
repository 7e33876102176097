//! Cluster-to-cluster optimal transport.
//!
//! Source and target points are grouped by (true or predicted) class and
//! transported only within their class: the total is the sum of per-class
//! optimal transport values, each weighted by the class's mass share. When the
//! per-class masses agree on both sides this equals plain optimal transport on
//! [`hard_class_cost`](crate::cost::hard_class_cost), and the optimal plan is
//! block-diagonal under class-sorted ordering.

use ndarray::{Array1, Array2};

use crate::cost::{penalized_cost, squared_euclidean_cost, GeodesicCostParams, LabeledFeatureSet};
use crate::ot::{transport_cost, DiscreteMeasure, ExactSolver, TransportPlan};
use crate::{Error, Result};

/// Tolerance for per-class mass equality in strict mode.
pub const MASS_MATCH_TOLERANCE: f64 = 1e-12;

/// Points grouped by class on both sides.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPartition {
    pub class_count: usize,
    pub source_len: usize,
    pub target_len: usize,
    pub source_indices: Vec<Vec<usize>>,
    pub target_indices: Vec<Vec<usize>>,
    /// `(source_mass_k, target_mass_k)` per class.
    pub cluster_masses: Vec<(f64, f64)>,
}

impl ClusterPartition {
    /// Classes with no points on at least one side.
    pub fn empty_classes(&self) -> Vec<usize> {
        (0..self.class_count)
            .filter(|&k| self.source_indices[k].is_empty() || self.target_indices[k].is_empty())
            .collect()
    }

    /// Classes with points on the source side only.
    pub fn source_only_classes(&self) -> Vec<usize> {
        (0..self.class_count)
            .filter(|&k| !self.source_indices[k].is_empty() && self.target_indices[k].is_empty())
            .collect()
    }

    /// Classes with points on the target side only.
    pub fn target_only_classes(&self) -> Vec<usize> {
        (0..self.class_count)
            .filter(|&k| self.source_indices[k].is_empty() && !self.target_indices[k].is_empty())
            .collect()
    }
}

/// Groups both sets by hard label. Masses are the empirical class shares
/// under uniform weights on each side.
pub fn partition_by_label(
    source: &LabeledFeatureSet,
    target: &LabeledFeatureSet,
    class_count: usize,
) -> Result<ClusterPartition> {
    let ys = source
        .hard_labels()
        .ok_or_else(|| Error::MissingLabels("source set has no hard labels".into()))?;
    let yt = target
        .hard_labels()
        .ok_or_else(|| Error::MissingLabels("target set has no hard labels".into()))?;
    let group = |labels: &[usize]| -> Result<Vec<Vec<usize>>> {
        let mut groups = vec![Vec::new(); class_count];
        for (i, &l) in labels.iter().enumerate() {
            if l >= class_count {
                return Err(Error::LabelOutOfRange {
                    label: l,
                    classes: class_count,
                });
            }
            groups[l].push(i);
        }
        Ok(groups)
    };
    let source_indices = group(ys)?;
    let target_indices = group(yt)?;
    let ns = ys.len().max(1) as f64;
    let nt = yt.len().max(1) as f64;
    let cluster_masses = source_indices
        .iter()
        .zip(&target_indices)
        .map(|(s, t)| (s.len() as f64 / ns, t.len() as f64 / nt))
        .collect();
    let partition = ClusterPartition {
        class_count,
        source_len: ys.len(),
        target_len: yt.len(),
        source_indices,
        target_indices,
        cluster_masses,
    };
    let empty = partition.empty_classes();
    if !empty.is_empty() {
        log::debug!("classes empty on at least one side: {empty:?}");
    }
    Ok(partition)
}

/// How per-class masses are reconciled when the two sides disagree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClusterMasses {
    /// Error unless every class has equal source and target share.
    Strict,
    /// Each class gets the mean of its two shares, renormalized. Source-only
    /// classes are transported against all targets with the penalized cost;
    /// target-only classes receive no mass.
    Balanced { fallback: GeodesicCostParams },
}

#[derive(Debug, Clone)]
pub struct CcotOptions {
    pub masses: ClusterMasses,
    pub solver: ExactSolver,
}

impl Default for CcotOptions {
    fn default() -> Self {
        Self {
            masses: ClusterMasses::Strict,
            solver: ExactSolver::default(),
        }
    }
}

/// Transport of source-only classes against the whole target set.
#[derive(Debug, Clone)]
pub struct FallbackTransport {
    pub source_indices: Vec<usize>,
    pub mass: f64,
    /// Unit-mass plan between the orphaned source points and all targets.
    pub plan: TransportPlan,
    pub cost: f64,
}

#[derive(Debug, Clone)]
pub struct CcotResult {
    /// `Σ_k mass_k · OT_k` (+ the fallback contribution, if any).
    pub value: f64,
    /// Partition with the masses actually used.
    pub partition: ClusterPartition,
    /// Unit-mass per-class plans (`None` for classes without a counterpart).
    pub cluster_plans: Vec<Option<TransportPlan>>,
    /// Unit-mass per-class transport costs.
    pub cluster_costs: Vec<Option<f64>>,
    pub fallback: Option<FallbackTransport>,
}

impl CcotResult {
    /// Full `N_s × N_t` plan including any fallback transport.
    pub fn full_plan(&self) -> Result<TransportPlan> {
        let block = assemble_block_entries(&self.partition, &self.cluster_plans)?;
        let mut entries = block;
        if let Some(fb) = &self.fallback {
            for (a, &i) in fb.source_indices.iter().enumerate() {
                for j in 0..self.partition.target_len {
                    entries[[i, j]] += fb.mass * fb.plan.entries()[[a, j]];
                }
            }
        }
        plan_from_entries(entries)
    }
}

/// Cluster-to-cluster transport with strict mass matching.
pub fn ccot_distance(
    source: &LabeledFeatureSet,
    target: &LabeledFeatureSet,
    class_count: usize,
) -> Result<CcotResult> {
    ccot_distance_with(source, target, class_count, &CcotOptions::default())
}

pub fn ccot_distance_with(
    source: &LabeledFeatureSet,
    target: &LabeledFeatureSet,
    class_count: usize,
    options: &CcotOptions,
) -> Result<CcotResult> {
    let mut partition = partition_by_label(source, target, class_count)?;
    let mut orphans: Vec<usize> = Vec::new();
    let mut orphan_mass = 0.0;
    match options.masses {
        ClusterMasses::Strict => {
            for k in 0..class_count {
                let (s, t) = partition.cluster_masses[k];
                let (ns, nt) = (partition.source_indices[k].len(), partition.target_indices[k].len());
                if (ns == 0) != (nt == 0) {
                    return Err(Error::ClusterMassMismatch(format!(
                        "class {k} has {ns} source and {nt} target points"
                    )));
                }
                if (s - t).abs() > MASS_MATCH_TOLERANCE {
                    return Err(Error::ClusterMassMismatch(format!(
                        "class {k} has source mass {s} and target mass {t}"
                    )));
                }
            }
        }
        ClusterMasses::Balanced { .. } => {
            let mut total = 0.0;
            for k in 0..class_count {
                let (s, t) = partition.cluster_masses[k];
                let (ns, nt) = (partition.source_indices[k].len(), partition.target_indices[k].len());
                let w = match (ns > 0, nt > 0) {
                    (true, true) => 0.5 * (s + t),
                    (true, false) => {
                        log::warn!("class {k} has no target points; using penalized fallback transport");
                        orphans.extend(&partition.source_indices[k]);
                        orphan_mass += s;
                        0.0
                    }
                    _ => 0.0,
                };
                partition.cluster_masses[k] = (w, w);
                total += w;
            }
            total += orphan_mass;
            if total <= 0.0 {
                return Err(Error::ClusterMassMismatch("no class can be transported".into()));
            }
            for m in partition.cluster_masses.iter_mut() {
                *m = (m.0 / total, m.1 / total);
            }
            orphan_mass /= total;
        }
    }

    let mut cluster_plans = Vec::with_capacity(class_count);
    let mut cluster_costs = Vec::with_capacity(class_count);
    let mut value = 0.0;
    for k in 0..class_count {
        let (si, ti) = (&partition.source_indices[k], &partition.target_indices[k]);
        if si.is_empty() || ti.is_empty() {
            cluster_plans.push(None);
            cluster_costs.push(None);
            continue;
        }
        let xs = source.subset(si);
        let xt = target.subset(ti);
        let cost = squared_euclidean_cost(&xs, &xt)?;
        let sol = options.solver.solve(
            &cost,
            &DiscreteMeasure::uniform(si.len()),
            &DiscreteMeasure::uniform(ti.len()),
        )?;
        value += partition.cluster_masses[k].0 * sol.objective;
        cluster_costs.push(Some(sol.objective));
        cluster_plans.push(Some(sol.plan));
    }

    let fallback = match (options.masses, orphans.is_empty()) {
        (ClusterMasses::Balanced { fallback }, false) => {
            orphans.sort_unstable();
            let xs = source.subset(&orphans);
            let cost = penalized_cost(&xs, target, &fallback)?;
            let sol = options.solver.solve(
                &cost,
                &DiscreteMeasure::uniform(orphans.len()),
                &DiscreteMeasure::uniform(target.len()),
            )?;
            value += orphan_mass * sol.objective;
            Some(FallbackTransport {
                source_indices: orphans,
                mass: orphan_mass,
                cost: transport_cost(&sol.plan, &cost)?,
                plan: sol.plan,
            })
        }
        _ => None,
    };

    Ok(CcotResult {
        value,
        partition,
        cluster_plans,
        cluster_costs,
        fallback,
    })
}

/// Embeds unit-mass per-class plans, scaled by their class mass, into the
/// full `N_s × N_t` plan. Entries outside same-class blocks are exactly zero.
pub fn assemble_block_plan(
    partition: &ClusterPartition,
    cluster_plans: &[Option<TransportPlan>],
) -> Result<TransportPlan> {
    plan_from_entries(assemble_block_entries(partition, cluster_plans)?)
}

fn assemble_block_entries(
    partition: &ClusterPartition,
    cluster_plans: &[Option<TransportPlan>],
) -> Result<Array2<f64>> {
    if cluster_plans.len() != partition.class_count {
        return Err(Error::DimensionMismatch(format!(
            "{} cluster plans for {} classes",
            cluster_plans.len(),
            partition.class_count
        )));
    }
    let mut entries = Array2::<f64>::zeros((partition.source_len, partition.target_len));
    for (k, plan) in cluster_plans.iter().enumerate() {
        let Some(plan) = plan else { continue };
        let (si, ti) = (&partition.source_indices[k], &partition.target_indices[k]);
        if plan.shape() != (si.len(), ti.len()) {
            return Err(Error::DimensionMismatch(format!(
                "cluster {k} plan is {:?}, partition has {}x{}",
                plan.shape(),
                si.len(),
                ti.len()
            )));
        }
        let (ms, mt) = partition.cluster_masses[k];
        if (ms - mt).abs() > MASS_MATCH_TOLERANCE {
            return Err(Error::ClusterMassMismatch(format!(
                "class {k} has source mass {ms} and target mass {mt}"
            )));
        }
        for (a, &i) in si.iter().enumerate() {
            for (b, &j) in ti.iter().enumerate() {
                entries[[i, j]] = ms * plan.entries()[[a, b]];
            }
        }
    }
    Ok(entries)
}

fn plan_from_entries(entries: Array2<f64>) -> Result<TransportPlan> {
    let rows: Array1<f64> = crate::linalg::row_sums(entries.view());
    let cols: Array1<f64> = crate::linalg::col_sums(entries.view());
    let mu = DiscreteMeasure::normalized(rows)?;
    let nu = DiscreteMeasure::normalized(cols)?;
    TransportPlan::new(entries, mu, nu)
}
