use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::evaluate::evaluate;
use super::loss::{forward_batch, parameter_gradients, total_loss, LossWeights};
use super::{solve_collaborative, CollabConfig, DualPlans, LossBreakdown};
use crate::data::{EvalSet, TrainingView};
use crate::models::{knn_predict, AdaptModel, LinearClassifier, MemoryBank, MlpEmbedding, Sgd, SgdConfig};
use crate::ot::{CostMatrix, DiscreteMeasure, SinkhornParams, TransportPlan};
use crate::{Error, Result};

/// Which terms of the total loss are trained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Cross-entropy on the source only.
    SourceOnly,
    /// One plan on the classifier-label cost, no k-NN stream and no coupling.
    SingleMap,
    /// Both plans, coupled.
    #[default]
    Collaborative,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::SourceOnly, Method::SingleMap, Method::Collaborative];

    pub fn name(&self) -> &'static str {
        match self {
            Method::SourceOnly => "source-only",
            Method::SingleMap => "single-map",
            Method::Collaborative => "collaborative",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub method: Method,
    /// Hidden and latent widths of the embedding; the input width comes from the data.
    pub widths: Vec<usize>,
    pub bank_momentum: f64,
    /// Epochs of source-only training before the transport terms switch on.
    pub warmup_epochs: usize,
    pub collab: CollabConfig,
    pub sgd: SgdConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::Collaborative,
            widths: vec![128, 64],
            bank_momentum: 0.5,
            warmup_epochs: 10,
            collab: CollabConfig::default(),
            sgd: SgdConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut p = self.collab.problems();
        p.extend(self.sgd.problems());
        if self.widths.is_empty() || self.widths.contains(&0) {
            p.push("widths must be a non-empty list of positive layer sizes".into());
        }
        if !(0.0..1.0).contains(&self.bank_momentum) {
            p.push(format!("bank_momentum must lie in [0,1), got {}", self.bank_momentum));
        }
        if self.collab.epochs == 0 {
            p.push("epochs must be at least 1".into());
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
}

/// One record of the metrics stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub ce: f64,
    pub ot: f64,
    pub entropy: f64,
    pub kl: f64,
    pub total: f64,
    pub target_acc: Option<f64>,
    pub marginal_violation: f64,
    pub plan_disagreement: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: AdaptModel,
    pub history: Vec<EpochMetrics>,
}

const DIVERGENCE_FACTOR: f64 = 10.0;
const DIVERGENCE_PATIENCE: usize = 3;

fn select_rows(x: ndarray::ArrayView2<f64>, idx: &[usize]) -> Array2<f64> {
    x.select(Axis(0), idx)
}

fn placeholder_plans(b: usize) -> DualPlans {
    let mu = DiscreteMeasure::uniform(b);
    let p = TransportPlan::outer(&mu, &mu);
    DualPlans {
        plan1: p.clone(),
        plan2: p,
        outer_iterations: 0,
        residual: 0.0,
        violation: 0.0,
        converged: true,
    }
}

/// Plans for one minibatch. Both costs are divided by their common largest
/// entry first so that `sinkhorn_reg` is relative to the cost scale.
fn solve_plans(cost1: &CostMatrix, cost2: &CostMatrix, mu: &DiscreteMeasure, cfg: &TrainConfig) -> Result<DualPlans> {
    let top = cost1.max_entry().max(cost2.max_entry());
    let scale = if top > 0.0 { 1.0 / top } else { 1.0 };
    let (c1, c2) = (cost1.scaled(scale)?, cost2.scaled(scale)?);
    if cfg.method == Method::SingleMap {
        let c = &cfg.collab;
        let sol = SinkhornParams::new(c.sinkhorn_reg, c.inner_max_iter, c.inner_tol).solve_unchecked(&c1, mu, mu)?;
        return Ok(DualPlans {
            plan1: sol.plan.clone(),
            plan2: sol.plan,
            outer_iterations: 0,
            residual: 0.0,
            violation: sol.violation,
            converged: sol.converged,
        });
    }
    solve_collaborative(&c1, &c2, mu, mu, &cfg.collab)
}

/// Trains embedding and classifier on labeled source and unlabeled target
/// data. `eval`, when given, is only used to report target accuracy.
pub fn train_adaptation(view: &TrainingView<'_>, eval: Option<&EvalSet<'_>>, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_adaptation_with(view, eval, cfg, |_| {})
}

/// Like [`train_adaptation`], calling `on_epoch` after every epoch.
pub fn train_adaptation_with<F>(
    view: &TrainingView<'_>,
    eval: Option<&EvalSet<'_>>,
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainOutcome>
where
    F: FnMut(&EpochMetrics),
{
    cfg.validate()?;
    let xs = view.source_features();
    let ys = view.source_labels();
    let xt = view.target_features();
    let classes = view.num_classes();
    let (ns, nt) = (xs.nrows(), xt.nrows());
    if ns == 0 || nt == 0 {
        return Err(Error::InvalidParameter("training needs non-empty source and target sets".into()));
    }
    if xs.ncols() != xt.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "source features have width {}, target {}",
            xs.ncols(),
            xt.ncols()
        )));
    }

    let seed = cfg.collab.seed;
    let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seed);
    shuffle_rng.set_stream(1);
    let mut widths = vec![xs.ncols()];
    widths.extend(&cfg.widths);
    let mut embedding = MlpEmbedding::new(&widths, &mut init_rng)?;
    let mut classifier = LinearClassifier::new(embedding.latent_dim(), classes, &mut init_rng);
    let (z0, _) = embedding.forward(xs)?;
    let mut bank = MemoryBank::new(z0, cfg.bank_momentum)?;
    let mut opt = Sgd::new(cfg.sgd);

    let b = cfg.sgd.batch_size.min(ns).min(nt);
    let steps = ns / b;
    let k = cfg.collab.k_neighbors.min(ns);
    let cost_params = cfg.collab.cost_params();
    let mu = DiscreteMeasure::uniform(b);
    let mut history = Vec::with_capacity(cfg.collab.epochs);
    let mut initial_total: Option<f64> = None;
    let mut strikes = 0;
    let mut src_order: Vec<usize> = (0..ns).collect();
    let mut tgt_order: Vec<usize> = (0..nt).collect();

    for epoch in 1..=cfg.collab.epochs {
        src_order.shuffle(&mut shuffle_rng);
        tgt_order.shuffle(&mut shuffle_rng);
        let transport_on = cfg.method != Method::SourceOnly && epoch > cfg.warmup_epochs;
        let weights = match (transport_on, cfg.method) {
            (false, _) => LossWeights {
                lambda1: 0.0,
                lambda2: 0.0,
                lambda3: 0.0,
                ..LossWeights::from_config(&cfg.collab)
            },
            (true, Method::SingleMap) => LossWeights {
                alpha_plan: 1.0,
                lambda3: 0.0,
                ..LossWeights::from_config(&cfg.collab)
            },
            (true, _) => LossWeights::from_config(&cfg.collab),
        };
        let mut sums = LossBreakdown::default();
        let mut violation: f64 = 0.0;
        let mut disagreement = 0.0;
        for step in 0..steps {
            let si: Vec<usize> = src_order[step * b..(step + 1) * b].to_vec();
            let ti: Vec<usize> = (0..b).map(|r| tgt_order[(step * b + r) % nt]).collect();
            let bx = select_rows(xs, &si);
            let by: Vec<usize> = si.iter().map(|&i| ys[i]).collect();
            let bt = select_rows(xt, &ti);
            let (zt, _) = embedding.forward(bt.view())?;
            let pseudo = if transport_on {
                knn_predict(&bank, ys, zt.view(), k, classes)?
            } else {
                vec![0; b]
            };
            let (state, tape_s, tape_t) = forward_batch(
                &embedding,
                &classifier,
                bx.view(),
                &by,
                bt.view(),
                &pseudo,
                classes,
                cost_params,
            )?;
            let plans = if transport_on {
                solve_plans(&state.cost1, &state.cost2, &mu, cfg)?
            } else {
                placeholder_plans(b)
            };
            let (breakdown, lg) = total_loss(&state, &plans, &weights)?;
            let grads = parameter_gradients(&embedding, &classifier, &state, (&tape_s, &tape_t), &lg)?;
            opt.step(&mut embedding, &mut classifier, &grads)?;
            bank.update(&si, state.source_latent.view())?;

            sums.ce += breakdown.ce;
            sums.ot += breakdown.ot;
            sums.entropy += breakdown.entropy;
            sums.kl += breakdown.kl;
            sums.total += breakdown.total;
            violation = violation.max(plans.violation);
            disagreement += plans.disagreement();
        }
        let n = steps as f64;
        let target_acc = match eval {
            Some(e) => Some(evaluate(&embedding, &classifier, e.features(), e.labels())?.accuracy),
            None => None,
        };
        let m = EpochMetrics {
            epoch,
            ce: sums.ce / n,
            ot: sums.ot / n,
            entropy: sums.entropy / n,
            kl: sums.kl / n,
            total: sums.total / n,
            target_acc,
            marginal_violation: violation,
            plan_disagreement: disagreement / n,
        };
        on_epoch(&m);
        log::info!(
            "epoch {epoch}: total {:.6} ce {:.6} ot {:.6} acc {:?}",
            m.total,
            m.ce,
            m.ot,
            m.target_acc
        );
        let initial = *initial_total.get_or_insert(m.total);
        if !m.total.is_finite() || m.total > DIVERGENCE_FACTOR * initial {
            strikes += 1;
        } else {
            strikes = 0;
        }
        let total = m.total;
        history.push(m);
        if strikes >= DIVERGENCE_PATIENCE || !total.is_finite() {
            return Err(Error::Diverged {
                epoch,
                loss: total,
                initial,
            });
        }
    }
    Ok(TrainOutcome {
        model: AdaptModel {
            embedding,
            classifier,
            bank,
        },
        history,
    })
}
