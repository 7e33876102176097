//! Collaborative dual-plan transport: objective terms, the coupled plan
//! solver, the adaptation training loop and evaluation.

mod evaluate;
mod loss;
mod objective;
mod solver;
mod trainer;

pub use evaluate::{evaluate, Evaluation};
pub use loss::{loss_and_gradients, total_loss, BatchState, LossBreakdown, LossGradients, LossWeights};
pub use objective::{entropy_grad_logits, kl_plans, kl_plans_with, target_entropy, KlVariant, KL_CLAMP};
pub use solver::{solve_collaborative, CollabConfig, DualPlans};
pub use trainer::{train_adaptation, train_adaptation_with, EpochMetrics, Method, TrainConfig, TrainOutcome};
