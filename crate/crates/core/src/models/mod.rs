//! Networks and the memory-bank k-NN labeller used by adaptation training.

mod bank;
mod checkpoint;
mod classifier;
mod loss;
mod mlp;
mod sgd;

pub use bank::{bank_update, knn_predict, MemoryBank};
pub use checkpoint::{AdaptModel, Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use classifier::{classify, LinearClassifier};
pub use loss::{cross_entropy, LOG_EPSILON};
pub use mlp::{embed_forward, Dense, MlpEmbedding, Tape, LEAKY_SLOPE};
pub use sgd::{backward_and_step, Gradients, Sgd, SgdConfig};

/// Uniform Glorot initialisation bound `sqrt(6 / (fan_in + fan_out))`.
pub(crate) fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}
