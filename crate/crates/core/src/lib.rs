//! Optimal-transport-based unsupervised domain adaptation.
//!
//! The crate is organised bottom-up:
//!
//! - [`ot`]: discrete measures, cost matrices, transport plans, the exact
//!   (transportation simplex) solver, the entropic Sinkhorn solver and a
//!   permutation brute-force oracle.
//! - [`cost`]: labeled feature sets and the pairwise cost family used for
//!   adaptation: squared Euclidean, class-blocked, penalty-relaxed and the
//!   label-mollified geodesic cost, together with their gradients.
//! - [`ccot`]: cluster-to-cluster transport and block-diagonal plan assembly.
//! - [`models`]: MLP embedding, softmax classifier, cross-entropy, SGD with
//!   momentum, the momentum memory bank and k-NN labelling.
//! - [`collab`]: the collaborative dual-plan solver, entropy / plan-coupling
//!   terms, the total adaptation loss and the training loop.
//! - [`data`]: synthetic domain-shift generators, IDX ingestion, the bundle
//!   container and run configuration.
//! - [`cli`]: the command implementations behind the `geocot` binary.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ccot;
pub mod cli;
pub mod collab;
pub mod cost;
pub mod data;
mod error;
pub mod linalg;
pub mod models;
pub mod ot;

pub use error::{Error, Result};
