//! Swap-test attention toolkit for quantum phase recognition.
//!
//! The pipeline: cluster-Ising ground states ([`hamiltonian`]) are fed
//! through a trainable feature-mapping circuit ([`ansatz`]), pairwise
//! swap-test overlaps form a symmetric attention matrix ([`attention`]), and
//! a softmax head ([`classifier`]) predicts one of three phases. The
//! [`analysis`] module turns attention matrices into contrast and
//! correlation-length diagnostics.
//!
//! Numerical code is generic over [`Real`]; the `*64` aliases below fix the
//! working precision used by the command-line tools.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod ansatz;
pub mod attention;
pub mod classifier;
pub mod error;
pub mod hamiltonian;
pub mod pauli;
pub mod report;
pub mod scalar;
pub mod statevec;

pub use error::{Error, Result};
pub use pauli::{Axis, PauliString};
pub use scalar::Real;

pub type StateVector64 = statevec::StateVector<f64>;
pub type StateVector32 = statevec::StateVector<f32>;
pub type AnsatzParams64 = ansatz::AnsatzParams<f64>;
pub type AttentionMatrix64 = attention::AttentionMatrix<f64>;
pub type AttentionMatrix32 = attention::AttentionMatrix<f32>;
pub type ClassifierParams64 = classifier::ClassifierParams<f64>;
pub type PauliSum64 = hamiltonian::PauliSum<f64>;
