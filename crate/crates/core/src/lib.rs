//! Parallel parameterized-quantum-circuit classifier.
//!
//! Two independent variational circuits run over the same amplitude-encoded
//! input; their per-qubit Pauli-Z expectations are concatenated, a subset is
//! selected as class logits, and the whole model is trained with
//! parameter-shift gradients and Adam. Gaussian pixel noise and gate-level
//! noise can be injected to study robustness.
//!
//! # Bit-ordering convention
//!
//! Qubit `q` of an `n`-qubit register corresponds to bit `n - 1 - q` of the
//! basis-state index, so the ket label reads `|q0 q1 .. q(n-1)>` left to
//! right. For example with `n = 2`, basis index 2 (binary `10`) is the state
//! `|10>`: qubit 0 is 1, qubit 1 is 0. Every module in this crate shares this
//! convention, and the logit-selection indices of the classical head inherit
//! it.

pub mod ansatz;
pub mod augment;
pub mod circuit;
pub mod data;
pub mod error;
pub mod gradient;
pub mod head;
pub mod metrics;
pub mod noise;
pub mod params;
pub mod rng;
pub mod state;
pub mod trainer;

pub use circuit::{AngleBinding, CircuitProgram, GateKind, GateOp};
pub use error::{Error, Result};
pub use head::{AdamState, ModelSpec};
pub use metrics::EvalMetrics;
pub use noise::{NoiseConfig, NoiseMode};
pub use params::ParameterTable;
pub use state::Statevector;
pub use trainer::{EpochRecord, Model, TrainingConfig};
