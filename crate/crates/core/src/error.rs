//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Feature vector cannot be encoded (all entries zero).
    #[error("cannot amplitude-encode an all-zero feature vector")]
    DegenerateEncoding,

    /// Input too large for the register.
    #[error("capacity exceeded: {got} values do not fit in 2^{n_qubits} amplitudes")]
    Capacity { got: usize, n_qubits: usize },

    /// Malformed gate, qubit index, or selection index.
    #[error("structural error: {0}")]
    Structural(String),

    /// A parameter-slot reference has no entry in the parameter table.
    #[error("unresolved parameter slot {slot}")]
    UnboundSlot { slot: usize },

    /// Caller misuse (empty batch, bad fraction, ...).
    #[error("usage error: {0}")]
    Usage(String),

    /// Non-finite value encountered during optimization.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Configuration rejected before any work started.
    #[error("config error: {0}")]
    Config(String),

    /// Dataset ingestion failure.
    #[error("data error: {0}")]
    Data(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 config, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Usage(_) | Error::Structural(_) | Error::UnboundSlot { .. } => 1,
            Error::Data(_) | Error::Io(_) | Error::DegenerateEncoding | Error::Capacity { .. } => 2,
            Error::Numerical(_) => 3,
        }
    }
}
