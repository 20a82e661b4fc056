use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid qubit index {index} for a {num_qubits}-qubit state")]
    InvalidQubit { index: usize, num_qubits: usize },

    #[error("invalid measurement outcome {0} (expected 0 or 1)")]
    InvalidOutcome(u8),

    #[error("outcome {outcome} on qubit {qubit} has probability {probability:e}")]
    ImpossibleOutcome { qubit: usize, outcome: u8, probability: f64 },

    #[error("state cannot be normalized: {0}")]
    Normalization(String),

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("measurement set is not informationally complete (rank {rank} < {required})")]
    RankDeficient { rank: usize, required: usize },

    #[error("empty count record list")]
    EmptyCounts,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
