use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("ambiguous degeneracy tolerance: {0}")]
    AmbiguousDegeneracy(String),

    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: String,
    },

    #[error("invalid coupling: {0}")]
    InvalidCoupling(String),

    #[error("invalid bath: {0}")]
    InvalidBath(String),

    #[error("bath is not thermal: {0}")]
    NotThermal(String),

    #[error("grid too coarse: {0}")]
    Nyquist(String),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("non-finite state; last good time t = {time}")]
    NonFinite { time: f64 },

    #[error("step size underflow; last good time t = {time}")]
    StepUnderflow { time: f64 },

    #[error("null space: {0}")]
    NullSpace(String),

    #[error("empty Bohr bin: {0}")]
    EmptyBin(String),

    #[error("dimension cap exceeded: {dim} > {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("Fock truncation leakage {leakage:e} exceeds {limit:e}")]
    TruncationLeakage { leakage: f64, limit: f64 },

    #[error("time window {requested} exceeds recurrence limit {limit}")]
    Recurrence { requested: f64, limit: f64 },

    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("tabulated spectrum, row {row}: {message}")]
    Table { row: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
