use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("6D rotation columns are parallel or near zero (norm {0:.3e})")]
    DegenerateSixD(f64),
    #[error("matrix block is rank deficient (smallest singular value {0:.3e})")]
    RankDeficient(f64),
    #[error("no person is visible in any frame")]
    NoVisiblePerson,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("length mismatch: {what} (expected {expected}, got {got})")]
    LengthMismatch {
        what: String,
        expected: usize,
        got: usize,
    },
    #[error("infiller `{name}` violated its contract: {reason}")]
    InfillerContract { name: String, reason: String },
    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownName {
        kind: &'static str,
        name: String,
        available: String,
    },
    #[error("non-finite energy in term {term} at iteration {iteration}")]
    NonFiniteEnergy { term: &'static str, iteration: usize },
    #[error("non-finite gradient at parameter {index} ({label})")]
    NonFiniteGradient { index: usize, label: String },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("scene file schema: {0}")]
    Schema(String),
    #[error("unsupported schema version {found} (this build reads up to {supported})")]
    SchemaVersion { found: u32, supported: u32 },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerical kind (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFiniteEnergy { .. }
                | Error::NonFiniteGradient { .. }
                | Error::Numerical(_)
                | Error::RankDeficient(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
