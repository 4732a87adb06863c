use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegressionError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("design matrix is rank deficient: numerical rank {rank} < {cols} columns")]
    RankDeficient { rank: usize, cols: usize },

    #[error("numerical failure at iteration {iteration}: {reason}")]
    NumericalFailure { iteration: usize, reason: String },

    #[error("size cap exceeded: {0}")]
    SizeCap(String),

    #[error("domain error: {0}")]
    Domain(String),
}

impl RegressionError {
    /// Process exit code used by the command-line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            RegressionError::InvalidInput(_)
            | RegressionError::InvalidConfig(_)
            | RegressionError::Domain(_) => 2,
            RegressionError::RankDeficient { .. } | RegressionError::NumericalFailure { .. } => 3,
            RegressionError::SizeCap(_) => 4,
        }
    }

    /// Short machine-readable tag, used as the `status` column of trial tables.
    pub fn code(&self) -> &'static str {
        match self {
            RegressionError::InvalidInput(_) => "invalid_input",
            RegressionError::InvalidConfig(_) => "invalid_config",
            RegressionError::RankDeficient { .. } => "rank_deficient",
            RegressionError::NumericalFailure { .. } => "numerical_failure",
            RegressionError::SizeCap(_) => "size_cap",
            RegressionError::Domain(_) => "domain",
        }
    }
}

pub type Result<T> = std::result::Result<T, RegressionError>;

pub(crate) fn invalid_input<T>(msg: impl Into<String>) -> Result<T> {
    Err(RegressionError::InvalidInput(msg.into()))
}

pub(crate) fn invalid_config<T>(msg: impl Into<String>) -> Result<T> {
    Err(RegressionError::InvalidConfig(msg.into()))
}
