use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("treatment arm {arm} has no units")]
    EmptyArm { arm: usize },

    #[error("index {index} out of range (size {len})")]
    Index { index: usize, len: usize },

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("propensity fit did not converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    NotConverged { iterations: usize, gradient_norm: f64 },

    #[error("treatment takes a single value; cannot fit a propensity model")]
    SingleClass,

    #[error("non-finite subgradient at iteration {iteration}")]
    NonFiniteGradient { iteration: usize },

    #[error("linear program: {0}")]
    Solver(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("missing data: {0}")]
    Missing(&'static str),

    #[error("at gamma = {gamma}: {source}")]
    AtGamma {
        gamma: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("refit without covariate {column}: {source}")]
    Audit {
        column: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn at_gamma(self, gamma: f64) -> Self {
        Error::AtGamma {
            gamma,
            source: Box::new(self),
        }
    }
}
