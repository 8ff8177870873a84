use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("metropolis sampler did not converge: {0}")]
    NonConvergence(String),

    #[error("sampling budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("density is not normalized: total mass {0}")]
    NotNormalized(f64),

    #[error("every cover center has zero estimated volume for word {0}")]
    AllEmpty(String),

    #[error("no closed-form volume for this zone")]
    NoExactRoute,

    #[error("moment table has no value for word {0}")]
    MissingMoment(String),

    #[error("zone is not bounded and has no per-word moment bound")]
    Unbounded,

    #[error("config error: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn mismatch(msg: impl Into<String>) -> Error {
    Error::DimensionMismatch(msg.into())
}

impl Error {
    /// Attributes an error to a pipeline stage.
    pub fn at(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |e| Error::Stage {
            stage,
            source: Box::new(e),
        }
    }

    /// The error beneath any stage attribution.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}
