use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes or lengths that violate an operation's preconditions.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numerical failure in {context} at iteration {iteration}")]
    Numerical { context: String, iteration: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("step size too large: {0}")]
    StepSize(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn numerical(context: impl Into<String>, iteration: usize) -> Self {
        Error::Numerical {
            context: context.into(),
            iteration,
        }
    }
}
