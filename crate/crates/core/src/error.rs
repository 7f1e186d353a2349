use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The metric matrix could not be inverted or has nonpositive determinant.
    #[error("singular metric: {0}")]
    SingularMetric(String),

    /// A point or stencil fell outside the coordinate domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// An exact flow was requested at or beyond its singular time.
    #[error("time {t} is at or beyond the singular time {singular_time}")]
    SingularTime { t: f64, singular_time: f64 },

    /// Pointwise positivity of the evolving metric was lost.
    #[error("positivity lost at t = {t} (point {point}, min eigenvalue {min_eigenvalue:e})")]
    PositivityLoss { t: f64, point: usize, min_eigenvalue: f64 },

    /// A caller broke an operation's precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A configuration value is missing or invalid.
    #[error("invalid configuration field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
