use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The scenario document does not match the schema.
    #[error("parse error in field `{field}`: {message}")]
    Parse { field: String, message: String },

    /// A value parsed but breaks a domain rule.
    #[error("validation error ({rule}): {message}")]
    Validation { rule: &'static str, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("action {action} out of range 0..={max}")]
    Action { action: usize, max: usize },

    #[error("state error: {0}")]
    State(String),

    #[error("endpoint {which} at cell ({i}, {j}) is below the SINR threshold")]
    InfeasibleEndpoint { which: &'static str, i: usize, j: usize },

    #[error("no SINR-feasible route for leg {leg}")]
    Unreachable { leg: String },

    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("non-finite value in {0}")]
    Numeric(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn validation(rule: &'static str, message: impl Into<String>) -> Self {
        Error::Validation {
            rule,
            message: message.into(),
        }
    }

    pub(crate) fn shape(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::Shape {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }
}
