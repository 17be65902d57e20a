use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An operation precondition does not hold for the given inputs.
    /// Distinct from a failed check: the inputs were inadmissible.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Config file could not be parsed.
    #[error("config parse error at line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },

    /// Config parsed but one or more constraints are violated.
    /// Every violation is listed, not just the first.
    #[error("config validation failed:\n  {}", .0.join("\n  "))]
    ConfigValidation(Vec<String>),

    /// NaN/Inf or a singular linear system inside the time stepper.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
