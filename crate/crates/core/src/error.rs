use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid netlist: {0}")]
    InvalidNetlist(String),

    /// A node has no conductive path to ground.
    #[error("floating subcircuit: node `{node}` has no conductive path to ground")]
    FloatingNode { node: String },

    /// The discretized system could not be factorized.
    #[error("singular system at t = {t:.9} s: no pivot for unknown `{unknown}`")]
    Singular { unknown: String, t: f64 },

    #[error("switch-state iteration did not converge at t = {t:.9} s after {iterations} solves ({detail})")]
    SwitchIteration {
        t: f64,
        iterations: usize,
        detail: String,
    },

    #[error("invalid value for `{field}`: {reason}")]
    InvalidSpec { field: String, reason: String },

    #[error("analysis: {0}")]
    Analysis(String),

    #[error("csv row {row}: {message}")]
    CsvRow { row: u64, message: String },

    #[error("config `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::InvalidSpec {
        field: field.into(),
        reason: reason.into(),
    }
}
