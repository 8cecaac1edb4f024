use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The input did not parse. Line and column are 1-based when known.
    #[error("parse error in {what} at line {line}, column {column}: {message}")]
    Parse {
        what: String,
        line: usize,
        column: usize,
        message: String,
    },

    /// A data invariant does not hold; `field` names the offending field.
    #[error("invalid instance: {field} {reason}")]
    Invalid { field: String, reason: String },

    #[error("no plant open")]
    NoPlantOpen,

    #[error("design/instance mismatch: {0}")]
    DesignMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("duality violation: primal {primal} vs dual {dual}")]
    DualityViolation { primal: f64, dual: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("master problem infeasible: {0}")]
    MasterInfeasible(String),

    #[error("L-shaped iteration cap of {cap} exceeded (lb {lb}, ub {ub})")]
    IterationCap {
        cap: usize,
        lb: f64,
        ub: f64,
        lb_trace: Vec<f64>,
        ub_trace: Vec<f64>,
    },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(what: impl Into<String>, err: serde_json::Error) -> Self {
        Error::Parse {
            what: what.into(),
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }

    /// True for errors caused by bad user input rather than by the solver.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Invalid { .. }
                | Error::NoPlantOpen
                | Error::DesignMismatch(_)
                | Error::Config(_)
                | Error::Io { .. }
                | Error::Csv { .. }
        )
    }
}
