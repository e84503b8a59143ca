use std::fmt;

/// One problem found while parsing or validating a configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    /// 1-based line number, `None` when the issue is not tied to a line.
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigIssue {
    pub fn at(line: usize, message: impl Into<String>) -> Self {
        Self { line: Some(line), message: message.into() }
    }

    pub fn general(message: impl Into<String>) -> Self {
        Self { line: None, message: message.into() }
    }
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("grid too small: need at least {required} cells, got {cells}")]
    GridTooSmall { cells: usize, required: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("negative pressure {0} passed to a growth function")]
    NegativePressure(f64),

    #[error("infeasible growth model: {0}")]
    InfeasibleModel(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("negative input: {0}")]
    NegativeInput(String),

    #[error("initial support outside the admissible region: {0}")]
    SupportOutsideDomain(String),

    #[error("support reached the boundary cells at t = {t}; increase grid.L")]
    SupportReachedBoundary { t: f64 },

    #[error("numerical failure at t = {t}: {reason}")]
    NumericalFailure { t: f64, reason: String },

    #[error("Newton iteration did not converge: residual {residual:e} after {iterations} iterations")]
    NewtonDivergence { residual: f64, iterations: usize },

    #[error("configuration error:\n{}", format_issues(.0))]
    Config(Vec<ConfigIssue>),

    #[error("insufficient rows for decay report: need {required}, have {available}")]
    InsufficientRows { required: usize, available: usize },

    #[error("precondition unmet: {0}")]
    Precondition(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn format_issues(issues: &[ConfigIssue]) -> String {
    issues.iter().map(|i| format!("  {i}")).collect::<Vec<_>>().join("\n")
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }

    /// Process exit code for the command-line front end.
    ///
    /// 0 success, 1 config error, 2 infeasible model, 3 numerical failure,
    /// 4 I/O failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InfeasibleModel(_) => 2,
            Error::NumericalFailure { .. }
            | Error::NewtonDivergence { .. }
            | Error::NegativePressure(_)
            | Error::Domain(_) => 3,
            Error::Io { .. } => 4,
            Error::GridTooSmall { .. }
            | Error::InvalidGrid(_)
            | Error::NegativeInput(_)
            | Error::SupportOutsideDomain(_)
            | Error::SupportReachedBoundary { .. }
            | Error::Config(_)
            | Error::InsufficientRows { .. }
            | Error::Precondition(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
