//! Crate-wide error and validation-report types.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Alternating-projection loop hit the sweep cap before reaching the
    /// requested feasibility tolerance.
    #[error("intersection projection did not converge within {sweeps} sweeps (residual {residual:.3e})")]
    ProjectionConvergence { sweeps: usize, residual: f64 },

    #[error("set is unbounded: {0}")]
    UnboundedSet(String),

    #[error("intersection has empty interior: {0}")]
    EmptyInterior(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("learning metric is not strongly convex: {0}")]
    NotStronglyConvex(String),

    #[error("reference solver failed: {0}")]
    OracleFailure(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("at iteration {k}: {source}")]
    AtIteration {
        k: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Attach the iteration index at which a component error surfaced.
    pub fn at_iteration(self, k: u64) -> Error {
        Error::AtIteration {
            k,
            source: Box::new(self),
        }
    }

    /// Stable class name, used as the process exit hint by the CLI.
    pub fn class(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::Precondition(_) => "precondition-violation",
            Error::ProjectionConvergence { .. } => "convergence-failure",
            Error::UnboundedSet(_) => "unbounded-set",
            Error::EmptyInterior(_) => "infeasible-interior",
            Error::Unsupported(_) => "unsupported-feature",
            Error::NotStronglyConvex(_) => "not-strongly-convex",
            Error::OracleFailure(_) => "oracle-failure",
            Error::Config(_) => "config-error",
            Error::AtIteration { source, .. } => source.class(),
            Error::Io(_) => "io-error",
        }
    }
}

/// One violated invariant, with a short stable code and a human message.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub code: &'static str,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}] {}", self.code, self.message)
    }
}

/// Outcome of a structural validation; empty iff every invariant holds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, code: &'static str, message: impl Into<String>) {
        self.violations.push(Violation {
            code,
            message: message.into(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn contains(&self, code: &str) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    /// Turn a non-empty report into an error with the given context prefix.
    pub fn into_result(self, context: &str) -> Result<()> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("{context}: {self}")))
        }
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}
