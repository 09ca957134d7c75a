use thiserror::Error;

/// Errors raised by the force-law, configuration, solver and diagnostic layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquilibError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("force law is not integrable: {0}")]
    NotIntegrable(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid pins: {0}")]
    InvalidPins(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("infeasible bracket: {0}")]
    InfeasibleBracket(String),

    #[error("insufficient equations: {equations} equations for {unknowns} unknowns")]
    InsufficientEquations { equations: usize, unknowns: usize },

    #[error("postcondition violated: {0}")]
    Postcondition(String),
}

impl EquilibError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Self::Domain(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Self::InvalidInput(msg.into())
    }

    /// Short machine-readable tag, used by the CLI error object.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Domain(_) => "domain",
            Self::NotIntegrable(_) => "not_integrable",
            Self::InvalidInput(_) => "invalid_input",
            Self::InvalidPins(_) => "invalid_pins",
            Self::NoConvergence { .. } => "no_convergence",
            Self::InfeasibleBracket(_) => "infeasible_bracket",
            Self::InsufficientEquations { .. } => "insufficient_equations",
            Self::Postcondition(_) => "postcondition",
        }
    }
}

pub type Result<T> = std::result::Result<T, EquilibError>;
