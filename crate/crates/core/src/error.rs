use thiserror::Error;

/// Errors raised by the dose-finding engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A value outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inputs that break a type invariant (lengths, orderings, counts).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A rule was invoked in a state its contract forbids.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Posterior mode search did not converge.
    #[error(
        "posterior mode search failed after {iterations} iterations \
         (theta = [{:.6}, {:.6}], |grad| = {grad_norm:.3e}): {reason}",
        theta[0], theta[1]
    )]
    NonConvergence {
        iterations: usize,
        theta: [f64; 2],
        grad_norm: f64,
        reason: String,
    },

    /// Any other numerical breakdown (zero normalizing mass, non-finite values).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Random scenario generation exhausted its attempt budget.
    #[error("scenario generation failed: {0}")]
    Generation(String),

    /// A simulated trial failed; `context` identifies the replicate and its history.
    #[error("{context}: {source}")]
    Simulation {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for failures of the numerical engine rather than bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NonConvergence { .. } | Error::Numerical(_) | Error::Generation(_) => true,
            Error::Simulation { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
