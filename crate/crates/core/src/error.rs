use thiserror::Error;

/// Errors raised by the bound, design, and solver layers.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the documented domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Step (i) of the trial design has no feasible solution for the
    /// requested tolerances (m too small or the probability band too tight).
    #[error("infeasible design: {0}")]
    InfeasibleDesign(String),

    /// A search exceeded its configured resource budget.
    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    /// Degenerate problem input (e.g. an empty sample set).
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A numerical subroutine failed beyond tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The convex solver did not converge within its iteration cap.
    #[error("solver did not converge: {message} (best objective {best_objective}, residual {residual})")]
    Nonconvergence {
        message: String,
        best_objective: f64,
        residual: f64,
    },

    /// Solver failure inside a trial, tagged with the trial index.
    #[error("trial {index} failed: {source}")]
    Trial {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn infeasible(msg: impl Into<String>) -> Self {
        Error::InfeasibleDesign(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
