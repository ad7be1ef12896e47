use thiserror::Error;

/// Errors raised by validation, numerics, fitting and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Invalid(String),

    #[error("unknown species '{0}'")]
    UnknownSpecies(String),

    #[error("non-finite result in {0}")]
    NonFinite(&'static str),

    #[error("quadrature exceeded {0} subintervals")]
    QuadratureLimit(usize),

    #[error("degenerate outcome: P0 = {p0} with nonzero derivative")]
    DegenerateOutcome { p0: f64 },

    #[error("integration would need {needed} steps (limit {limit})")]
    StepOverflow { needed: u64, limit: u64 },

    #[error("empty grid: {0}")]
    EmptyGrid(&'static str),

    #[error("empty feasible region: {0}")]
    EmptyRegion(String),

    #[error("abscissa is not uniformly spaced (relative deviation {0:.3e}); resample onto a uniform grid first")]
    NonUniform(f64),

    #[error("fit did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("rank-deficient normal equations")]
    RankDeficient,

    #[error("need at least {needed} replicas, got {got}")]
    TooFewReplicas { needed: usize, got: usize },

    #[error("config line {line}, column {column}: {message}")]
    Config {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
