use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("overflow evaluating {0}")]
    Overflow(String),

    #[error("integral diverges: {0}")]
    Divergence(String),

    /// The Hopf-Lax infimum is not finite for this time step.
    #[error("infimum is -inf: t = {t} exceeds the admissible bound {bound}")]
    InfimumUnbounded { t: f64, bound: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// A deficit came out negative beyond quadrature noise.
    #[error("negative deficit {0:e} (below clamp tolerance)")]
    NegativeDeficit(f64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
