use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("exterior query: point {0:?} is not strictly inside the domain")]
    ExteriorQuery(Vec<f64>),

    #[error("singular query: evaluation point coincides with the ball center")]
    SingularQuery,

    #[error("unsupported dimension {0} (expected 2 or 3)")]
    UnsupportedDimension(usize),

    #[error("degenerate domain: acceptance rate {rate:.3e} after {candidates} candidates")]
    DegenerateDomain { candidates: u64, rate: f64 },

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "majorant violated: absorption {absorption:.6e} exceeds sigma_bar {sigma_bar:.6e} at {point:?}"
    )]
    MajorantViolated {
        point: Vec<f64>,
        absorption: f64,
        sigma_bar: f64,
    },

    #[error("cache shape mismatch: {0}")]
    CacheShapeMismatch(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("count mismatch: {predictions} predictions vs {targets} targets")]
    CountMismatch { predictions: usize, targets: usize },

    #[error("training diverged at step {step}: loss {loss:.3e}")]
    Diverged { step: usize, loss: f64 },

    #[error("isolated mask: masked pixels have no known neighbours")]
    IsolatedMask,

    #[error("stencil out of bounds at pixel ({x}, {y})")]
    StencilOutOfBounds { x: usize, y: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics themselves (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::MajorantViolated { .. } | Error::Diverged { .. } | Error::SingularQuery
        )
    }
}
