use thiserror::Error;

/// Errors raised by the collision, diagnostics and evolution routines.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter set violates one of its named invariants.
    #[error("invalid parameters: {invariant}: {detail}")]
    InvalidParameter {
        invariant: &'static str,
        detail: String,
    },

    #[error("sigma must be a unit vector (|sigma| = {norm})")]
    NonUnitSigma { norm: f64 },

    #[error("non-finite velocity component ({x}, {y})")]
    NonFiniteVelocity { x: f64, y: f64 },

    #[error("kernel has no pointwise density; use the reduced circle form")]
    NoPointwiseDensity,

    #[error("kernel combination not supported: {0}")]
    UnsupportedKernel(String),

    /// log f is needed at a point where the density vanishes.
    #[error("density vanishes at ({x}, {y}) where the integrand needs log f; set a positivity floor")]
    ZeroDensity { x: f64, y: f64 },

    #[error("grid spacing {spacing} too coarse for feature width {feature} (need spacing <= {limit})")]
    GridTooCoarse {
        spacing: f64,
        feature: f64,
        limit: f64,
    },

    #[error("time step too large: value {value} at node ({i}, {j}) fell below -{floor}")]
    StepUndershoot {
        i: usize,
        j: usize,
        value: f64,
        floor: f64,
    },

    #[error("stability guard failed: dt * max loss rate = {product} > {limit}")]
    Unstable { product: f64, limit: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("no c in (1e-8, 1] makes Q positive on the sqrt(2) ring")]
    NoAdmissibleC,

    #[error("scaling fit: {0}")]
    Fit(String),

    #[error("qualitative region map violated: {0}")]
    RegionMap(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(invariant: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidParameter {
            invariant,
            detail: detail.into(),
        }
    }

    /// True for errors caused by bad input rather than by the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::Json(_)
                | Error::UnsupportedKernel(_)
                | Error::NoPointwiseDensity
                | Error::GridTooCoarse { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
