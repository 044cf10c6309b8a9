use thiserror::Error;

/// Errors shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("box extends outside the grid domain on axis {axis} ({lo}..{hi} vs domain {dom_lo}..{dom_hi})")]
    BoxOutsideDomain {
        axis: usize,
        lo: f64,
        hi: f64,
        dom_lo: f64,
        dom_hi: f64,
    },

    #[error("box has nonpositive volume")]
    DegenerateBox,

    #[error("weight must be strictly positive (cell {index} holds {value})")]
    NonpositiveWeight { index: usize, value: f64 },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("no rectangle of the requested family fits inside the grid domain")]
    EmptyFamily,

    #[error("no grid cell is covered by any family rectangle")]
    UncoveredGrid,

    #[error("exponent out of range: {msg}")]
    ExponentRange { msg: String },

    #[error("series iterates do not contract geometrically (norm ratio {ratio} at step {step})")]
    DivergentSeries { step: usize, ratio: f64 },

    #[error("operator norm bound must be positive, got {0}")]
    NonpositiveCBound(f64),

    #[error("weighted norm of the integrand vanishes")]
    ZeroIntegrand,

    #[error("no reverse Holder exponent passed on the family for any tested constant")]
    RhiSearchFailed,

    #[error("invalid parameter: {0}")]
    BadParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn bad_param(msg: impl Into<String>) -> Self {
        Error::BadParameter(msg.into())
    }
}
