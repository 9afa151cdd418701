use thiserror::Error;

/// Crate-wide error type. CLI exit codes are derived from the variant class:
/// configuration/validation problems map to 1, runtime instability to 2,
/// I/O and serialization to 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("IK singularity: end-effector within {eps} m of the gear axis")]
    IkSingularity { eps: f64 },

    #[error("filter design error: {0}")]
    FilterDesign(String),

    #[error("signal length error: {0}")]
    SignalLength(String),

    #[error("segmentation error: {0}")]
    Segmentation(String),

    #[error("normalization error: {0}")]
    Normalization(String),

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("simulation unstable at t = {t:.6} s")]
    Unstable { t: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
