use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is numerically singular at pivot {pivot} (|pivot| = {magnitude:e})")]
    Singular { pivot: usize, magnitude: f64 },

    #[error(
        "kernel dimension is {dimension}, expected 1; the steady state is not unique \
         (add a small mixing or dephasing rate to connect the level sets)"
    )]
    Degenerate { dimension: usize },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("no consistent rotating frame: {0}")]
    Frame(String),

    #[error("stiff problem: {0}")]
    Stiffness(String),

    #[error("lorentzian fit failed after {iterations} iterations (rms residual {rms:e})")]
    Fit { iterations: usize, rms: f64 },

    #[error("ambiguous data: {extrema} significant extrema found, expected one")]
    Ambiguous { extrema: usize },

    #[error("phase calibration failed: {0}")]
    Calibration(String),

    #[error("scan failed at {axis} = {value}: {source}")]
    Scan {
        axis: String,
        value: f64,
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
