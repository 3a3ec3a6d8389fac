use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("decay rate `{name}` must be positive and finite, got {value}")]
    InvalidRate { name: &'static str, value: f64 },

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error(
        "time grid truncates probability mass {mass:.3e} (limit {limit:.0e}); \
         extend t_max or set the grid override"
    )]
    GridTruncation { mass: f64, limit: f64 },

    #[error("amplitude is not normalized: sum |psi|^2 dt^n = {norm}")]
    NotNormalized { norm: f64 },

    #[error("matrix is not a valid reduced state: {0}")]
    InvalidState(String),

    #[error("negative eigenvalue {value:.3e} below clipping threshold {threshold:.0e}")]
    NegativeEigenvalue { value: f64, threshold: f64 },

    #[error("dense decomposition failed: {0}")]
    Decomposition(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("unsupported photon number {0}: cascades of 2 or 3 photons are supported")]
    PhotonNumber(usize),

    #[error("parameter `{name}` out of range: {value} ({expected})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("state has zero emission probability")]
    ZeroEmission,

    #[error("detection window {0}")]
    InvalidWindow(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Checks `lo <= value <= hi` and finiteness.
pub(crate) fn check_range(
    name: &'static str,
    value: f64,
    lo: f64,
    hi: f64,
    expected: &'static str,
) -> Result<()> {
    if value.is_finite() && value >= lo && value <= hi {
        Ok(())
    } else {
        Err(Error::OutOfRange { name, value, expected })
    }
}
