use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GbbError {
    #[error("invalid box dimensions (w={w}, h={h}); both must be positive and finite")]
    InvalidDimensions { w: f64, h: f64 },

    #[error("covariance is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("principal variances must be positive (a'={a_prime}, b'={b_prime})")]
    NonPositiveVariance { a_prime: f64, b_prime: f64 },

    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),

    #[error("{name} out of range: {value} (expected {expected})")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("axis-aligned input required, got c={c}")]
    NotAxisAligned { c: f64 },

    #[error("shape covers no raster cell at cell_size={cell_size}; reduce cell_size")]
    EmptyRaster { cell_size: f64 },
}

pub type Result<T> = std::result::Result<T, GbbError>;
