use thiserror::Error;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter block violated one of its invariants.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter {
        name: &'static str,
        reason: &'static str,
    },

    /// Adaptive quadrature ran out of subdivisions before meeting the
    /// requested tolerance.
    #[error(
        "quadrature did not converge: estimated error {error_estimate:e} exceeds target {target:e}"
    )]
    QuadratureNotConverged { error_estimate: f64, target: f64 },

    /// A cell index in a pair list lies outside the grid.
    #[error("cell ({pixel_x}, {pixel_y}, bin {bin}) is outside the grid")]
    CellOutOfRange {
        pixel_x: usize,
        pixel_y: usize,
        bin: usize,
    },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: &'static str) -> Error {
    Error::InvalidParameter { name, reason }
}
