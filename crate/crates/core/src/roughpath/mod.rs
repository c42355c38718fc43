//! Step-2 geometric rough paths over piecewise-linear representatives.

mod brownian;
mod group;
mod lift;
mod pwl;

pub use brownian::brownian_pwl;
pub use group::GroupElement;
pub use lift::{lift_pwl, rho_dist_pwl, GeometricRoughPath};
pub(crate) use pwl::same_time;
pub use pwl::PwlPath;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PathError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("time grid is empty")]
    EmptyGrid,
    #[error("time grid is not strictly increasing at index {index}")]
    NonMonotoneTimes { index: usize },
    #[error("path contains non-finite values")]
    NonFinite,
    #[error("time {time} is not a grid node")]
    NotOnGrid { time: f64 },
    #[error("path is not sampled on a uniform dyadic grid")]
    NotDyadic,
    #[error("dyadic level {requested} exceeds native level {native}")]
    ExceedsResolution { requested: u32, native: u32 },
    #[error("signature level must be 1 or 2, got {0}")]
    InvalidLevel(usize),
    #[error("paths share fewer than two grid nodes")]
    NoSharedNodes,
    #[error("malformed path file: {0}")]
    Format(String),
    #[error("malformed path file: {0}")]
    Csv(#[from] csv::Error),
}

/// Restriction of `path` to the dyadic grid with `2^n` intervals.
pub fn dyadic_approx(path: &PwlPath, n: u32) -> Result<PwlPath, PathError> {
    path.dyadic_approx(n)
}
