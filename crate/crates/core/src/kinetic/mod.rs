//! Kinetic formulation: χ-fields, the pathwise finite-volume solver with its
//! entropy-defect ledger, transported test functions and the residual of the
//! integrated kinetic identity.

mod field;
mod front;
mod grid;
mod mollifier;
mod scheme;
mod solver;
mod transport;

pub use field::{chi, chi_cell_integral, chi_of, reconstruct_u, KineticField, SolutionField};
pub use front::{front_tracking, FrontState};
pub use grid::Grid;
pub use mollifier::{Bump, TestFunction};
pub use scheme::{fv_step, Scheme, StepOptions, StepOutput};
pub use solver::{solve_pathwise, xi_excursion, DefectLedger, KineticMass, LedgerStep, Solution, SolveOptions};
pub use transport::{
    convolve_along_char, kinetic_residual, transport_test_function, ConvolutionRoute, ResidualTerms, TransportedTest,
};

use thiserror::Error;

use crate::characteristics::FlowError;
use crate::roughpath::PathError;

#[derive(Debug, Error)]
pub enum KineticError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("u = {value} in cell {cell} lies outside the ξ-range [{lo}, {hi}]")]
    XiRangeTooSmall { value: f64, cell: usize, lo: f64, hi: f64 },
    #[error("solution reached the boundary (cell {cell}, u = {value:e}) at t = {t}; enlarge the box")]
    DomainTooSmall { cell: usize, value: f64, t: f64 },
    #[error("CFL condition still violated after {substeps} substeps")]
    CflViolation { substeps: usize },
    #[error("solution became non-finite by t = {t}")]
    NonFinite { t: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{0} is not a snapshot index")]
    NotASnapshot(usize),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Path(#[from] PathError),
}
