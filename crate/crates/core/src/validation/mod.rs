//! Desk-scale experiment suites with machine-readable verdicts.

mod appendix_b;
mod bounds;
mod cancellation;
mod contraction;
mod convergence;
mod flow_stability;
mod report;
mod time_change;

use std::fmt;
use std::str::FromStr;

pub use appendix_b::{error_functional, run_appendix_b};
pub use bounds::run_bounds;
pub use cancellation::run_cancellation;
pub use contraction::run_contraction;
pub use convergence::run_convergence;
pub use flow_stability::run_flow_stability;
pub use report::{Check, Relation, Series, SuiteReport};
pub use time_change::{burgers_box_exact, monotone_driver, time_change_oracle, TimeChangeResult};

use crate::characteristics::FlowError;
use crate::config::{ConfigError, ExperimentConfig};
use crate::kinetic::KineticError;
use crate::roughpath::PathError;

#[derive(Debug, thiserror::Error)]
pub enum SuiteError {
    #[error("configuration: {0}")]
    Config(#[from] ConfigError),
    #[error("solver: {0}")]
    Solver(#[from] KineticError),
    #[error("flow: {0}")]
    Flow(#[from] FlowError),
    #[error("path: {0}")]
    Path(#[from] PathError),
    /// A precondition of the experiment does not hold for this configuration.
    #[error("precondition: {0}")]
    Precondition(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Suite {
    Contraction,
    Bounds,
    Cancellation,
    Convergence,
    AppendixB,
    FlowStability,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Contraction,
        Suite::Bounds,
        Suite::Cancellation,
        Suite::Convergence,
        Suite::AppendixB,
        Suite::FlowStability,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Contraction => "contraction",
            Suite::Bounds => "bounds",
            Suite::Cancellation => "cancellation",
            Suite::Convergence => "convergence",
            Suite::AppendixB => "appendixB",
            Suite::FlowStability => "flowstability",
        }
    }

    pub fn run(self, cfg: &ExperimentConfig) -> Result<SuiteReport, SuiteError> {
        let start = std::time::Instant::now();
        let mut report = match self {
            Suite::Contraction => run_contraction(cfg),
            Suite::Bounds => run_bounds(cfg),
            Suite::Cancellation => run_cancellation(cfg),
            Suite::Convergence => run_convergence(cfg),
            Suite::AppendixB => run_appendix_b(cfg),
            Suite::FlowStability => run_flow_stability(cfg),
        }?;
        report.elapsed = start.elapsed();
        Ok(report)
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
#[error("unknown suite `{0}`; expected one of contraction, bounds, cancellation, convergence, appendixB, flowstability, all")]
pub struct UnknownSuite(pub String);

/// Parses a suite name, with `all` expanding to every suite.
pub fn parse_suites(name: &str) -> Result<Vec<Suite>, UnknownSuite> {
    if name == "all" {
        return Ok(Suite::ALL.to_vec());
    }
    name.parse().map(|s| vec![s])
}

impl FromStr for Suite {
    type Err = UnknownSuite;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| UnknownSuite(s.to_string()))
    }
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}
