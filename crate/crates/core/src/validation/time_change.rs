use rayon::prelude::*;

use super::SuiteError;
use crate::flux::FluxModel;
use crate::kinetic::{solve_pathwise, Grid, SolutionField, SolveOptions, StepOptions};
use crate::roughpath::{brownian_pwl, PwlPath};

/// Entropy solution of `u_t + (u²/2)_x = 0` at time `tau ≥ 0` from
/// `u0 = 1` on `[-½, ½]`: a rarefaction behind a shock, merging at `tau = 2`.
pub fn burgers_box_exact(x: f64, tau: f64) -> f64 {
    if tau <= 0.0 {
        return if (-0.5..0.5).contains(&x) { 1.0 } else { 0.0 };
    }
    let fan_end = -0.5 + tau;
    if tau <= 2.0 {
        let shock = 0.5 + 0.5 * tau;
        if x > -0.5 && x < fan_end {
            (x + 0.5) / tau
        } else if x >= fan_end && x < shock {
            1.0
        } else {
            0.0
        }
    } else {
        let shock = -0.5 + (2.0 * tau).sqrt();
        if x > -0.5 && x < shock {
            (x + 0.5) / tau
        } else {
            0.0
        }
    }
}

/// Non-decreasing path `t ↦ Σ_{s_k ≤ t} |Δ b_k|` built from the increments of
/// a dyadic Brownian sample.
pub fn monotone_driver(seed: u64, level: u32, horizon: f64) -> PwlPath {
    let b = brownian_pwl(seed, 1, level, horizon);
    let mut acc = 0.0;
    let pts: Vec<Vec<f64>> = (0..b.len())
        .map(|k| {
            if k > 0 {
                acc += b.increment(k - 1)[0].abs();
            }
            vec![acc]
        })
        .collect();
    PwlPath::new(b.times().to_vec(), pts).expect("valid path")
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeChangeResult {
    pub nx: usize,
    pub dx: f64,
    pub error: f64,
    /// `5 Δx ‖u0‖_BV`.
    pub bound: f64,
}

/// `‖u_pathwise(T) − u_det(z(T) − z(0))‖₁` for x-independent Burgers from the
/// unit box under `z`, with the exact solution averaged over each cell.
pub fn time_change_oracle(
    z: &PwlPath,
    nx: &[usize],
    x_box: [f64; 2],
    cfl: f64,
) -> Result<Vec<TimeChangeResult>, SuiteError> {
    let flux = FluxModel::builtin("burgers_xindep", &Default::default()).map_err(crate::config::ConfigError::from)?;
    let tau = z.point(z.len() - 1)[0] - z.point(0)[0];
    nx.par_iter()
        .map(|&n| {
            let grid = Grid::new(1, n, x_box[0], x_box[1], 16, -0.1, 1.1)?;
            let avg = |c: usize, t: f64| {
                let x = grid.center(c)[0];
                let sub = 16;
                (0..sub)
                    .map(|k| burgers_box_exact(x + grid.dx() * ((k as f64 + 0.5) / sub as f64 - 0.5), t))
                    .sum::<f64>()
                    / sub as f64
            };
            let u0 = SolutionField { t: z.start_time(), u: (0..grid.cells()).map(|c| avg(c, 0.0)).collect() };
            let opts = SolveOptions { step: StepOptions { cfl, ..StepOptions::default() } };
            let sol = solve_pathwise(&u0, &flux, z, &grid, z.end_time(), &opts)?;
            let exact: Vec<f64> = (0..grid.cells()).map(|c| avg(c, tau)).collect();
            let error = sol.last().u.iter().zip(&exact).map(|(a, b)| (a - b).abs()).sum::<f64>() * grid.dx();
            Ok(TimeChangeResult { nx: n, dx: grid.dx(), error, bound: 5.0 * grid.dx() * 2.0 })
        })
        .collect()
}
