use rayon::prelude::*;

use super::{Check, Series, SuiteError, SuiteReport};
use crate::characteristics::{forward_flow, CharState, FlowOptions};
use crate::config::ExperimentConfig;
use crate::flux::FluxModel;
use crate::kinetic::{solve_pathwise, SolveOptions};
use crate::roughpath::PwlPath;

/// Smallest forward difference of `x ↦ Y_{(0, x, u0(x))}(T/2)` on a fine
/// sample of the box: positive iff characteristics have not crossed by the
/// peak of the tent.
pub fn min_characteristic_gap(
    cfg: &ExperimentConfig,
    flux: &FluxModel,
    z: &PwlPath,
    samples: usize,
) -> Result<f64, SuiteError> {
    let [lo, hi] = cfg.grid.bounds;
    let opts = FlowOptions::with_steps(cfg.time.steps_per_segment);
    let peak = 0.5 * cfg.time.horizon;
    let ys: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let x = lo + (hi - lo) * (k as f64 + 0.5) / samples as f64;
            let s = CharState::new(&[x], cfg.initial.eval(&[x]));
            Ok(forward_flow(flux, z, 0.0, &s, peak, &opts)?.state.y[0])
        })
        .collect::<Result<_, SuiteError>>()?;
    Ok(ys.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min))
}

fn distances(cfg: &ExperimentConfig, flux: &FluxModel, z: &PwlPath, nx: &[usize]) -> Result<Vec<f64>, SuiteError> {
    nx.par_iter()
        .map(|&n| {
            let grid = cfg.grid_for(flux, z, &[&cfg.initial], n)?;
            let u0 = cfg.initial_field(&grid);
            let sol =
                solve_pathwise(&u0, flux, z, &grid, cfg.time.horizon, &SolveOptions { step: cfg.step_options() })?;
            Ok(sol.last().l1_distance(&u0, &grid))
        })
        .collect()
}

/// A tent driver that climbs to `h` and returns: before shocks the solution
/// returns to `u0`, after shocks it does not.
pub fn run_cancellation(cfg: &ExperimentConfig) -> Result<SuiteReport, SuiteError> {
    let sc = &cfg.suites.cancellation;
    let flux = cfg.flux()?;
    if flux.n() != 1 || flux.m() != 1 {
        return Err(SuiteError::Precondition("cancellation needs N = M = 1".into()));
    }
    let mut report = SuiteReport::new("cancellation", cfg.hash(), cfg.driver.seed);
    let segs = cfg.driver.segments;
    let pre = PwlPath::tent(&[sc.pre_height], cfg.time.horizon, segs)?;
    let post = PwlPath::tent(&[sc.post_height], cfg.time.horizon, segs)?;
    let gap_pre = min_characteristic_gap(cfg, &flux, &pre, 4000)?;
    let gap_post = min_characteristic_gap(cfg, &flux, &post, 4000)?;
    report.metric("pre_min_characteristic_gap", gap_pre);
    report.metric("post_min_characteristic_gap", gap_post);
    if gap_pre <= 0.0 {
        return Err(SuiteError::Precondition(format!(
            "characteristics cross before the tent peak at height {}",
            sc.pre_height
        )));
    }

    let mut nx = sc.nx.clone();
    nx.sort_unstable();
    let finest = *nx.last().expect("validated");
    let (pre_d, post_d) = rayon::join(|| distances(cfg, &flux, &pre, &nx), || distances(cfg, &flux, &post, &[finest]));
    let (pre_d, post_d) = (pre_d?, post_d?);
    let xs: Vec<f64> = nx.iter().map(|&n| n as f64).collect();
    let min_order = nx
        .windows(2)
        .zip(pre_d.windows(2))
        .map(|(n, d)| (d[0] / d[1]).ln() / (n[1] as f64 / n[0] as f64).ln())
        .fold(f64::INFINITY, f64::min);
    let pre_finest = *pre_d.last().expect("nonempty");
    report.series("pre_shock_distance", Series::new("nx", "distance", xs, pre_d));
    report.metric("post_shock_distance", post_d[0]);
    report.check(Check::at_least("observed_order", min_order, sc.min_order));
    report.check(Check::at_least("post_to_pre_ratio", post_d[0] / pre_finest, sc.control_factor));
    Ok(report)
}
