use rayon::prelude::*;

use super::{ls_slope, Check, Series, SuiteError, SuiteReport};
use crate::config::{ConfigError, ExperimentConfig};
use crate::flux::FluxModel;
use crate::kinetic::{solve_pathwise, Grid, SolutionField, SolveOptions};
use crate::roughpath::brownian_pwl;

/// `‖a − b‖₁` for fields on nested grids over the same box, `fine` refining `coarse`.
fn nested_l1_distance(coarse: (&SolutionField, &Grid), fine: (&SolutionField, &Grid)) -> f64 {
    let (uc, gc) = coarse;
    let (uf, gf) = fine;
    let n = gf.n();
    (0..gf.cells())
        .map(|c| {
            let x = gf.center(c);
            let k = gc.locate(&x[..n]).expect("nested grids share the box");
            (uf.u[c] - uc.u[k]).abs()
        })
        .sum::<f64>()
        * gf.cell_volume()
}

/// Solutions driven by successive dyadic approximations of one Brownian
/// sample form a Cauchy sequence.
pub fn run_convergence(cfg: &ExperimentConfig) -> Result<SuiteReport, SuiteError> {
    let sc = &cfg.suites.convergence;
    let flux = match &sc.flux {
        Some(name) => FluxModel::builtin(name, &Default::default()).map_err(ConfigError::from)?,
        None => cfg.flux()?,
    };
    let base = brownian_pwl(sc.seed, flux.m(), sc.native_level, cfg.time.horizon);
    let mut levels = sc.levels.clone();
    levels.sort_unstable();
    levels.dedup();
    let finals: Vec<(SolutionField, Grid)> = levels
        .par_iter()
        .map(|&n| {
            let nx = if sc.refine { sc.nx << (n - levels[0]) } else { sc.nx };
            let grid = cfg.grid_for(&flux, &base, &[&cfg.initial], nx)?;
            let u0 = cfg.initial_field(&grid);
            let z = base.dyadic_approx(n)?;
            let sol =
                solve_pathwise(&u0, &flux, &z, &grid, cfg.time.horizon, &SolveOptions { step: cfg.step_options() })?;
            Ok((sol.last().clone(), grid))
        })
        .collect::<Result<_, SuiteError>>()?;
    let gaps: Vec<f64> =
        finals.windows(2).map(|w| nested_l1_distance((&w[0].0, &w[0].1), (&w[1].0, &w[1].1))).collect();
    let at: Vec<f64> = levels[..levels.len() - 1].iter().map(|&n| n as f64).collect();

    let mut report = SuiteReport::new("convergence", cfg.hash(), sc.seed);
    let tracked: Vec<(f64, f64)> =
        at.iter().copied().zip(gaps.iter().copied()).filter(|(n, _)| *n >= sc.monotone_from as f64).collect();
    if tracked.len() < 2 {
        return Err(SuiteError::Precondition("need two gaps at or above monotone_from".into()));
    }
    let worst_ratio = tracked.windows(2).map(|w| w[1].1 / w[0].1).fold(0.0, f64::max);
    let logs: Vec<f64> = gaps.iter().map(|g| g.max(f64::MIN_POSITIVE).log2()).collect();
    report.metric("empirical_rate", -ls_slope(&at, &logs));
    report.metric("finest_nx", finals[finals.len() - 1].1.nx() as f64);
    report.series("gap", Series::new("level", "gap", at, gaps));
    // A ratio below 1 for every consecutive pair is strict monotone decrease.
    report.check(Check::at_most("max_consecutive_gap_ratio", worst_ratio, 1.0));
    let (first, last) = (tracked[0].1, tracked[tracked.len() - 1].1);
    report.check(Check::at_most("final_to_first_gap", last / first, sc.final_ratio));
    Ok(report)
}
