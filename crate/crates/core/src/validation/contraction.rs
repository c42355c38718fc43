use rayon::prelude::*;

use super::{Check, Series, SuiteError, SuiteReport};
use crate::config::ExperimentConfig;
use crate::flux::check_assumptions;
use crate::kinetic::{kinetic_residual, solve_pathwise, SolutionField, SolveOptions, StepOptions, TestFunction};

/// L1 contraction of two solutions under one driver, plus the kinetic
/// residual identity and the flux structure it relies on.
pub fn run_contraction(cfg: &ExperimentConfig) -> Result<SuiteReport, SuiteError> {
    let sc = &cfg.suites.contraction;
    let flux = cfg.flux()?;
    let z = cfg.driver()?;
    let n = flux.n();
    let first = cfg.initial.clone();
    let second = first.shifted(sc.shift, n);
    let grid = cfg.grid_for(&flux, &z, &[&first, &second], cfg.grid.nx)?;
    let u1 = SolutionField::from_fn(&grid, 0.0, |x| first.eval(x));
    let u2 = SolutionField::from_fn(&grid, 0.0, |x| second.eval(x));
    let recording = SolveOptions { step: StepOptions { record_kinetic: true, ..cfg.step_options() } };
    let plain = SolveOptions { step: cfg.step_options() };
    let (s1, s2) = rayon::join(
        || solve_pathwise(&u1, &flux, &z, &grid, cfg.time.horizon, &recording),
        || solve_pathwise(&u2, &flux, &z, &grid, cfg.time.horizon, &plain),
    );
    let (s1, s2) = (s1?, s2?);

    let mut report = SuiteReport::new("contraction", cfg.hash(), cfg.driver.seed);
    let times: Vec<f64> = s1.snapshots.iter().map(|s| s.t).collect();
    let d: Vec<f64> = s1.snapshots.iter().zip(&s2.snapshots).map(|(a, b)| a.l1_distance(b, &grid)).collect();
    let (u_lo, u_hi) = first.range();
    let lip = flux.speed_bound(u_lo.abs().max(u_hi.abs()));
    let slack = sc.slack_factor * grid.dx() * lip;
    let mut worst = f64::NEG_INFINITY;
    for j in 1..d.len() {
        for i in 0..j {
            worst = worst.max((d[j] - d[i]) / (times[j] - times[i]));
        }
    }
    report.metric("dx", grid.dx());
    report.metric("lip", lip);
    report.metric("d_initial", d[0]);
    report.metric("d_final", *d.last().expect("initial snapshot"));
    report.series("distance", Series::new("t", "D", times, d));
    report.check(Check::at_most("max_growth_rate", worst, slack));

    let umax = u_lo.abs().max(u_hi.abs()).max(grid.xi_hi().abs()).max(grid.xi_lo().abs());
    let lo = vec![cfg.grid.bounds[0]; n];
    let hi = vec![cfg.grid.bounds[1]; n];
    let assumptions = check_assumptions(&flux, &lo, &hi, umax, 256, 1e-3);
    report.metric("assumption_a_error", assumptions.max_a_error);
    report.metric("assumption_b_error", assumptions.max_b_error);
    report.metric("assumption_b_at_zero", assumptions.max_b_at_zero);
    report.check(Check::at_most(
        "assumption_error",
        assumptions.max_a_error.max(assumptions.max_b_error).max(assumptions.max_b_at_zero),
        assumptions.tolerance,
    ));

    let ledger = if sc.zero_ledger { s1.ledger.zeroed() } else { s1.ledger.clone() };
    let last = s1.snapshots.len() - 1;
    let terms: Vec<_> = sc
        .residual_targets
        .par_iter()
        .map(|&[y, eta]| {
            let mut yv = vec![0.0; n];
            yv[0] = y;
            let tf = TestFunction::new(cfg.mollifier.epsilon, 0.0, &yv, eta);
            kinetic_residual(&s1, &ledger, &grid, &tf, &flux, &z, 0, last, cfg.time.steps_per_segment)
        })
        .collect::<Result<_, _>>()?;
    let (mut res, mut change) = (0.0, 0.0);
    for (k, t) in terms.iter().enumerate() {
        report.metric(&format!("residual_{k}"), t.residual);
        report.metric(&format!("convolution_change_{k}"), t.at_t - t.at_s);
        res += t.residual;
        change += (t.at_t - t.at_s).abs();
    }
    if !terms.is_empty() {
        let rel = if change > 0.0 { res / change } else { 0.0 };
        report.check(Check::at_most("relative_kinetic_residual", rel, sc.residual_tolerance));
    }
    report.metric("defect_mass", s1.ledger.total_mass);
    report.metric("clamp_residual", s1.ledger.clamp_residual + s2.ledger.clamp_residual);
    Ok(report)
}
