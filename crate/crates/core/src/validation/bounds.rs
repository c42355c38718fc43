use rayon::prelude::*;

use super::{ls_slope, Check, Series, SuiteError, SuiteReport};
use crate::config::ExperimentConfig;
use crate::flux::{FluxModel, Profile};
use crate::kinetic::{solve_pathwise, Grid, Solution, SolveOptions};
use crate::roughpath::{brownian_pwl, PwlPath};

struct LevelRun {
    level: u32,
    tv: f64,
    l1_excess: f64,
    mhat: f64,
    naive: f64,
}

/// `∫_0^T ∫ |b(x, ξ)·ż| |χ(ξ, u)| dξ dx dt / ‖u0‖₁`, the source term of the
/// classical mass bound, with `u` frozen at the start of each piece.
fn naive_constant(sol: &Solution, flux: &FluxModel, z: &PwlPath, grid: &Grid) -> f64 {
    let l1 = sol.snapshots[0].l1(grid);
    if l1 == 0.0 {
        return 0.0;
    }
    let n = grid.n();
    let mut total = 0.0;
    for (k, (_, _, inc)) in z.pieces(z.start_time(), z.end_time()).into_iter().enumerate() {
        let u = &sol.snapshots[k].u;
        for (c, &v) in u.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            let x = grid.center(c);
            let div = flux.div_g(&x[..n]);
            let rate: f64 = (0..flux.m()).map(|j| div[j] * inc[j]).sum::<f64>().abs();
            // ∫_0^{|v|} |q(ξ)| dξ, using the parity of q.
            let w = v.abs();
            let iq = match flux.profile() {
                Profile::Quadratic => w * w * w / 6.0,
                Profile::Linear => 0.5 * w * w,
            };
            total += rate * iq;
        }
    }
    total * grid.cell_volume() / l1
}

/// `max_t (½ dissipation(t) + ½‖u(t)‖₂² − ½‖u0‖₂²)⁺ / ‖u0‖₁`.
fn mass_constant(sol: &Solution, grid: &Grid) -> f64 {
    let u0 = &sol.snapshots[0];
    let l1 = u0.l1(grid);
    if l1 == 0.0 {
        return 0.0;
    }
    let e0 = 0.5 * u0.l2_sq(grid);
    let mut diss = 0.0;
    let mut worst: f64 = 0.0;
    for (k, snap) in sol.snapshots.iter().enumerate().skip(1) {
        diss += sol.ledger.steps[k - 1].total;
        worst = worst.max(0.5 * diss + 0.5 * snap.l2_sq(grid) - e0);
    }
    worst / l1
}

/// Largest `‖u(t)‖₁ − ‖u0‖₁` over the snapshots.
fn l1_excess(sol: &Solution, grid: &Grid) -> f64 {
    let l0 = sol.snapshots[0].l1(grid);
    sol.snapshots.iter().map(|s| s.l1(grid) - l0).fold(f64::NEG_INFINITY, f64::max)
}

fn solve(cfg: &ExperimentConfig, flux: &FluxModel, z: &PwlPath, nx: usize) -> Result<(Solution, Grid), SuiteError> {
    let grid = cfg.grid_for(flux, z, &[&cfg.initial], nx)?;
    let u0 = cfg.initial_field(&grid);
    let sol = solve_pathwise(&u0, flux, z, &grid, cfg.time.horizon, &SolveOptions { step: cfg.step_options() })?;
    Ok((sol, grid))
}

/// L1 bound, x-independent entropy balance and the level-uniformity of the
/// mass-bound constant.
pub fn run_bounds(cfg: &ExperimentConfig) -> Result<SuiteReport, SuiteError> {
    let sc = &cfg.suites.bounds;
    let flux = cfg.flux()?;
    let d = &cfg.driver;
    let mut report = SuiteReport::new("bounds", cfg.hash(), d.seed);

    let runs: Vec<LevelRun> = sc
        .levels
        .par_iter()
        .map(|&level| {
            let z = brownian_pwl(d.seed, flux.m(), level, cfg.time.horizon);
            let (sol, grid) = solve(cfg, &flux, &z, sc.nx)?;
            Ok(LevelRun {
                level,
                tv: z.total_variation(),
                l1_excess: l1_excess(&sol, &grid),
                mhat: mass_constant(&sol, &grid),
                naive: naive_constant(&sol, &flux, &z, &grid),
            })
        })
        .collect::<Result<_, SuiteError>>()?;
    let cells = (sc.nx as f64).powi(flux.n() as i32);
    let l1_tol = 10.0 * f64::EPSILON * cells;
    let worst_l1 = runs.iter().map(|r| r.l1_excess).fold(f64::NEG_INFINITY, f64::max);
    report.check(Check::at_most("l1_excess", worst_l1, l1_tol));

    let levels: Vec<f64> = runs.iter().map(|r| r.level as f64).collect();
    let mhat: Vec<f64> = runs.iter().map(|r| r.mhat).collect();
    let tv: Vec<f64> = runs.iter().map(|r| r.tv).collect();
    let naive: Vec<f64> = runs.iter().map(|r| r.naive).collect();
    let mmax = mhat.iter().copied().fold(0.0, f64::max);
    let slope = ls_slope(&levels, &mhat);
    let naive_slope = ls_slope(&levels, &naive);
    let tv_growth = (tv[tv.len() - 1] / tv[0]).powf(1.0 / (levels[levels.len() - 1] - levels[0]));
    report.metric("mhat_max", mmax);
    report.metric("mhat_slope", slope);
    report.metric("naive_slope", naive_slope);
    report.metric("tv_growth_per_level", tv_growth);
    report.series("mhat", Series::new("level", "mhat", levels.clone(), mhat));
    report.series("naive_constant", Series::new("level", "naive", levels.clone(), naive));
    report.series("driver_tv", Series::new("level", "tv", levels, tv));
    // Growth is judged against the classical constant, which grows with the driver's variation.
    report.check(Check::at_most("mhat_trend", slope, sc.trend_tolerance * naive_slope.max(0.0)));

    let balance_flux =
        FluxModel::builtin(&sc.balance_flux, &Default::default()).map_err(crate::config::ConfigError::from)?;
    if !balance_flux.is_x_independent() {
        return Err(SuiteError::Precondition(format!("balance_flux `{}` depends on x", sc.balance_flux)));
    }
    let z = brownian_pwl(d.seed, balance_flux.m(), d.dyadic_level, cfg.time.horizon);
    let (sol, grid) = solve(cfg, &balance_flux, &z, sc.nx)?;
    let e0 = 0.5 * sol.snapshots[0].l2_sq(&grid);
    let lhs = sol.ledger.total_mass + 0.5 * sol.last().l2_sq(&grid);
    report.metric("balance_dissipation", sol.ledger.total_mass);
    report.metric("balance_initial_energy", e0);
    report.metric("balance_clamp_residual", sol.ledger.clamp_residual);
    report.check(Check::at_most("entropy_balance", lhs, e0 * (1.0 + sc.balance_tolerance)));
    report.check(Check::at_most("balance_l1_excess", l1_excess(&sol, &grid), l1_tol));
    Ok(report)
}
