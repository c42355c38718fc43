use rayon::prelude::*;

use super::{Check, Series, SuiteError, SuiteReport};
use crate::characteristics::{forward_flow, CharState, FlowOptions};
use crate::config::ExperimentConfig;
use crate::flux::FluxModel;
use crate::rng;
use crate::roughpath::{brownian_pwl, rho_dist_pwl, PwlPath};

/// Sup over the seed points and the shared substep times of the differences
/// of flow values and of flow Jacobians under two drivers on the same grid.
pub fn flow_distance(
    flux: &FluxModel,
    a: &PwlPath,
    b: &PwlPath,
    seeds: &[Vec<f64>],
    steps: usize,
) -> Result<(f64, f64), SuiteError> {
    let n = flux.n();
    let opts = FlowOptions::with_steps(steps).with_jacobian().recording();
    let (t0, t1) = (a.start_time(), a.end_time());
    let per_seed: Vec<(f64, f64)> = seeds
        .par_iter()
        .map(|p| {
            let s = CharState::new(&p[..n], p[n]);
            let fa = forward_flow(flux, a, t0, &s, t1, &opts)?;
            let fb = forward_flow(flux, b, t0, &s, t1, &opts)?;
            let (pa, pb) = (fa.path.expect("recorded"), fb.path.expect("recorded"));
            let (ja, jb) = (fa.jacobian_path.expect("recorded"), fb.jacobian_path.expect("recorded"));
            debug_assert_eq!(pa.len(), pb.len());
            let mut dv: f64 = 0.0;
            let mut dj: f64 = 0.0;
            for ((sa, sb), (ma, mb)) in pa.iter().zip(&pb).zip(ja.iter().zip(&jb)) {
                dv = dv.max(sa.1.max_abs_diff(&sb.1));
                for (ra, rb) in ma.iter().zip(mb) {
                    for (x, y) in ra.iter().zip(rb) {
                        dj = dj.max((x - y).abs());
                    }
                }
            }
            Ok((dv, dj))
        })
        .collect::<Result<_, SuiteError>>()?;
    Ok(per_seed.into_iter().fold((0.0, 0.0), |(a, b), (c, d)| (a.max(c), b.max(d))))
}

/// Flow differences between consecutive dyadic approximations, measured in
/// units of the rough-path distance of the drivers.
pub fn run_flow_stability(cfg: &ExperimentConfig) -> Result<SuiteReport, SuiteError> {
    let sc = &cfg.suites.flow_stability;
    let flux = cfg.flux()?;
    let d = &cfg.driver;
    let base = brownian_pwl(d.seed, flux.m(), sc.native_level, cfg.time.horizon);
    let dim = flux.n() + 1;
    let seeds = rng::halton_in_box(sc.samples, &vec![sc.sample_box[0]; dim], &vec![sc.sample_box[1]; dim]);
    let mut report = SuiteReport::new("flowstability", cfg.hash(), d.seed);
    let mut levels = sc.levels.clone();
    levels.sort_unstable();
    let mut rows = Vec::new();
    for &n in &levels {
        let coarse = base.dyadic_approx(n)?;
        let fine = base.dyadic_approx(n + 1)?;
        let rho = rho_dist_pwl(&coarse, &fine, d.alpha)?;
        // Same node set for both, so recorded substeps coincide.
        let (dv, dj) = flow_distance(&flux, &coarse.subdivide(2)?, &fine, &seeds, cfg.time.steps_per_segment)?;
        report.metric(&format!("rho_{n}"), rho);
        report.metric(&format!("value_distance_{n}"), dv);
        report.metric(&format!("jacobian_distance_{n}"), dj);
        rows.push((n as f64, dv / rho, dj / rho));
    }
    let spread = |f: fn(&(f64, f64, f64)) -> f64| {
        let v: Vec<f64> = rows.iter().map(f).collect();
        v.iter().copied().fold(0.0, f64::max) / v.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let value_spread = spread(|r| r.1);
    let jacobian_spread = spread(|r| r.2);
    let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
    report.series("value_ratio", Series::new("level", "ratio", xs.clone(), rows.iter().map(|r| r.1).collect()));
    report.series("jacobian_ratio", Series::new("level", "ratio", xs, rows.iter().map(|r| r.2).collect()));
    report.check(Check::at_most("value_ratio_spread", value_spread, sc.max_spread));
    report.check(Check::at_most("jacobian_ratio_spread", jacobian_spread, sc.max_spread));
    Ok(report)
}
