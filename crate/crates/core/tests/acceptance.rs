//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! The process exits 0 once every criterion has been evaluated, whatever the
//! outcome; set `ACCEPTANCE_STRICT=1` to exit 1 when any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rough_scl::characteristics::{backward_flow, forward_flow, CharState, FlowOptions};
use rough_scl::config::ExperimentConfig;
use rough_scl::flux::FluxModel;
use rough_scl::kinetic::{solve_pathwise, SolveOptions};
use rough_scl::roughpath::{brownian_pwl, lift_pwl, PwlPath};
use rough_scl::validation::{
    ls_slope, monotone_driver, run_appendix_b, run_bounds, run_cancellation, run_contraction, run_convergence,
    run_flow_stability, time_change_oracle, SuiteError, SuiteReport,
};

type Outcome = Result<(bool, String), String>;

fn config(overrides: &[(&str, &str)]) -> Result<ExperimentConfig, String> {
    let ov: Vec<(String, String)> = overrides.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json");
    ExperimentConfig::load(&path, &ov).map_err(|e| e.to_string())
}

fn flux(name: &str) -> FluxModel {
    FluxModel::builtin(name, &BTreeMap::new()).expect("builtin")
}

fn summary(r: &SuiteReport) -> String {
    r.checks
        .iter()
        .map(|c| format!("{} {:.3e}{}{:.3e}", c.name, c.value, if c.pass { " ok " } else { " FAILS " }, c.threshold))
        .collect::<Vec<_>>()
        .join(", ")
}

fn suite(r: Result<SuiteReport, SuiteError>) -> Outcome {
    let r = r.map_err(|e| e.to_string())?;
    Ok((r.pass, summary(&r)))
}

fn algebra() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let (mut chen, mut geo, mut rev) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..100 {
        let dim = rng.random_range(1..=3);
        let segs = rng.random_range(1..=128usize);
        let mut t = vec![0.0];
        let mut pts = vec![0.0; dim];
        for k in 0..segs {
            t.push(t[k] + rng.random_range(0.1..1.0) / segs as f64);
            for d in 0..dim {
                let prev = pts[k * dim + d];
                pts.push(prev + rng.random_range(-1.0..1.0) / (segs as f64).sqrt());
            }
        }
        let p = PwlPath::from_flat(dim, t, pts).map_err(|e| e.to_string())?;
        let lifted = lift_pwl(&p, 2).map_err(|e| e.to_string())?;
        chen = chen.max(lifted.chen_defect(lifted.len()));
        geo = geo.max(lifted.geometric_defect());
        let t1 = p.end_time();
        let twice = lifted.time_reverse(t1).and_then(|r| r.time_reverse(t1)).map_err(|e| e.to_string())?;
        for k in 0..p.len() {
            rev = rev.max(twice.node(k).max_abs_diff(lifted.node(k)));
        }
        let pw = p.time_reverse(t1).and_then(|r| r.time_reverse(t1)).map_err(|e| e.to_string())?;
        for k in 0..p.len() {
            for (a, b) in pw.point(k).iter().zip(p.point(k)) {
                rev = rev.max((a - b).abs());
            }
        }
    }
    let tol = 1e-12;
    Ok((
        chen <= tol && geo <= tol && rev <= tol,
        format!("chen {chen:.2e}, geometric {geo:.2e}, reverse-twice {rev:.2e} (tol {tol:.0e})"),
    ))
}

fn flow_correctness() -> Outcome {
    let f = flux("burgers_modulated");
    let z = brownian_pwl(42, 1, 6, 1.0);
    let opts = FlowOptions::with_steps(64).with_jacobian().recording();
    let (mut trip, mut det, mut sign_ok) = (0.0f64, 0.0f64, true);
    for k in 0..16 {
        let y = -1.5 + 0.2 * k as f64;
        for eta in [-1.0, -0.3, 0.0, 0.4, 1.1] {
            let s0 = CharState::new(&[y], eta);
            let fwd = forward_flow(&f, &z, 0.0, &s0, 1.0, &opts).map_err(|e| e.to_string())?;
            let back = backward_flow(&f, &z, 1.0, &fwd.state, 1.0, &opts).map_err(|e| e.to_string())?;
            trip = trip.max(back.state.max_abs_diff(&s0));
            det = det.max((fwd.determinant().expect("requested") - 1.0).abs());
            for (_, s) in fwd.path.iter().chain(back.path.iter()).flatten() {
                sign_ok &= s.eta.signum() == eta.signum() && (eta != 0.0 || s.eta == 0.0);
            }
        }
    }
    Ok((
        trip <= 1e-8 && det <= 1e-8 && sign_ok,
        format!("round trip {trip:.2e}, |det − 1| {det:.2e}, sign invariance {sign_ok}"),
    ))
}

fn closed_form() -> Outcome {
    let mut worst = 0.0f64;
    for name in ["burgers_xindep", "linear_advection"] {
        let f = flux(name);
        for seed in 0..4 {
            let z = brownian_pwl(seed, 1, 7, 1.0);
            for (t0, t) in [(0.0, 1.0), (0.25, 0.8), (0.6, 0.1)] {
                for (y, eta) in [(0.0, 1.0), (-0.7, 0.4), (1.3, -0.9)] {
                    let r = forward_flow(&f, &z, t0, &CharState::new(&[y], eta), t, &FlowOptions::with_steps(8))
                        .map_err(|e| e.to_string())?;
                    let a = f.a(&[y], eta)[0][0];
                    let expected = y + a * (z.eval(t)[0] - z.eval(t0)[0]);
                    worst = worst.max((r.state.y[0] - expected).abs()).max((r.state.eta - eta).abs());
                }
            }
        }
    }
    Ok((worst <= 1e-10, format!("max deviation {worst:.2e} (tol 1e-10)")))
}

fn time_change() -> Outcome {
    let cfg = config(&[])?;
    let z = monotone_driver(cfg.driver.seed, cfg.driver.dyadic_level, cfg.time.horizon);
    let res = time_change_oracle(&z, &[100, 200, 400], [-1.0, 4.0], cfg.time.cfl).map_err(|e| e.to_string())?;
    let within = res.iter().all(|r| r.error <= r.bound);
    let lx: Vec<f64> = res.iter().map(|r| r.dx.ln()).collect();
    let ly: Vec<f64> = res.iter().map(|r| r.error.ln()).collect();
    let order = ls_slope(&lx, &ly);
    let min_order = cfg.suites.cancellation.min_order;
    let errs: Vec<String> = res.iter().map(|r| format!("nx {} {:.3e}/{:.3e}", r.nx, r.error, r.bound)).collect();
    Ok((within && order >= min_order, format!("{}; observed order {order:.3} (need {min_order})", errs.join(", "))))
}

fn contraction() -> Outcome {
    let cfg = config(&[])?;
    let (ok, detail) = suite(run_contraction(&cfg))?;
    let f = cfg.flux().map_err(|e| e.to_string())?;
    let z = cfg.driver().map_err(|e| e.to_string())?;
    let grid = cfg.grid(&f, &z).map_err(|e| e.to_string())?;
    let u0 = cfg.initial_field(&grid);
    let opts = SolveOptions { step: cfg.step_options() };
    let a = solve_pathwise(&u0, &f, &z, &grid, cfg.time.horizon, &opts).map_err(|e| e.to_string())?;
    let b = solve_pathwise(&u0.clone(), &f, &z, &grid, cfg.time.horizon, &opts).map_err(|e| e.to_string())?;
    let same = a.snapshots.iter().zip(&b.snapshots).map(|(x, y)| x.l1_distance(y, &grid)).fold(0.0, f64::max);
    Ok((ok && same == 0.0, format!("{detail}; identical data max D {same:.1e}")))
}

fn bounds() -> Outcome {
    suite(run_bounds(&config(&[])?))
}

fn cancellation() -> Outcome {
    suite(run_cancellation(&config(&[])?))
}

fn convergence() -> Outcome {
    suite(run_convergence(&config(&[])?))
}

fn appendix_b() -> Outcome {
    let (ok, detail) = suite(run_appendix_b(&config(&[])?))?;
    let (ok0, detail0) = suite(run_appendix_b(&config(&[("flux.name", "burgers_xindep"), ("flux.params", "{}")])?))?;
    Ok((ok && ok0, format!("modulated: {detail}; x-independent: {detail0}")))
}

fn flow_stability() -> Outcome {
    suite(run_flow_stability(&config(&[])?))
}

fn sensitivity() -> Outcome {
    let mut notes = Vec::new();
    let mut all_fail = true;
    let corrupted = config(&[("flux.params.a_offset", "1.0"), ("grid.nx", "200"), ("grid.nxi", "80")])?;
    let zeroed = config(&[("suites.contraction.zero_ledger", "true"), ("grid.nx", "200"), ("grid.nxi", "80")])?;
    for (label, res) in [("corrupted flux", run_contraction(&corrupted)), ("zeroed ledger", run_contraction(&zeroed))] {
        let failed = match &res {
            Ok(r) => !r.pass,
            Err(_) => true,
        };
        all_fail &= failed;
        notes.push(format!("{label} fails: {failed}"));
    }
    let post = config(&[("suites.cancellation.pre_height", "1.5")])?;
    let failed = match run_cancellation(&post) {
        Ok(r) => !r.pass,
        Err(SuiteError::Precondition(_)) => true,
        Err(e) => return Err(e.to_string()),
    };
    all_fail &= failed;
    notes.push(format!("post-shock cancellation fails: {failed}"));
    Ok((all_fail, notes.join(", ")))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("algebra exactness", algebra),
        ("flow correctness", flow_correctness),
        ("closed-form characteristics", closed_form),
        ("time-change oracle", time_change),
        ("L1 contraction", contraction),
        ("a priori bounds", bounds),
        ("cancellation", cancellation),
        ("convergence in driver", convergence),
        ("convolution-error scaling", appendix_b),
        ("flow stability", flow_stability),
        ("harness sensitivity", sensitivity),
    ];
    let mut failures = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let (pass, detail) = match check() {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        failures += usize::from(!pass);
        println!("{} {name} [{:.1?}]: {detail}", if pass { "PASS" } else { "FAIL" }, start.elapsed());
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
