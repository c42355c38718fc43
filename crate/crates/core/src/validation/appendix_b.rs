use rayon::prelude::*;

use super::{ls_slope, Check, Series, SuiteError, SuiteReport};
use crate::characteristics::{forward_flow, CharState, FlowOptions};
use crate::config::ExperimentConfig;
use crate::flux::FluxModel;
use crate::kinetic::Bump;
use crate::quad::gauss_legendre_on;
use crate::rng;
use crate::roughpath::PwlPath;

const AUTOCORR_NODES: usize = 48;

/// `(k(s), k'(s))` for the autocorrelation `k(s) = ∫ φ(v) φ(v + s) dv` of the bump.
fn autocorrelation(bump: &Bump, s: f64) -> (f64, f64) {
    let w = bump.radius();
    let (a, b) = ((-w).max(-w - s), w.min(w - s));
    if a >= b {
        return (0.0, 0.0);
    }
    let (x, wt) = gauss_legendre_on(AUTOCORR_NODES, a, b);
    x.iter().zip(&wt).fold((0.0, 0.0), |(k, dk), (v, q)| {
        let p = bump.value(*v);
        (k + q * p * bump.value(v + s), dk + q * p * bump.derivative(v + s))
    })
}

/// Solves `m v = rhs` by Gaussian elimination with partial pivoting.
fn solve(m: &[Vec<f64>], rhs: &[f64]) -> Vec<f64> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.iter().zip(rhs).map(|(r, b)| r.iter().copied().chain([*b]).collect()).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).expect("nonempty");
        a.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..=n {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (a[r][n] - s) / a[r][r];
    }
    x
}

/// `∫ |∫ ρ(x',·)∂_ξρ(x,·) + ∂_{ξ'}ρ(x',·)ρ(x,·) d(y,η)| d(x',ξ')` at one `(x, ξ)`,
/// for the test function anchored at `t0` and evaluated at time `r`.
///
/// The inner integral reduces to `∇K(P − P')·(∂_ξP − ∂_{ξ'}P')`, where `P`, `P'`
/// are the backward images at `t0` and `K` is the autocorrelation of `ρ⁰`.
/// The outer integral is taken over `P'` by the measure-preserving change of
/// variables, with `quadrature` midpoint nodes per axis.
pub fn error_functional(
    flux: &FluxModel,
    z: &PwlPath,
    t0: f64,
    r: f64,
    eps: f64,
    point: &[f64],
    quadrature: usize,
    steps: usize,
) -> Result<f64, SuiteError> {
    let n = flux.n();
    let dim = n + 1;
    let bump = Bump { eps };
    let opts = FlowOptions::with_steps(steps).with_jacobian();
    let back = forward_flow(flux, z, r, &CharState::new(&point[..n], point[n]), t0, &opts)?;
    let jac = back.jacobian.expect("requested");
    let p: Vec<f64> = back.state.y.iter().copied().chain([back.state.eta]).collect();
    let dp: Vec<f64> = (0..dim).map(|i| jac[i][n]).collect();
    let reach = 2.0 * bump.radius();
    let h = 2.0 * reach / quadrature as f64;
    let mut e_xi = vec![0.0; dim];
    e_xi[n] = 1.0;
    let total = quadrature.pow(dim as u32);
    let mut sum = 0.0;
    for idx in 0..total {
        let mut q = vec![0.0; dim];
        let mut rem = idx;
        for d in (0..dim).rev() {
            q[d] = p[d] - reach + ((rem % quadrature) as f64 + 0.5) * h;
            rem /= quadrature;
        }
        let kd: Vec<(f64, f64)> = (0..dim).map(|d| autocorrelation(&bump, p[d] - q[d])).collect();
        if kd.iter().any(|k| k.0 == 0.0 && k.1 == 0.0) {
            continue;
        }
        let fwd = forward_flow(flux, z, t0, &CharState::new(&q[..n], q[n]), r, &opts)?;
        let dq = solve(&fwd.jacobian.expect("requested"), &e_xi);
        let mut inner = 0.0;
        for d in 0..dim {
            let grad: f64 = (0..dim).map(|k| if k == d { kd[k].1 } else { kd[k].0 }).product();
            inner += grad * (dp[d] - dq[d]);
        }
        sum += inner.abs();
    }
    Ok(sum * h.powi(dim as i32))
}

/// Power-law decay of the convolution error functional as `r → t0`.
pub fn run_appendix_b(cfg: &ExperimentConfig) -> Result<SuiteReport, SuiteError> {
    let sc = &cfg.suites.appendix_b;
    let flux = cfg.flux()?;
    let z = cfg.driver()?;
    let dim = flux.n() + 1;
    let pts = rng::halton_in_box(sc.samples, &vec![sc.sample_box[0]; dim], &vec![sc.sample_box[1]; dim]);
    let eps = cfg.mollifier.epsilon;
    let mut report = SuiteReport::new("appendixB", cfg.hash(), cfg.driver.seed);
    let mut xs = Vec::new();
    let mut es = Vec::new();
    for &k in &sc.radii_exponents {
        let dr = 0.5f64.powi(k as i32);
        let r = sc.t0 + dr;
        if r > z.end_time() {
            return Err(SuiteError::Precondition(format!("r = {r} beyond the driver horizon")));
        }
        let vals: Vec<f64> = pts
            .par_iter()
            .map(|p| error_functional(&flux, &z, sc.t0, r, eps, p, sc.quadrature, cfg.time.steps_per_segment))
            .collect::<Result<_, _>>()?;
        let e = vals.into_iter().fold(0.0, f64::max);
        report.metric(&format!("E_{k}"), e);
        xs.push(dr);
        es.push(e);
    }
    report.series("error", Series::new("r_minus_t0", "E", xs.clone(), es.clone()));
    let scale = es.iter().copied().fold(0.0, f64::max);
    // Below this level E is quadrature round-off and has no meaningful slope.
    let noise = 1e-10;
    report.metric("max_E", scale);
    if scale <= noise {
        report.check(Check::at_most("max_E_x_independent", scale, noise));
        return Ok(report);
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = es.iter().map(|v| v.max(f64::MIN_POSITIVE).ln()).collect();
    let slope = ls_slope(&lx, &ly);
    report.metric("slope", slope);
    report.check(Check::at_least("fitted_slope", slope, cfg.driver.alpha - sc.slope_margin));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn autocorrelation_at_zero_is_l2_norm() {
        let b = Bump { eps: 0.1 };
        let (x, w) = gauss_legendre_on(200, -0.2, 0.2);
        let l2: f64 = x.iter().zip(&w).map(|(v, q)| q * b.value(*v).powi(2)).sum();
        let (k, dk) = autocorrelation(&b, 0.0);
        assert!((k - l2).abs() < 1e-6 * l2);
        assert!(dk.abs() < 1e-9);
        assert_eq!(autocorrelation(&b, 0.41), (0.0, 0.0));
        // Even function with odd derivative.
        let (kp, dp) = autocorrelation(&b, 0.07);
        let (km, dm) = autocorrelation(&b, -0.07);
        assert!((kp - km).abs() < 1e-9 && (dp + dm).abs() < 1e-9);
    }

    #[test]
    fn linear_solve() {
        let m = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let x = solve(&m, &[3.0, 5.0]);
        assert!((x[0] - 0.8).abs() < 1e-14 && (x[1] - 1.4).abs() < 1e-14);
    }
}
