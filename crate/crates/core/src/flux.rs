//! Separable flux models `A^{ij}(x, u) = G^{ij}(x) q(u)` with analytic
//! derivatives `a = ∂_u A` and `b_j = Σ_i ∂_{x_i} A^{ij}`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::rng;

/// Largest supported spatial or signal dimension.
pub const MAX_DIM: usize = 3;

pub type Vec3 = [f64; MAX_DIM];
pub type Mat3 = [[f64; MAX_DIM]; MAX_DIM];

#[derive(Debug, Error)]
pub enum FluxError {
    #[error("unknown flux `{0}`")]
    UnknownName(String),
    #[error("flux `{flux}` has no parameter `{param}`")]
    UnknownParam { flux: String, param: String },
    #[error("flux parameter `{param}` is invalid: {reason}")]
    InvalidParam { param: String, reason: String },
}

/// Dependence on the conserved variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Profile {
    /// `q(u) = u²/2`.
    Quadratic,
    /// `q(u) = u`.
    Linear,
}

impl Profile {
    pub fn q(self, u: f64) -> f64 {
        match self {
            Profile::Quadratic => 0.5 * u * u,
            Profile::Linear => u,
        }
    }

    pub fn dq(self, u: f64) -> f64 {
        match self {
            Profile::Quadratic => u,
            Profile::Linear => 1.0,
        }
    }

    pub fn d2q(self, _u: f64) -> f64 {
        match self {
            Profile::Quadratic => 1.0,
            Profile::Linear => 0.0,
        }
    }

    /// Entropy flux density `∫_0^u s q'(s) ds` of `η(u) = u²/2`.
    pub fn entropy_flux(self, u: f64) -> f64 {
        match self {
            Profile::Quadratic => u * u * u / 3.0,
            Profile::Linear => 0.5 * u * u,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Coefficient {
    Unit,
    /// `1 + amp sin(k x)`.
    Modulated {
        amp: f64,
        k: f64,
    },
    /// `G^{jj}(x) = 1 + amp sin(k x_j + j)`.
    Diagonal {
        amp: f64,
        k: f64,
    },
    /// `c0 + c1 sin(k x)`.
    Advection {
        c0: f64,
        c1: f64,
        k: f64,
    },
}

/// Flux `A(x, u)` of shape `N × M` together with its derived coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct FluxModel {
    name: String,
    n: usize,
    m: usize,
    coef: Coefficient,
    profile: Profile,
    a_offset: f64,
    /// Smoothness index of the model; documentation only.
    pub gamma: f64,
}

fn take(params: &mut BTreeMap<String, f64>, key: &str, default: f64) -> f64 {
    params.remove(key).unwrap_or(default)
}

impl FluxModel {
    /// Builtin flux by name. `a_offset` is accepted by every model and shifts
    /// `a` away from `∂_u A`; it exists to build corrupted fixtures.
    pub fn builtin(name: &str, params: &BTreeMap<String, f64>) -> Result<Self, FluxError> {
        let mut p = params.clone();
        let a_offset = take(&mut p, "a_offset", 0.0);
        let (n, coef, profile) = match name {
            "burgers_xindep" => (1, Coefficient::Unit, Profile::Quadratic),
            "burgers_modulated" => {
                let amp = take(&mut p, "amp", 0.5);
                let k = take(&mut p, "k", 1.0);
                if amp.abs() >= 1.0 {
                    return Err(FluxError::InvalidParam { param: "amp".into(), reason: "|amp| must be < 1".into() });
                }
                (1, Coefficient::Modulated { amp, k }, Profile::Quadratic)
            }
            "diagonal_multipath" => {
                let dims = take(&mut p, "dims", 2.0);
                if dims.fract() != 0.0 || !(1.0..=MAX_DIM as f64).contains(&dims) {
                    return Err(FluxError::InvalidParam {
                        param: "dims".into(),
                        reason: format!("must be an integer in 1..={MAX_DIM}"),
                    });
                }
                let amp = take(&mut p, "amp", 0.25);
                let k = take(&mut p, "k", 1.0);
                if amp.abs() >= 1.0 {
                    return Err(FluxError::InvalidParam { param: "amp".into(), reason: "|amp| must be < 1".into() });
                }
                (dims as usize, Coefficient::Diagonal { amp, k }, Profile::Quadratic)
            }
            "linear_advection" => {
                let c0 = take(&mut p, "c0", 1.0);
                let c1 = take(&mut p, "c1", 0.0);
                let k = take(&mut p, "k", 1.0);
                (1, Coefficient::Advection { c0, c1, k }, Profile::Linear)
            }
            other => return Err(FluxError::UnknownName(other.to_string())),
        };
        if let Some(param) = p.keys().next() {
            return Err(FluxError::UnknownParam { flux: name.to_string(), param: param.clone() });
        }
        for (key, v) in params {
            if !v.is_finite() {
                return Err(FluxError::InvalidParam { param: key.clone(), reason: "not finite".into() });
            }
        }
        Ok(Self { name: name.to_string(), n, m: n, coef, profile, a_offset, gamma: 3.0 })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Spatial dimension `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Signal dimension `M`.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    pub fn a_offset(&self) -> f64 {
        self.a_offset
    }

    /// True when `A` does not depend on `x`, so that `b ≡ 0`.
    pub fn is_x_independent(&self) -> bool {
        match self.coef {
            Coefficient::Unit => true,
            Coefficient::Modulated { amp, .. } | Coefficient::Diagonal { amp, .. } => amp == 0.0,
            Coefficient::Advection { c1, .. } => c1 == 0.0,
        }
    }

    /// Spatial coefficient matrix `G(x)`.
    pub fn g(&self, x: &[f64]) -> Mat3 {
        let mut out = [[0.0; MAX_DIM]; MAX_DIM];
        match self.coef {
            Coefficient::Unit => out[0][0] = 1.0,
            Coefficient::Modulated { amp, k } => out[0][0] = 1.0 + amp * (k * x[0]).sin(),
            Coefficient::Diagonal { amp, k } => {
                for j in 0..self.n {
                    out[j][j] = 1.0 + amp * (k * x[j] + j as f64).sin();
                }
            }
            Coefficient::Advection { c0, c1, k } => out[0][0] = c0 + c1 * (k * x[0]).sin(),
        }
        out
    }

    /// `∂_{x_d} G(x)`.
    pub fn dg(&self, x: &[f64], d: usize) -> Mat3 {
        let mut out = [[0.0; MAX_DIM]; MAX_DIM];
        match self.coef {
            Coefficient::Unit => {}
            Coefficient::Modulated { amp, k } => out[0][0] = amp * k * (k * x[0]).cos(),
            Coefficient::Diagonal { amp, k } => out[d][d] = amp * k * (k * x[d] + d as f64).cos(),
            Coefficient::Advection { c1, k, .. } => out[0][0] = c1 * k * (k * x[0]).cos(),
        }
        out
    }

    /// `(div G)_j = Σ_i ∂_{x_i} G^{ij}`.
    pub fn div_g(&self, x: &[f64]) -> Vec3 {
        let mut out = [0.0; MAX_DIM];
        for d in 0..self.n {
            let dg = self.dg(x, d);
            for j in 0..self.m {
                out[j] += dg[d][j];
            }
        }
        out
    }

    /// `∂_{x_d} (div G)_j`.
    pub fn d_div_g(&self, x: &[f64], d: usize) -> Vec3 {
        let mut out = [0.0; MAX_DIM];
        match self.coef {
            Coefficient::Unit => {}
            Coefficient::Modulated { amp, k } => out[0] = -amp * k * k * (k * x[0]).sin(),
            Coefficient::Diagonal { amp, k } => out[d] = -amp * k * k * (k * x[d] + d as f64).sin(),
            Coefficient::Advection { c1, k, .. } => out[0] = -c1 * k * k * (k * x[0]).sin(),
        }
        out
    }

    /// `A(x, u)`.
    pub fn flux(&self, x: &[f64], u: f64) -> Mat3 {
        let q = self.profile.q(u);
        self.g(x).map(|row| row.map(|v| v * q))
    }

    /// `a(x, ξ)`, including the corruption offset on every entry in the active block.
    pub fn a(&self, x: &[f64], xi: f64) -> Mat3 {
        let dq = self.profile.dq(xi);
        let mut out = self.g(x).map(|row| row.map(|v| v * dq));
        if self.a_offset != 0.0 {
            for row in out.iter_mut().take(self.n) {
                for v in row.iter_mut().take(self.m) {
                    *v += self.a_offset;
                }
            }
        }
        out
    }

    /// `b(x, ξ) = div_x A(x, ξ)`.
    pub fn b(&self, x: &[f64], xi: f64) -> Vec3 {
        let q = self.profile.q(xi);
        self.div_g(x).map(|v| v * q)
    }

    /// Characteristic velocity `a(x, ξ) ż`.
    pub fn velocity(&self, x: &[f64], xi: f64, zdot: &[f64]) -> Vec3 {
        let a = self.a(x, xi);
        let mut out = [0.0; MAX_DIM];
        for i in 0..self.n {
            out[i] = (0..self.m).map(|j| a[i][j] * zdot[j]).sum();
        }
        out
    }

    /// `b(x, ξ) · ż`.
    pub fn source(&self, x: &[f64], xi: f64, zdot: &[f64]) -> f64 {
        let b = self.b(x, xi);
        (0..self.m).map(|j| b[j] * zdot[j]).sum()
    }

    /// Upper bound of `|a(x, ξ)|` (operator 1-norm per row, max over rows)
    /// for `|ξ| ≤ xi_max`, using `sup |G^{ij}|`.
    pub fn speed_bound(&self, xi_max: f64) -> f64 {
        let gmax = match self.coef {
            Coefficient::Unit => 1.0,
            Coefficient::Modulated { amp, .. } | Coefficient::Diagonal { amp, .. } => 1.0 + amp.abs(),
            Coefficient::Advection { c0, c1, .. } => c0.abs() + c1.abs(),
        };
        let dq = match self.profile {
            Profile::Quadratic => xi_max.abs(),
            Profile::Linear => 1.0,
        };
        gmax * dq + self.a_offset.abs() * self.m as f64
    }
}

/// Outcome of the finite-difference and `b(x,0) = 0` checks.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct AssumptionReport {
    pub pass: bool,
    pub max_b_at_zero: f64,
    pub max_a_error: f64,
    pub max_b_error: f64,
    pub tolerance: f64,
    /// `(x, ξ)` with the largest error relative to the tolerance.
    pub worst_point: Vec<f64>,
}

/// Checks `b(x,0) = 0`, `a ≈ ∂_ξ A` and `b ≈ Σ_i ∂_{x_i} A^{i·}` by central
/// differences of step `h` at Halton points of `box × [-xi_max, xi_max]`.
/// The tolerance is `100 h²` scaled by the size of the coefficients.
pub fn check_assumptions(
    flux: &FluxModel,
    lo: &[f64],
    hi: &[f64],
    xi_max: f64,
    samples: usize,
    h: f64,
) -> AssumptionReport {
    let n = flux.n();
    let mut blo = lo[..n].to_vec();
    let mut bhi = hi[..n].to_vec();
    blo.push(-xi_max);
    bhi.push(xi_max);
    let scale = 1.0 + flux.speed_bound(xi_max).max(xi_max * xi_max);
    let tolerance = 100.0 * h * h * scale;
    let mut report = AssumptionReport {
        pass: true,
        max_b_at_zero: 0.0,
        max_a_error: 0.0,
        max_b_error: 0.0,
        tolerance,
        worst_point: vec![0.0; n + 1],
    };
    let mut worst_ratio = -1.0;
    for pt in rng::halton_in_box(samples.max(1), &blo, &bhi) {
        let x = &pt[..n];
        let xi = pt[n];
        let b0 = flux.b(x, 0.0).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let a = flux.a(x, xi);
        let ap = flux.flux(x, xi + h);
        let am = flux.flux(x, xi - h);
        let mut a_err: f64 = 0.0;
        for i in 0..n {
            for j in 0..flux.m() {
                a_err = a_err.max((a[i][j] - (ap[i][j] - am[i][j]) / (2.0 * h)).abs());
            }
        }
        let b = flux.b(x, xi);
        let mut fd_b = [0.0; MAX_DIM];
        for d in 0..n {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[d] += h;
            xm[d] -= h;
            let (fp, fm) = (flux.flux(&xp, xi), flux.flux(&xm, xi));
            for j in 0..flux.m() {
                fd_b[j] += (fp[d][j] - fm[d][j]) / (2.0 * h);
            }
        }
        let b_err = (0..flux.m()).fold(0.0f64, |m, j| m.max((b[j] - fd_b[j]).abs()));
        report.max_b_at_zero = report.max_b_at_zero.max(b0);
        report.max_a_error = report.max_a_error.max(a_err);
        report.max_b_error = report.max_b_error.max(b_err);
        let ratio = (a_err.max(b_err) / tolerance).max(if b0 > 0.0 { f64::INFINITY } else { 0.0 });
        if ratio > worst_ratio {
            worst_ratio = ratio;
            report.worst_point = pt.clone();
        }
    }
    report.pass = report.max_b_at_zero == 0.0 && report.max_a_error <= tolerance && report.max_b_error <= tolerance;
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn model(name: &str, params: &[(&str, f64)]) -> FluxModel {
        let p = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        FluxModel::builtin(name, &p).unwrap()
    }

    #[test]
    fn xindep_burgers_coefficients() {
        let f = model("burgers_xindep", &[]);
        for &(x, xi) in &[(0.3, -1.2), (-2.0, 0.7)] {
            assert_eq!(f.a(&[x], xi)[0][0], xi);
            assert_eq!(f.b(&[x], xi)[0], 0.0);
        }
        assert!(f.is_x_independent());
    }

    #[test]
    fn modulated_burgers_divergence() {
        let f = model("burgers_modulated", &[]);
        for &(x, xi) in &[(0.3, -1.2), (2.0, 0.7), (-1.1, 0.0)] {
            assert_abs_diff_eq!(f.b(&[x], xi)[0], 0.5 * x.cos() * xi * xi / 2.0, epsilon = 1e-15);
        }
        assert_eq!(f.b(&[1.0], 0.0)[0], 0.0);
    }

    #[test]
    fn unit_advection() {
        let f = model("linear_advection", &[]);
        assert_eq!(f.a(&[0.4], 3.0)[0][0], 1.0);
        assert_eq!(f.b(&[0.4], 3.0)[0], 0.0);
    }

    #[test]
    fn diagonal_is_diagonal() {
        let f = model("diagonal_multipath", &[("dims", 3.0)]);
        let a = f.a(&[0.1, 0.2, 0.3], 1.5);
        assert_eq!((f.n(), f.m()), (3, 3));
        assert_eq!(a[0][1], 0.0);
        assert!(a[2][2] > 0.0);
    }

    #[test]
    fn rejects_bad_names_and_params() {
        let empty = BTreeMap::new();
        assert!(matches!(FluxModel::builtin("nope", &empty), Err(FluxError::UnknownName(_))));
        let p: BTreeMap<String, f64> = [("speed".to_string(), 1.0)].into_iter().collect();
        assert!(matches!(FluxModel::builtin("burgers_xindep", &p), Err(FluxError::UnknownParam { .. })));
        let p: BTreeMap<String, f64> = [("amp".to_string(), 1.5)].into_iter().collect();
        assert!(FluxModel::builtin("burgers_modulated", &p).is_err());
    }

    #[test]
    fn assumption_checks() {
        let lo = [-3.0, -3.0, -3.0];
        let hi = [3.0, 3.0, 3.0];
        for (name, params) in [
            ("burgers_xindep", vec![]),
            ("burgers_modulated", vec![]),
            ("diagonal_multipath", vec![("dims", 2.0)]),
            ("linear_advection", vec![("c1", 0.3)]),
        ] {
            let r = check_assumptions(&model(name, &params), &lo, &hi, 2.0, 64, 1e-2);
            assert!(r.pass, "{name}: {r:?}");
            assert_eq!(r.max_b_at_zero, 0.0);
        }
        let bad = model("burgers_modulated", &[("a_offset", 1.0)]);
        let r = check_assumptions(&bad, &lo, &hi, 2.0, 64, 1e-2);
        assert!(!r.pass);
        assert_abs_diff_eq!(r.max_a_error, 1.0, epsilon = 1e-6);
    }

    #[test]
    fn divergence_errors_are_second_order() {
        let f = model("burgers_modulated", &[]);
        let e1 = check_assumptions(&f, &[-3.0], &[3.0], 2.0, 64, 1e-2).max_b_error;
        let e2 = check_assumptions(&f, &[-3.0], &[3.0], 2.0, 64, 5e-3).max_b_error;
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn analytic_second_derivatives_match_differences() {
        let f = model("diagonal_multipath", &[("dims", 2.0), ("amp", 0.4), ("k", 1.3)]);
        let x = [0.37, -0.81];
        let h = 1e-5;
        for d in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[d] += h;
            xm[d] -= h;
            let fd = (f.div_g(&xp)[d] - f.div_g(&xm)[d]) / (2.0 * h);
            assert_abs_diff_eq!(f.d_div_g(&x, d)[d], fd, epsilon = 1e-8);
            let fd_g = (f.g(&xp)[d][d] - f.g(&xm)[d][d]) / (2.0 * h);
            assert_abs_diff_eq!(f.dg(&x, d)[d][d], fd_g, epsilon = 1e-8);
        }
    }
}
