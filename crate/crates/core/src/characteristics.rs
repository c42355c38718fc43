//! Forward and backward characteristic flows of the kinetic system
//! `dY = a(Y, ζ) dz`, `dζ = −b(Y, ζ) dz`, with variational Jacobians.

use std::io::Write;

use thiserror::Error;

use crate::flux::{FluxModel, MAX_DIM};
use crate::roughpath::{GeometricRoughPath, PathError, PwlPath};

const W: usize = MAX_DIM + 1;
type State = [f64; W];
type Jac = [[f64; W]; W];

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("characteristic left the bound {bound:e} after time {last_good_time}")]
    BlowUp { last_good_time: f64, bound: f64 },
    #[error("state has dimension {found}, flux expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Path(#[from] PathError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CharState {
    pub y: Vec<f64>,
    pub eta: f64,
}

impl CharState {
    pub fn new(y: &[f64], eta: f64) -> Self {
        Self { y: y.to_vec(), eta }
    }

    fn pack(&self) -> State {
        let mut w = [0.0; W];
        w[..self.y.len()].copy_from_slice(&self.y);
        w[MAX_DIM] = self.eta;
        w
    }

    fn unpack(w: &State, n: usize) -> Self {
        Self { y: w[..n].to_vec(), eta: w[MAX_DIM] }
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.y.iter().zip(&other.y).map(|(a, b)| (a - b).abs()).fold((self.eta - other.eta).abs(), f64::max)
    }
}

#[derive(Clone, Debug)]
pub struct FlowOptions {
    pub steps_per_segment: usize,
    pub jacobian: bool,
    pub record_path: bool,
    pub blowup_bound: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { steps_per_segment: 16, jacobian: false, record_path: false, blowup_bound: 1e6 }
    }
}

impl FlowOptions {
    pub fn with_steps(steps_per_segment: usize) -> Self {
        Self { steps_per_segment, ..Self::default() }
    }

    pub fn with_jacobian(mut self) -> Self {
        self.jacobian = true;
        self
    }

    pub fn recording(mut self) -> Self {
        self.record_path = true;
        self
    }
}

#[derive(Clone, Debug)]
pub struct FlowResult {
    pub state: CharState,
    /// `∂(Y, ζ)/∂(y, η)`, row-major with the kinetic variable last.
    pub jacobian: Option<Vec<Vec<f64>>>,
    /// Intermediate states at every substep, with the driver time.
    pub path: Option<Vec<(f64, CharState)>>,
    /// Jacobians at the same substeps as `path`, when both were requested.
    pub jacobian_path: Option<Vec<Vec<Vec<f64>>>>,
}

impl FlowResult {
    pub fn determinant(&self) -> Option<f64> {
        self.jacobian.as_ref().map(|j| determinant(j))
    }
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        if a[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        det *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    det
}

struct System<'a> {
    flux: &'a FluxModel,
    n: usize,
}

impl System<'_> {
    /// Vector field `(a ż, −b·ż)` for the direction `dz`.
    fn field(&self, w: &State, dz: &[f64]) -> State {
        let x = &w[..self.n];
        let xi = w[MAX_DIM];
        let v = self.flux.velocity(x, xi, dz);
        let mut out = [0.0; W];
        out[..self.n].copy_from_slice(&v[..self.n]);
        out[MAX_DIM] = -self.flux.source(x, xi, dz);
        out
    }

    /// Derivative of `field` with respect to the state.
    fn field_jacobian(&self, w: &State, dz: &[f64]) -> Jac {
        let (n, m) = (self.n, self.flux.m());
        let x = &w[..n];
        let xi = w[MAX_DIM];
        let prof = self.flux.profile();
        let (q, dq, d2q) = (prof.q(xi), prof.dq(xi), prof.d2q(xi));
        let g = self.flux.g(x);
        let div = self.flux.div_g(x);
        let mut out = [[0.0; W]; W];
        for k in 0..n {
            let dg = self.flux.dg(x, k);
            let ddiv = self.flux.d_div_g(x, k);
            for i in 0..n {
                out[i][k] = (0..m).map(|j| dg[i][j] * dq * dz[j]).sum();
            }
            out[MAX_DIM][k] = -(0..m).map(|j| ddiv[j] * q * dz[j]).sum::<f64>();
        }
        for i in 0..n {
            out[i][MAX_DIM] = (0..m).map(|j| g[i][j] * d2q * dz[j]).sum();
        }
        out[MAX_DIM][MAX_DIM] = -(0..m).map(|j| div[j] * dq * dz[j]).sum::<f64>();
        out
    }

    fn active(&self) -> impl Iterator<Item = usize> + Clone {
        (0..self.n).chain(std::iter::once(MAX_DIM))
    }

    fn rk4(&self, w: &mut State, jac: Option<&mut Jac>, dz: &[f64], h: f64) {
        let stage = |w: &State, dw: &State, s: f64| {
            let mut o = *w;
            for i in 0..W {
                o[i] += s * dw[i];
            }
            o
        };
        let k1 = self.field(w, dz);
        let w2 = stage(w, &k1, 0.5 * h);
        let k2 = self.field(&w2, dz);
        let w3 = stage(w, &k2, 0.5 * h);
        let k3 = self.field(&w3, dz);
        let w4 = stage(w, &k3, h);
        let k4 = self.field(&w4, dz);
        if let Some(j) = jac {
            let idx = self.active();
            let mul = |a: &Jac, b: &Jac| {
                let mut o = [[0.0; W]; W];
                for r in idx.clone() {
                    for c in idx.clone() {
                        o[r][c] = idx.clone().map(|k| a[r][k] * b[k][c]).sum();
                    }
                }
                o
            };
            let add = |a: &Jac, b: &Jac, s: f64| {
                let mut o = *a;
                for r in 0..W {
                    for c in 0..W {
                        o[r][c] += s * b[r][c];
                    }
                }
                o
            };
            let l1 = mul(&self.field_jacobian(w, dz), j);
            let l2 = mul(&self.field_jacobian(&w2, dz), &add(j, &l1, 0.5 * h));
            let l3 = mul(&self.field_jacobian(&w3, dz), &add(j, &l2, 0.5 * h));
            let l4 = mul(&self.field_jacobian(&w4, dz), &add(j, &l3, h));
            for r in 0..W {
                for c in 0..W {
                    j[r][c] += h / 6.0 * (l1[r][c] + 2.0 * l2[r][c] + 2.0 * l3[r][c] + l4[r][c]);
                }
            }
        }
        for i in 0..W {
            w[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}

fn check_dims(flux: &FluxModel, z: &PwlPath, s0: &CharState) -> Result<(), FlowError> {
    if s0.y.len() != flux.n() {
        return Err(FlowError::DimensionMismatch { expected: flux.n(), found: s0.y.len() });
    }
    if z.dim() != flux.m() {
        return Err(FlowError::DimensionMismatch { expected: flux.m(), found: z.dim() });
    }
    Ok(())
}

fn identity() -> Jac {
    let mut j = [[0.0; W]; W];
    for (i, row) in j.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    j
}

fn export_jacobian(j: &Jac, n: usize) -> Vec<Vec<f64>> {
    let idx: Vec<usize> = (0..n).chain(std::iter::once(MAX_DIM)).collect();
    idx.iter().map(|&r| idx.iter().map(|&c| j[r][c]).collect()).collect()
}

/// Integrates the characteristic system along `z` from `t0` to `t`; `t < t0`
/// runs the pieces backwards. Each linear piece is split into
/// `steps_per_segment` RK4 steps.
pub fn forward_flow(
    flux: &FluxModel,
    z: &PwlPath,
    t0: f64,
    s0: &CharState,
    t: f64,
    opts: &FlowOptions,
) -> Result<FlowResult, FlowError> {
    check_dims(flux, z, s0)?;
    let n = flux.n();
    let sys = System { flux, n };
    let mut w = s0.pack();
    let mut jac = opts.jacobian.then(identity);
    let mut path = opts.record_path.then(|| vec![(t0, s0.clone())]);
    let mut jac_path = (opts.record_path && opts.jacobian).then(|| vec![export_jacobian(&identity(), n)]);
    let steps = opts.steps_per_segment.max(1);
    let h = 1.0 / steps as f64;
    let mut last_good = t0;
    for (ta, tb, inc) in z.pieces(t0, t) {
        for s in 0..steps {
            sys.rk4(&mut w, jac.as_mut(), &inc, h);
            let now = ta + (tb - ta) * (s + 1) as f64 / steps as f64;
            if w.iter().any(|v| !v.is_finite() || v.abs() > opts.blowup_bound) {
                return Err(FlowError::BlowUp { last_good_time: last_good, bound: opts.blowup_bound });
            }
            last_good = now;
            if let Some(p) = path.as_mut() {
                p.push((now, CharState::unpack(&w, n)));
            }
            if let (Some(p), Some(j)) = (jac_path.as_mut(), jac.as_ref()) {
                p.push(export_jacobian(j, n));
            }
        }
    }
    Ok(FlowResult {
        state: CharState::unpack(&w, n),
        jacobian: jac.map(|j| export_jacobian(&j, n)),
        path,
        jacobian_path: jac_path,
    })
}

/// Driver reversed at `t1`, reusable across many backward flows.
#[derive(Clone, Debug)]
pub struct ReversedDriver {
    t1: f64,
    path: PwlPath,
}

impl ReversedDriver {
    /// `s ↦ z(t1 − s)`. When `t1` is not a grid node it is inserted first,
    /// which leaves the piecewise-linear path unchanged.
    pub fn new(z: &PwlPath, t1: f64) -> Result<Self, PathError> {
        let path = match z.node_index(t1) {
            Some(_) => z.time_reverse(t1)?,
            None => z.refine(&[t1])?.time_reverse(t1)?,
        };
        Ok(Self { t1, path })
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn path(&self) -> &PwlPath {
        &self.path
    }

    /// `(X, Ξ)_{(t1, x, ξ)}(τ)`: the forward flow of the reversed driver on `[0, τ]`.
    pub fn flow(
        &self,
        flux: &FluxModel,
        x_xi: &CharState,
        tau: f64,
        opts: &FlowOptions,
    ) -> Result<FlowResult, FlowError> {
        forward_flow(flux, &self.path, 0.0, x_xi, tau, opts)
    }
}

/// Backward characteristics started at time `t1` and run for `τ ∈ [0, t1]`.
/// Composing with the forward flow from `t1 − τ` to `t1` gives the identity.
pub fn backward_flow(
    flux: &FluxModel,
    z: &PwlPath,
    t1: f64,
    x_xi: &CharState,
    tau: f64,
    opts: &FlowOptions,
) -> Result<FlowResult, FlowError> {
    ReversedDriver::new(z, t1)?.flow(flux, x_xi, tau, opts)
}

/// Variational Jacobian `∂(Y, ζ)/∂(y, η)` of the flow from `t0` to `t`.
pub fn flow_jacobian(
    flux: &FluxModel,
    z: &PwlPath,
    t0: f64,
    s0: &CharState,
    t: f64,
    steps_per_segment: usize,
) -> Result<Vec<Vec<f64>>, FlowError> {
    let opts = FlowOptions::with_steps(steps_per_segment).with_jacobian();
    Ok(forward_flow(flux, z, t0, s0, t, &opts)?.jacobian.expect("requested"))
}

/// One step per grid piece of the scheme
/// `w ← w + V_j X^j + (DV_j V_l) 𝕏^{lj}` driven directly by level-1 and
/// level-2 increments. Used as a cross-check of the piecewise-linear route.
pub fn level2_flow(
    flux: &FluxModel,
    z: &GeometricRoughPath,
    s0: &CharState,
    k0: usize,
    k1: usize,
) -> Result<CharState, FlowError> {
    if z.level() != 2 {
        return Err(PathError::InvalidLevel(z.level()).into());
    }
    let (n, m) = (flux.n(), flux.m());
    let sys = System { flux, n };
    let mut w = s0.pack();
    let mut basis = [[0.0; MAX_DIM]; MAX_DIM];
    for (j, row) in basis.iter_mut().enumerate() {
        row[j] = 1.0;
    }
    for k in k0..k1 {
        let g = z.sig(k, k + 1);
        let fields: Vec<State> = (0..m).map(|j| sys.field(&w, &basis[j][..m])).collect();
        let mut next = w;
        for j in 0..m {
            for r in 0..W {
                next[r] += fields[j][r] * g.level1()[j];
            }
            let dv = sys.field_jacobian(&w, &basis[j][..m]);
            for l in 0..m {
                let area = g.level2_at(l, j);
                for r in 0..W {
                    next[r] += area * (0..W).map(|c| dv[r][c] * fields[l][c]).sum::<f64>();
                }
            }
        }
        w = next;
    }
    Ok(CharState::unpack(&w, n))
}

/// CSV with header `t,y1,...,yN,eta`.
pub fn write_trajectory_csv<W2: Write>(path: &[(f64, CharState)], writer: W2) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let n = path.first().map_or(0, |p| p.1.y.len());
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("y{i}")));
    header.push("eta".into());
    w.write_record(&header)?;
    for (t, s) in path {
        let mut row = vec![t.to_string()];
        row.extend(s.y.iter().map(f64::to_string));
        row.push(s.eta.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roughpath::{brownian_pwl, lift_pwl};
    use std::collections::BTreeMap;

    fn model(name: &str, params: &[(&str, f64)]) -> FluxModel {
        let p: BTreeMap<String, f64> = params.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        FluxModel::builtin(name, &p).unwrap()
    }

    #[test]
    fn closed_form_for_x_independent_flux() {
        let f = model("burgers_xindep", &[]);
        let z = brownian_pwl(1, 1, 6, 1.0);
        let s0 = CharState::new(&[0.2], -0.7);
        let (t0, t) = (0.125, 0.8);
        let r = forward_flow(&f, &z, t0, &s0, t, &FlowOptions::with_steps(4).with_jacobian()).unwrap();
        let expected = 0.2 + -0.7 * (z.eval(t)[0] - z.eval(t0)[0]);
        assert!((r.state.y[0] - expected).abs() < 1e-10);
        assert_eq!(r.state.eta, -0.7);
        assert_eq!(r.jacobian.unwrap()[1][1], 1.0);
    }

    #[test]
    fn zero_velocity_stays_zero() {
        for f in [model("burgers_modulated", &[]), model("diagonal_multipath", &[("dims", 2.0)])] {
            let z = brownian_pwl(2, f.m(), 5, 1.0);
            let s0 = CharState::new(&vec![0.3; f.n()], 0.0);
            let r = forward_flow(&f, &z, 0.0, &s0, 1.0, &FlowOptions::default().recording()).unwrap();
            assert!(r.path.unwrap().iter().all(|(_, s)| s.eta == 0.0));
        }
    }

    #[test]
    fn constant_driver_is_identity() {
        let f = model("burgers_modulated", &[]);
        let z = PwlPath::new(vec![0.0, 0.5, 1.0], vec![vec![0.4]; 3]).unwrap();
        let s0 = CharState::new(&[0.1], 1.3);
        let r = forward_flow(&f, &z, 0.0, &s0, 1.0, &FlowOptions::default()).unwrap();
        assert_eq!(r.state, s0);
    }

    #[test]
    fn round_trip_and_sign() {
        let f = model("burgers_modulated", &[]);
        let z = brownian_pwl(9, 1, 6, 1.0);
        let opts = FlowOptions::with_steps(64).recording();
        for &(y, eta) in &[(0.0, 1.0), (-1.2, -0.6), (2.1, 0.05)] {
            let s0 = CharState::new(&[y], eta);
            let fwd = forward_flow(&f, &z, 0.25, &s0, 1.0, &opts).unwrap();
            let back = backward_flow(&f, &z, 1.0, &fwd.state, 0.75, &opts).unwrap();
            assert!(back.state.max_abs_diff(&s0) < 1e-8);
            for (_, s) in fwd.path.unwrap().iter().chain(back.path.unwrap().iter()) {
                assert_eq!(s.eta.signum(), eta.signum());
            }
        }
        let s = CharState::new(&[0.5], 0.5);
        assert_eq!(backward_flow(&f, &z, 0.5, &s, 0.0, &opts).unwrap().state, s);
    }

    #[test]
    fn backward_equals_reversed_forward_pieces() {
        let f = model("burgers_modulated", &[]);
        let z = brownian_pwl(4, 1, 5, 1.0);
        let s = CharState::new(&[0.3], 0.8);
        let opts = FlowOptions::with_steps(8);
        let a = backward_flow(&f, &z, 0.8, &s, 0.5, &opts).unwrap().state;
        let b = forward_flow(&f, &z, 0.8, &s, 0.3, &opts).unwrap().state;
        assert!(a.max_abs_diff(&b) < 1e-13);
        // Off-grid start: 0.81 is inserted into the reversed grid.
        let c = backward_flow(&f, &z, 0.81, &s, 0.5, &opts).unwrap().state;
        let d = forward_flow(&f, &z, 0.81, &s, 0.31, &opts).unwrap().state;
        assert!(c.max_abs_diff(&d) < 1e-12);
    }

    #[test]
    fn jacobian_matches_finite_differences_and_has_unit_determinant() {
        let h = 1e-4;
        for f in [model("burgers_modulated", &[]), model("diagonal_multipath", &[("dims", 2.0), ("amp", 0.4)])] {
            let z = brownian_pwl(13, f.m(), 5, 1.0);
            let s0 = CharState::new(&vec![0.2; f.n()], 0.9);
            let jac = flow_jacobian(&f, &z, 0.0, &s0, 1.0, 32).unwrap();
            assert!((determinant(&jac) - 1.0).abs() < 1e-8);
            let dim = f.n() + 1;
            for c in 0..dim {
                let mut p = s0.clone();
                let mut m = s0.clone();
                if c < f.n() {
                    p.y[c] += h;
                    m.y[c] -= h;
                } else {
                    p.eta += h;
                    m.eta -= h;
                }
                let opts = FlowOptions::with_steps(32);
                let fp = forward_flow(&f, &z, 0.0, &p, 1.0, &opts).unwrap().state;
                let fm = forward_flow(&f, &z, 0.0, &m, 1.0, &opts).unwrap().state;
                for r in 0..dim {
                    let (vp, vm) = if r < f.n() { (fp.y[r], fm.y[r]) } else { (fp.eta, fm.eta) };
                    let fd = (vp - vm) / (2.0 * h);
                    assert!((fd - jac[r][c]).abs() < 1e-6, "entry ({r},{c}): {fd} vs {}", jac[r][c]);
                }
            }
        }
        let f = model("burgers_modulated", &[]);
        let z = brownian_pwl(13, 1, 5, 1.0);
        let j0 = flow_jacobian(&f, &z, 0.5, &CharState::new(&[0.0], 1.0), 0.5, 8).unwrap();
        assert_eq!(j0, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    }

    #[test]
    fn flow_property() {
        let f = model("burgers_modulated", &[]);
        let z = brownian_pwl(21, 1, 6, 1.0);
        let s0 = CharState::new(&[-0.4], 0.6);
        let opts = FlowOptions::with_steps(32);
        let mid = forward_flow(&f, &z, 0.0, &s0, 0.375, &opts).unwrap().state;
        let two = forward_flow(&f, &z, 0.375, &mid, 0.875, &opts).unwrap().state;
        let one = forward_flow(&f, &z, 0.0, &s0, 0.875, &opts).unwrap().state;
        assert!(one.max_abs_diff(&two) < 1e-13);
    }

    #[test]
    fn blow_up_reports_last_good_time() {
        let f = model("burgers_xindep", &[]);
        let z = PwlPath::linear(&[1.0], 1.0, 4).unwrap();
        let opts = FlowOptions { blowup_bound: 10.0, ..FlowOptions::with_steps(1) };
        let err = forward_flow(&f, &z, 0.0, &CharState::new(&[0.0], 20.0), 1.0, &opts).unwrap_err();
        match err {
            FlowError::BlowUp { last_good_time, .. } => assert_eq!(last_good_time, 0.0),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn level2_stepper_converges_to_rk4() {
        let f = model("burgers_modulated", &[]);
        let z = brownian_pwl(5, 1, 4, 1.0);
        let s0 = CharState::new(&[0.1], 0.7);
        let reference = forward_flow(&f, &z, 0.0, &s0, 1.0, &FlowOptions::with_steps(64)).unwrap().state;
        let errors: Vec<f64> = [4usize, 8, 16]
            .iter()
            .map(|&k| {
                let fine = lift_pwl(&z.subdivide(k).unwrap(), 2).unwrap();
                level2_flow(&f, &fine, &s0, 0, fine.len() - 1).unwrap().max_abs_diff(&reference)
            })
            .collect();
        assert!(errors[1] < 0.3 * errors[0] && errors[2] < 0.3 * errors[1], "{errors:?}");
    }

    #[test]
    fn trajectory_csv_header() {
        let f = model("burgers_modulated", &[]);
        let z = PwlPath::linear(&[1.0], 1.0, 2).unwrap();
        let r = forward_flow(&f, &z, 0.0, &CharState::new(&[0.0], 1.0), 1.0, &FlowOptions::with_steps(2).recording())
            .unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(r.path.as_ref().unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,y1,eta\n"));
        assert_eq!(text.lines().count(), 6);
    }
}
