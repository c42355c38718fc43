use rayon::prelude::*;

use super::{chi_of, DefectLedger, Grid, KineticError, KineticField, Solution, TestFunction};
use crate::characteristics::{forward_flow, CharState, FlowOptions};
use crate::flux::FluxModel;
use crate::roughpath::PwlPath;

/// Boundary samples per face of the support box used for bounding boxes.
const FACE_SAMPLES: usize = 24;

/// The test function `ρ_{t0}(x, ξ, r) = ρ⁰((Y, ζ)_{(r, x, ξ)}(t0) − (y, η))`,
/// constant along characteristics.
#[derive(Clone, Debug)]
pub struct TransportedTest<'a> {
    pub tf: TestFunction,
    pub flux: &'a FluxModel,
    pub z: &'a PwlPath,
    pub opts: FlowOptions,
}

impl<'a> TransportedTest<'a> {
    pub fn new(tf: TestFunction, flux: &'a FluxModel, z: &'a PwlPath, steps_per_segment: usize) -> Self {
        Self { tf, flux, z, opts: FlowOptions::with_steps(steps_per_segment) }
    }

    pub fn value(&self, x: &[f64], xi: f64, r: f64) -> Result<f64, KineticError> {
        let back = forward_flow(self.flux, self.z, r, &CharState::new(x, xi), self.tf.t0, &self.opts)?;
        Ok(self.tf.rho0(&back.state.y, back.state.eta))
    }

    /// `(ρ_{t0}, ∂_ξ ρ_{t0})` at `(x, ξ, r)`.
    pub fn value_and_dxi(&self, x: &[f64], xi: f64, r: f64) -> Result<(f64, f64), KineticError> {
        let s = CharState::new(x, xi);
        let opts = self.opts.clone().with_jacobian();
        let back = forward_flow(self.flux, self.z, r, &s, self.tf.t0, &opts)?;
        let jac = back.jacobian.expect("requested");
        let p = back.state;
        let grad = self.tf.grad_rho0(&p.y, p.eta);
        let n = p.y.len();
        let dxi = (0..=n).map(|i| grad[i] * jac[i][n]).sum();
        Ok((self.tf.rho0(&p.y, p.eta), dxi))
    }

    /// Bounding box of the support of `ρ_{t0}(·, r)`, from the forward images
    /// of boundary samples of the support of `ρ⁰`, padded by 10%.
    pub fn support_bbox(&self, r: f64) -> Result<(Vec<f64>, Vec<f64>), KineticError> {
        let (lo, hi) = self.tf.support();
        let dim = lo.len();
        let mut blo = vec![f64::INFINITY; dim];
        let mut bhi = vec![f64::NEG_INFINITY; dim];
        let grid_pts = crate::rng::halton(FACE_SAMPLES, dim.saturating_sub(1).max(1));
        let mut samples = Vec::new();
        for face in 0..dim {
            for side in [0.0, 1.0] {
                // Face corners plus Halton points on the face.
                for p in grid_pts.iter().map(|p| p.as_slice()).chain([[0.0; 1].as_slice(), [1.0; 1].as_slice()]) {
                    let mut pt = Vec::with_capacity(dim);
                    let mut k = 0;
                    for d in 0..dim {
                        let s = if d == face {
                            side
                        } else {
                            let v = p.get(k).copied().unwrap_or(p[0]);
                            k += 1;
                            v
                        };
                        pt.push(lo[d] + s * (hi[d] - lo[d]));
                    }
                    samples.push(pt);
                }
            }
        }
        let images: Vec<Result<CharState, KineticError>> = samples
            .par_iter()
            .map(|pt| {
                let s = CharState::new(&pt[..dim - 1], pt[dim - 1]);
                Ok(forward_flow(self.flux, self.z, self.tf.t0, &s, r, &self.opts)?.state)
            })
            .collect();
        for img in images {
            let img = img?;
            for d in 0..dim {
                let v = if d + 1 < dim { img.y[d] } else { img.eta };
                blo[d] = blo[d].min(v);
                bhi[d] = bhi[d].max(v);
            }
        }
        for d in 0..dim {
            let pad = 0.1 * (bhi[d] - blo[d]);
            blo[d] -= pad;
            bhi[d] += pad;
        }
        Ok((blo, bhi))
    }
}

/// Cell and ξ-index ranges whose centers fall in the box.
fn cells_in_box(grid: &Grid, lo: &[f64], hi: &[f64]) -> (Vec<usize>, std::ops::Range<usize>) {
    let n = grid.n();
    let cells = (0..grid.cells())
        .filter(|&c| {
            let x = grid.center(c);
            (0..n).all(|d| x[d] >= lo[d] && x[d] <= hi[d])
        })
        .collect();
    let j0 = ((lo[n] - grid.xi_lo()) / grid.dxi() - 0.5).floor().max(0.0) as usize;
    let j1 = (((hi[n] - grid.xi_lo()) / grid.dxi() + 0.5).ceil().max(0.0) as usize).min(grid.nxi());
    (cells, j0.min(j1)..j1)
}

/// `ρ_{t0}` at time `t` for each `(x, ξ)` point.
pub fn transport_test_function(
    tf: &TestFunction,
    flux: &FluxModel,
    z: &PwlPath,
    t: f64,
    points: &[(Vec<f64>, f64)],
    steps_per_segment: usize,
) -> Result<Vec<f64>, KineticError> {
    let tt = TransportedTest::new(tf.clone(), flux, z, steps_per_segment);
    points.par_iter().map(|(x, xi)| tt.value(x, *xi, t)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvolutionRoute {
    /// Midpoint rule over the `(x, ξ)` cells of the field.
    Direct,
    /// `∫ f((Y, ζ)_{(t0, x', ξ')}(t)) ρ⁰(x' − y, ξ' − η) dx' dξ'` with `q` midpoint
    /// nodes per axis on the support of `ρ⁰`.
    ChangeOfVariables { q: usize },
}

fn convolve_one(
    f: &KineticField,
    grid: &Grid,
    tt: &TransportedTest,
    t: f64,
    route: ConvolutionRoute,
) -> Result<f64, KineticError> {
    let n = grid.n();
    match route {
        ConvolutionRoute::Direct => {
            let (lo, hi) = tt.support_bbox(t)?;
            let (cells, xis) = cells_in_box(grid, &lo, &hi);
            let mut sum = 0.0;
            for c in cells {
                let x = grid.center(c);
                for j in xis.clone() {
                    let fv = f.column(c)[j];
                    if fv != 0.0 {
                        sum += fv * tt.value(&x[..n], grid.xi_center(j), t)?;
                    }
                }
            }
            Ok(sum * grid.cell_volume() * grid.dxi())
        }
        ConvolutionRoute::ChangeOfVariables { q } => {
            let (lo, hi) = tt.tf.support();
            let dim = n + 1;
            let h: Vec<f64> = (0..dim).map(|d| (hi[d] - lo[d]) / q as f64).collect();
            let weight: f64 = h.iter().product();
            let total = q.pow(dim as u32);
            let mut sum = 0.0;
            for idx in 0..total {
                let mut p = vec![0.0; dim];
                let mut rem = idx;
                for d in (0..dim).rev() {
                    p[d] = lo[d] + ((rem % q) as f64 + 0.5) * h[d];
                    rem /= q;
                }
                let r0 = tt.tf.rho0(&p[..n], p[n]);
                if r0 == 0.0 {
                    continue;
                }
                let s = CharState::new(&p[..n], p[n]);
                let img = forward_flow(tt.flux, tt.z, tt.tf.t0, &s, t, &tt.opts)?.state;
                if let (Some(c), Some(j)) = (grid.locate(&img.y), grid.locate_xi(img.eta)) {
                    sum += f.column(c)[j] * r0;
                }
            }
            Ok(sum * weight)
        }
    }
}

/// `(ρ_{t0} ∗ f)(y, η, t)` for each target `(y, η)`; `tf` supplies `ε` and `t0`.
pub fn convolve_along_char(
    f: &KineticField,
    grid: &Grid,
    tf: &TestFunction,
    flux: &FluxModel,
    z: &PwlPath,
    t: f64,
    targets: &[(Vec<f64>, f64)],
    route: ConvolutionRoute,
    steps_per_segment: usize,
) -> Result<Vec<f64>, KineticError> {
    targets
        .par_iter()
        .map(|(y, eta)| {
            let tt = TransportedTest::new(tf.centered(y, *eta), flux, z, steps_per_segment);
            convolve_one(f, grid, &tt, t, route)
        })
        .collect()
}

/// Terms of the integrated kinetic identity between two snapshots.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct ResidualTerms {
    pub at_t: f64,
    pub at_s: f64,
    pub defect: f64,
    pub residual: f64,
}

/// `|ρ_{t0}∗χ(t) − ρ_{t0}∗χ(s) + ∫_s^t ∫ ∂_ξ ρ_{t0} m|` between snapshots
/// `s_idx < t_idx`, with `m` read from the ξ-resolved part of `ledger`
/// and `∂_ξ ρ_{t0}` evaluated at each step's midpoint time.
pub fn kinetic_residual(
    solution: &Solution,
    ledger: &DefectLedger,
    grid: &Grid,
    tf: &TestFunction,
    flux: &FluxModel,
    z: &PwlPath,
    s_idx: usize,
    t_idx: usize,
    steps_per_segment: usize,
) -> Result<ResidualTerms, KineticError> {
    let snaps = &solution.snapshots;
    if s_idx >= snaps.len() {
        return Err(KineticError::NotASnapshot(s_idx));
    }
    if t_idx >= snaps.len() || t_idx < s_idx {
        return Err(KineticError::NotASnapshot(t_idx));
    }
    let tt = TransportedTest::new(tf.clone(), flux, z, steps_per_segment);
    let conv = |k: usize| -> Result<f64, KineticError> {
        let f = chi_of(&snaps[k], grid)?;
        convolve_one(&f, grid, &tt, snaps[k].t, ConvolutionRoute::Direct)
    };
    let at_t = conv(t_idx)?;
    let at_s = conv(s_idx)?;
    let (s, t) = (snaps[s_idx].t, snaps[t_idx].t);
    let n = grid.n();
    let steps: Vec<_> = ledger
        .steps
        .iter()
        .filter(|st| st.t_start >= s - 1e-12 && st.t_end <= t + 1e-12 && !st.kinetic.is_empty())
        .collect();
    let per_step: Vec<Result<f64, KineticError>> = steps
        .par_iter()
        .map(|st| {
            let r = 0.5 * (st.t_start + st.t_end);
            let (lo, hi) = tt.support_bbox(r)?;
            let mut acc = 0.0;
            for m in &st.kinetic {
                let x = grid.center(m.cell as usize);
                let xi = grid.xi_edge(m.edge as usize);
                if (0..n).any(|d| x[d] < lo[d] || x[d] > hi[d]) || xi < lo[n] || xi > hi[n] {
                    continue;
                }
                acc += tt.value_and_dxi(&x[..n], xi, r)?.1 * m.mass;
            }
            Ok(acc)
        })
        .collect();
    let mut defect = 0.0;
    for v in per_step {
        defect += v?;
    }
    Ok(ResidualTerms { at_t, at_s, defect, residual: (at_t - at_s + defect).abs() })
}
