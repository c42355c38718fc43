use rayon::prelude::*;

use super::{chi, chi_cell_integral, Grid, KineticError, SolutionField};
use crate::flux::{FluxModel, Profile, MAX_DIM};

const PARALLEL_CELLS: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    EngquistOsher,
    Rusanov,
}

#[derive(Clone, Debug)]
pub struct StepOptions {
    pub scheme: Scheme,
    pub cfl: f64,
    pub max_substeps: usize,
    /// Resolve the entropy defect in ξ (Engquist–Osher only).
    pub record_kinetic: bool,
    /// Largest `|u|` tolerated in boundary cells before the box is declared too small.
    pub boundary_tol: f64,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            scheme: Scheme::EngquistOsher,
            cfl: 0.45,
            max_substeps: 1_000_000,
            record_kinetic: false,
            boundary_tol: 1e-9,
        }
    }
}

/// Result of advancing one constant-velocity step.
#[derive(Clone, Debug)]
pub struct StepOutput {
    pub u: Vec<f64>,
    /// Quadratic-entropy dissipation integrated over each x-cell, clamped at 0.
    pub dissipation: Vec<f64>,
    /// Magnitude of the negative parts removed by the clamp.
    pub clamp_residual: f64,
    /// Entropy defect at ξ-edges, `(nxi + 1)` per x-cell, integrated over the
    /// x-cell and one ξ-cell and clamped at 0.
    pub kinetic: Option<Vec<f64>>,
    pub kinetic_clamp_residual: f64,
    pub substeps: usize,
}

/// `(F⁺, F⁻)` of the Engquist–Osher splitting of `c q(u)`.
fn eo_split(profile: Profile, c: f64, u: f64) -> (f64, f64) {
    let (cp, cm) = (c.max(0.0), c.min(0.0));
    match profile {
        Profile::Quadratic => {
            let (up, um) = (u.max(0.0), u.min(0.0));
            (0.5 * (cp * up * up + cm * um * um), 0.5 * (cm * up * up + cp * um * um))
        }
        Profile::Linear => (cp * u, cm * u),
    }
}

/// Entropy-flux counterpart of `eo_split` for `η(u) = u²/2`.
fn eo_entropy_split(profile: Profile, c: f64, u: f64) -> (f64, f64) {
    let (cp, cm) = (c.max(0.0), c.min(0.0));
    match profile {
        Profile::Quadratic => {
            let (up, um) = (u.max(0.0), u.min(0.0));
            let (p3, m3) = (up * up * up / 3.0, um * um * um / 3.0);
            (cp * p3 + cm * m3, cm * p3 + cp * m3)
        }
        Profile::Linear => (0.5 * cp * u * u, 0.5 * cm * u * u),
    }
}

struct Faces {
    /// `lo[d][cell]`, `hi[d][cell]`: coefficient `Σ_j G^{dj} Δz_j` on the faces of a cell.
    lo: Vec<Vec<f64>>,
    hi: Vec<Vec<f64>>,
    max_abs: [f64; MAX_DIM],
}

fn faces(flux: &FluxModel, dz: &[f64], grid: &Grid) -> Faces {
    let n = grid.n();
    let coef = |x: &[f64], d: usize| {
        let g = flux.g(x);
        (0..flux.m()).map(|j| g[d][j] * dz[j]).sum::<f64>()
    };
    let mut lo = Vec::with_capacity(n);
    let mut hi = Vec::with_capacity(n);
    let mut max_abs = [0.0; MAX_DIM];
    for d in 0..n {
        let (l, h): (Vec<f64>, Vec<f64>) = (0..grid.cells())
            .map(|c| {
                let mut x = grid.center(c);
                x[d] -= 0.5 * grid.dx();
                let a = coef(&x[..n], d);
                x[d] += grid.dx();
                (a, coef(&x[..n], d))
            })
            .unzip();
        max_abs[d] = l.iter().chain(&h).fold(0.0f64, |m, v| m.max(v.abs()));
        lo.push(l);
        hi.push(h);
    }
    Faces { lo, hi, max_abs }
}

fn char_speed(profile: Profile, u: f64) -> f64 {
    profile.dq(u).abs()
}

struct CellUpdate {
    u: f64,
    dissipation: f64,
    kinetic: Vec<(usize, f64)>,
}

/// Advances `u` by one step of duration `dt` with constant signal velocity
/// `zdot`, inserting CFL substeps as needed.
pub fn fv_step(
    u: &SolutionField,
    flux: &FluxModel,
    zdot: &[f64],
    dt: f64,
    grid: &Grid,
    opts: &StepOptions,
) -> Result<StepOutput, KineticError> {
    if zdot.len() != flux.m() {
        return Err(KineticError::DimensionMismatch { expected: flux.m(), found: zdot.len() });
    }
    if grid.n() != flux.n() {
        return Err(KineticError::DimensionMismatch { expected: flux.n(), found: grid.n() });
    }
    if opts.record_kinetic && opts.scheme != Scheme::EngquistOsher {
        return Err(KineticError::InvalidGrid("kinetic recording requires the Engquist–Osher scheme".into()));
    }
    let dz: Vec<f64> = zdot.iter().map(|v| v * dt).collect();
    let full = faces(flux, &dz, grid);
    let profile = flux.profile();
    let n = grid.n();
    let cells = grid.cells();
    let vol = grid.cell_volume();
    let area = vol / grid.dx();
    let nxi = grid.nxi();
    let mut state = u.u.clone();
    let mut dissipation = vec![0.0; cells];
    let mut kinetic = opts.record_kinetic.then(|| vec![0.0; cells * (nxi + 1)]);
    let mut remaining = 1.0f64;
    let mut substeps = 0;
    let mut clamp_residual = 0.0;
    let strides: Vec<usize> = (0..n).map(|d| grid.stride(d)).collect();
    while remaining > 0.0 {
        if let Some(c) = (0..cells).find(|&c| grid.on_boundary(c) && state[c].abs() > opts.boundary_tol) {
            return Err(KineticError::DomainTooSmall { cell: c, value: state[c], t: u.t + (1.0 - remaining) * dt });
        }
        let smax = state.iter().fold(0.0f64, |m, &v| m.max(char_speed(profile, v)));
        let speed: f64 = full.max_abs[..n].iter().sum::<f64>() * smax;
        let theta = if speed > 0.0 { (opts.cfl * grid.dx() / speed).min(remaining) } else { remaining };
        let theta = if remaining - theta <= 1e-14 { remaining } else { theta };
        substeps += 1;
        if substeps > opts.max_substeps {
            return Err(KineticError::CflViolation { substeps: opts.max_substeps });
        }
        let old = &state;
        let neighbor = |c: usize, d: usize, up: bool| -> f64 {
            let i = grid.multi_index(c)[d];
            if up {
                if i + 1 < grid.nx() {
                    old[c + strides[d]]
                } else {
                    0.0
                }
            } else if i > 0 {
                old[c - strides[d]]
            } else {
                0.0
            }
        };
        let numerical = |c: f64, ul: f64, ur: f64| -> (f64, f64) {
            match opts.scheme {
                Scheme::EngquistOsher => {
                    let (fp, _) = eo_split(profile, c, ul);
                    let (_, fm) = eo_split(profile, c, ur);
                    let (gp, _) = eo_entropy_split(profile, c, ul);
                    let (_, gm) = eo_entropy_split(profile, c, ur);
                    (fp + fm, gp + gm)
                }
                Scheme::Rusanov => {
                    let alpha = c.abs() * char_speed(profile, ul).max(char_speed(profile, ur));
                    let f = 0.5 * c * (profile.q(ul) + profile.q(ur)) - 0.5 * alpha * (ur - ul);
                    let g = 0.5 * c * (profile.entropy_flux(ul) + profile.entropy_flux(ur))
                        - 0.25 * alpha * (ur * ur - ul * ul);
                    (f, g)
                }
            }
        };
        let update = |c: usize| -> CellUpdate {
            let ui = old[c];
            let mut df = 0.0;
            let mut dg = 0.0;
            let mut dcoef = 0.0;
            for d in 0..n {
                let (clo, chi_) = (theta * full.lo[d][c], theta * full.hi[d][c]);
                let (fh, gh) = numerical(chi_, ui, neighbor(c, d, true));
                let (fl, gl) = numerical(clo, neighbor(c, d, false), ui);
                df += fh - fl;
                dg += gh - gl;
                dcoef += (chi_ - clo) / grid.dx();
            }
            let un = ui - df / grid.dx();
            let source = ui * profile.q(ui) - profile.entropy_flux(ui);
            let diss = vol * 0.5 * (ui * ui - un * un) - area * dg - vol * dcoef * source;
            let mut kin = Vec::new();
            if opts.record_kinetic {
                // Outside the range spanned by 0 and the stencil values every
                // clamp is constant, so the defect there vanishes.
                let mut lo = ui.min(un).min(0.0);
                let mut hi = ui.max(un).max(0.0);
                for d in 0..n {
                    for v in [neighbor(c, d, true), neighbor(c, d, false)] {
                        lo = lo.min(v);
                        hi = hi.max(v);
                    }
                }
                if hi > lo {
                    let j0 = grid.locate_xi(lo).unwrap_or(0);
                    let j1 = grid.locate_xi(hi).map_or(nxi, |j| j + 1);
                    let mut running = 0.0;
                    for j in j0..j1 {
                        let (xa, xb) = (grid.xi_edge(j), grid.xi_edge(j + 1));
                        let zero = 0.0f64.clamp(xa, xb);
                        let mut dphi = 0.0;
                        for d in 0..n {
                            let (clo, chi_) = (theta * full.lo[d][c], theta * full.hi[d][c]);
                            let phi = |c: f64, ul: f64, ur: f64| {
                                eo_split(profile, c, ul.clamp(xa, xb)).0 - eo_split(profile, c, zero).0
                                    + eo_split(profile, c, ur.clamp(xa, xb)).1
                                    - eo_split(profile, c, zero).1
                            };
                            dphi += phi(chi_, ui, neighbor(c, d, true)) - phi(clo, neighbor(c, d, false), ui);
                        }
                        let r = -(chi_cell_integral(un, xa, xb) - chi_cell_integral(ui, xa, xb)) - dphi / grid.dx();
                        running += r;
                        let xe = grid.xi_edge(j + 1);
                        let m_e = -running - dcoef * profile.q(xe) * chi(xe, ui);
                        kin.push((j + 1, m_e * vol * grid.dxi()));
                    }
                }
            }
            CellUpdate { u: un, dissipation: diss, kinetic: kin }
        };
        let updates: Vec<CellUpdate> = if cells >= PARALLEL_CELLS {
            (0..cells).into_par_iter().map(update).collect()
        } else {
            (0..cells).map(update).collect()
        };
        for (c, up) in updates.into_iter().enumerate() {
            state[c] = up.u;
            dissipation[c] += up.dissipation;
            if let Some(k) = kinetic.as_mut() {
                for (e, v) in up.kinetic {
                    k[c * (nxi + 1) + e] += v;
                }
            }
        }
        remaining -= theta;
        if remaining <= 1e-14 {
            remaining = 0.0;
        }
    }
    if state.iter().any(|v| !v.is_finite()) {
        return Err(KineticError::NonFinite { t: u.t + dt });
    }
    for d in dissipation.iter_mut() {
        if *d < 0.0 {
            clamp_residual += -*d;
            *d = 0.0;
        }
    }
    let mut kinetic_clamp_residual = 0.0;
    if let Some(k) = kinetic.as_mut() {
        for v in k.iter_mut() {
            if *v < 0.0 {
                kinetic_clamp_residual += -*v;
                *v = 0.0;
            }
        }
    }
    Ok(StepOutput { u: state, dissipation, clamp_residual, kinetic, kinetic_clamp_residual, substeps })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn model(name: &str) -> FluxModel {
        FluxModel::builtin(name, &BTreeMap::new()).unwrap()
    }

    fn grid(nx: usize) -> Grid {
        Grid::new(1, nx, -2.0, 2.0, 40, -1.5, 1.5).unwrap()
    }

    fn bump(g: &Grid) -> SolutionField {
        SolutionField::from_fn(g, 0.0, |x| {
            if x[0].abs() < 1.0 {
                (std::f64::consts::FRAC_PI_2 * x[0]).cos().powi(2)
            } else {
                0.0
            }
        })
    }

    #[test]
    fn eo_split_sums_to_flux() {
        for profile in [Profile::Quadratic, Profile::Linear] {
            for &c in &[-1.3, 0.0, 0.7] {
                for &u in &[-2.0, -0.1, 0.0, 0.4, 1.5] {
                    let (p, m) = eo_split(profile, c, u);
                    assert!((p + m - c * profile.q(u)).abs() < 1e-15);
                    let (gp, gm) = eo_entropy_split(profile, c, u);
                    assert!((gp + gm - c * profile.entropy_flux(u)).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn constant_interior_state_is_steady() {
        let f = model("burgers_xindep");
        let g = grid(40);
        let mut u = SolutionField::zeros(&g, 0.0);
        for c in 5..35 {
            u.u[c] = 0.7;
        }
        let out = fv_step(&u, &f, &[0.0], 1.0, &g, &StepOptions::default()).unwrap();
        assert_eq!(out.u, u.u);
        let before = u.u[10..30].to_vec();
        let out = fv_step(&u, &f, &[1.0], 0.01, &g, &StepOptions::default()).unwrap();
        assert_eq!(&out.u[10..30], &before[..]);
    }

    #[test]
    fn conserves_mass_and_dissipates() {
        for name in ["burgers_xindep", "burgers_modulated"] {
            let f = model(name);
            let g = grid(200);
            let u = bump(&g);
            for zdot in [1.0, -1.0] {
                let opts = StepOptions { record_kinetic: true, ..StepOptions::default() };
                let out = fv_step(&u, &f, &[zdot], 0.8, &g, &opts).unwrap();
                let next = SolutionField { t: 0.8, u: out.u.clone() };
                assert!((next.mass(&g) - u.mass(&g)).abs() < 1e-12);
                assert!(out.substeps > 1);
                let total: f64 = out.dissipation.iter().sum();
                assert!(total > 0.0);
                let kin: f64 = out.kinetic.as_ref().unwrap().iter().sum();
                // ∫ m dξ is the quadratic-entropy dissipation.
                assert!((kin - total).abs() < 0.1 * total, "{name}: kinetic {kin} vs {total}");
            }
        }
    }

    #[test]
    fn kinetic_defect_is_nonnegative_for_x_independent_flux() {
        let f = model("burgers_xindep");
        let g = grid(200);
        let u = bump(&g);
        let opts = StepOptions { record_kinetic: true, ..StepOptions::default() };
        let out = fv_step(&u, &f, &[1.0], 1.5, &g, &opts).unwrap();
        let kin: f64 = out.kinetic.unwrap().iter().sum();
        assert!(out.kinetic_clamp_residual <= 1e-12 * kin.max(1.0), "{}", out.kinetic_clamp_residual);
        assert!(out.clamp_residual <= 1e-12);
    }

    #[test]
    fn riemann_shock_speed() {
        // u_l = 1, u_r = 0 moves at speed 1/2.
        let f = model("burgers_xindep");
        let g = Grid::new(1, 400, -2.0, 2.0, 8, -1.0, 1.5).unwrap();
        let u = SolutionField::from_fn(&g, 0.0, |x| if x[0] > -1.5 && x[0] < 0.0 { 1.0 } else { 0.0 });
        let t = 1.0;
        let out = fv_step(&u, &f, &[1.0], t, &g, &StepOptions::default()).unwrap();
        let front = (0..g.cells()).filter(|&c| g.center(c)[0] > -0.5).find(|&c| out.u[c] < 0.5).unwrap();
        let x = g.center(front)[0];
        assert!((x - 0.5).abs() < 3.0 * g.dx(), "front at {x}");
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = grid(50);
        let u = SolutionField::zeros(&g, 0.0);
        let out = fv_step(&u, &model("burgers_modulated"), &[2.0], 1.0, &g, &StepOptions::default()).unwrap();
        assert!(out.u.iter().all(|&v| v == 0.0));
        assert!(out.dissipation.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn boundary_contact_is_an_error() {
        let g = grid(50);
        let u = SolutionField::from_fn(&g, 0.0, |_| 1.0);
        let err = fv_step(&u, &model("burgers_xindep"), &[1.0], 0.1, &g, &StepOptions::default()).unwrap_err();
        assert!(matches!(err, KineticError::DomainTooSmall { .. }));
    }

    #[test]
    fn substep_cap() {
        let g = grid(50);
        let u = bump(&g);
        let opts = StepOptions { max_substeps: 2, ..StepOptions::default() };
        let err = fv_step(&u, &model("burgers_xindep"), &[1.0], 1.0, &g, &opts).unwrap_err();
        assert!(matches!(err, KineticError::CflViolation { .. }));
    }

    #[test]
    fn rusanov_agrees_with_eo_to_first_order() {
        let f = model("burgers_modulated");
        let g = grid(400);
        let u = bump(&g);
        let eo = fv_step(&u, &f, &[1.0], 0.5, &g, &StepOptions::default()).unwrap();
        let ru = fv_step(&u, &f, &[1.0], 0.5, &g, &StepOptions { scheme: Scheme::Rusanov, ..StepOptions::default() })
            .unwrap();
        let d = SolutionField { t: 0.5, u: eo.u }.l1_distance(&SolutionField { t: 0.5, u: ru.u }, &g);
        assert!(d < 20.0 * g.dx(), "{d}");
    }

    #[test]
    fn two_dimensional_conservation() {
        let f = FluxModel::builtin("diagonal_multipath", &[("dims".to_string(), 2.0)].into_iter().collect()).unwrap();
        let g = Grid::new(2, 40, -2.0, 2.0, 20, -1.5, 1.5).unwrap();
        let u = SolutionField::from_fn(&g, 0.0, |x| if x[0].hypot(x[1]) < 1.0 { 1.0 - x[0].hypot(x[1]) } else { 0.0 });
        let out = fv_step(&u, &f, &[0.6, -0.4], 1.0, &g, &StepOptions::default()).unwrap();
        let next = SolutionField { t: 1.0, u: out.u };
        assert!((next.mass(&g) - u.mass(&g)).abs() < 1e-12);
        assert!(next.l1(&g) <= u.l1(&g) + 1e-12);
    }
}
