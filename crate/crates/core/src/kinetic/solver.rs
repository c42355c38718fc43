use std::io::Write;

use super::{fv_step, Grid, KineticError, SolutionField, StepOptions};
use crate::characteristics::{forward_flow, CharState, FlowOptions};
use crate::flux::FluxModel;
use crate::rng;
use crate::roughpath::PwlPath;

/// Entropy defect at one `(x-cell, ξ-edge)`, integrated over the step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KineticMass {
    pub cell: u32,
    pub edge: u32,
    pub mass: f64,
}

/// Defect accumulated over one linear piece of the driver.
#[derive(Clone, Debug, PartialEq)]
pub struct LedgerStep {
    pub step: usize,
    pub t_start: f64,
    pub t_end: f64,
    /// Quadratic-entropy dissipation per x-cell.
    pub cells: Vec<f64>,
    pub total: f64,
    pub clamp_residual: f64,
    /// Nonzero ξ-resolved masses, present when recording was requested.
    pub kinetic: Vec<KineticMass>,
    pub kinetic_clamp_residual: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DefectLedger {
    pub steps: Vec<LedgerStep>,
    pub total_mass: f64,
    pub clamp_residual: f64,
    pub kinetic_clamp_residual: f64,
}

impl DefectLedger {
    /// Mass dissipated up to and including step `k`.
    pub fn cumulative(&self, k: usize) -> f64 {
        self.steps[..=k].iter().map(|s| s.total).sum()
    }

    pub fn kinetic_total(&self) -> f64 {
        self.steps.iter().flat_map(|s| &s.kinetic).map(|m| m.mass).sum()
    }

    /// The same ledger with every mass set to zero.
    pub fn zeroed(&self) -> Self {
        let steps = self
            .steps
            .iter()
            .map(|s| LedgerStep { cells: vec![0.0; s.cells.len()], total: 0.0, kinetic: Vec::new(), ..s.clone() })
            .collect();
        Self {
            steps,
            total_mass: 0.0,
            clamp_residual: self.clamp_residual,
            kinetic_clamp_residual: self.kinetic_clamp_residual,
        }
    }

    /// CSV `step,t,total_mass,clamp_residual` with cumulative columns.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["step", "t", "total_mass", "clamp_residual"])?;
        let (mut mass, mut clamp) = (0.0, 0.0);
        for s in &self.steps {
            mass += s.total;
            clamp += s.clamp_residual;
            w.write_record([s.step.to_string(), s.t_end.to_string(), mass.to_string(), clamp.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct SolveOptions {
    pub step: StepOptions,
}

#[derive(Clone, Debug)]
pub struct Solution {
    /// Snapshot at the start time and at every segment endpoint.
    pub snapshots: Vec<SolutionField>,
    pub ledger: DefectLedger,
    pub substeps: usize,
}

impl Solution {
    pub fn last(&self) -> &SolutionField {
        self.snapshots.last().expect("at least the initial snapshot")
    }

    /// CSV `t,x1..xN,u` with one row per snapshot and cell.
    pub fn write_snapshots_csv<W: Write>(&self, grid: &Grid, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=grid.n()).map(|i| format!("x{i}")));
        header.push("u".into());
        w.write_record(&header)?;
        for snap in &self.snapshots {
            for (c, u) in snap.u.iter().enumerate() {
                let x = grid.center(c);
                let mut row = vec![snap.t.to_string()];
                row.extend(x[..grid.n()].iter().map(f64::to_string));
                row.push(u.to_string());
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs the finite-volume scheme over each linear piece of `z` on
/// `[z.start_time(), t_end]`, with constant signal velocity per piece.
pub fn solve_pathwise(
    u0: &SolutionField,
    flux: &FluxModel,
    z: &PwlPath,
    grid: &Grid,
    t_end: f64,
    opts: &SolveOptions,
) -> Result<Solution, KineticError> {
    if u0.u.len() != grid.cells() {
        return Err(KineticError::DimensionMismatch { expected: grid.cells(), found: u0.u.len() });
    }
    if z.dim() != flux.m() {
        return Err(KineticError::DimensionMismatch { expected: flux.m(), found: z.dim() });
    }
    let t_start = z.start_time();
    let mut current = SolutionField { t: t_start, u: u0.u.clone() };
    let mut snapshots = vec![current.clone()];
    let mut ledger = DefectLedger::default();
    let mut substeps = 0;
    let nxi = grid.nxi();
    for (k, (ta, tb, inc)) in z.pieces(t_start, t_end).into_iter().enumerate() {
        let dt = tb - ta;
        let zdot: Vec<f64> = inc.iter().map(|v| v / dt).collect();
        let out = fv_step(&current, flux, &zdot, dt, grid, &opts.step)?;
        substeps += out.substeps;
        let total: f64 = out.dissipation.iter().sum();
        let kinetic = out
            .kinetic
            .map(|dense| {
                dense
                    .iter()
                    .enumerate()
                    .filter(|(_, &m)| m > 0.0)
                    .map(|(i, &mass)| KineticMass { cell: (i / (nxi + 1)) as u32, edge: (i % (nxi + 1)) as u32, mass })
                    .collect()
            })
            .unwrap_or_default();
        ledger.total_mass += total;
        ledger.clamp_residual += out.clamp_residual;
        ledger.kinetic_clamp_residual += out.kinetic_clamp_residual;
        ledger.steps.push(LedgerStep {
            step: k,
            t_start: ta,
            t_end: tb,
            cells: out.dissipation,
            total,
            clamp_residual: out.clamp_residual,
            kinetic,
            kinetic_clamp_residual: out.kinetic_clamp_residual,
        });
        current = SolutionField { t: tb, u: out.u };
        snapshots.push(current.clone());
    }
    Ok(Solution { snapshots, ledger, substeps })
}

/// Largest `|ζ(t) − η|` along `samples` characteristics started at Halton
/// points of `[x_lo, x_hi]^N × [u_min, u_max]` and run over the whole driver.
pub fn xi_excursion(
    flux: &FluxModel,
    z: &PwlPath,
    x_lo: f64,
    x_hi: f64,
    u_min: f64,
    u_max: f64,
    samples: usize,
    steps_per_segment: usize,
) -> Result<f64, KineticError> {
    let n = flux.n();
    let mut lo = vec![x_lo; n];
    let mut hi = vec![x_hi; n];
    lo.push(u_min.min(0.0));
    hi.push(u_max.max(0.0));
    let opts = FlowOptions::with_steps(steps_per_segment).recording();
    let mut worst: f64 = 0.0;
    for p in rng::halton_in_box(samples, &lo, &hi) {
        let s0 = CharState::new(&p[..n], p[n]);
        let r = forward_flow(flux, z, z.start_time(), &s0, z.end_time(), &opts)?;
        for (_, s) in r.path.unwrap_or_default() {
            worst = worst.max((s.eta - p[n]).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::roughpath::brownian_pwl;
    use std::collections::BTreeMap;

    fn model(name: &str) -> FluxModel {
        FluxModel::builtin(name, &BTreeMap::new()).unwrap()
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
    fn linear_driver_matches_single_deterministic_solve() {
        let f = model("burgers_modulated");
        let g = Grid::new(1, 200, -4.0, 4.0, 20, -1.5, 1.5).unwrap();
        let u0 = bump(&g);
        let z = PwlPath::linear(&[1.0], 1.0, 4).unwrap();
        let sol = solve_pathwise(&u0, &f, &z, &g, 1.0, &SolveOptions::default()).unwrap();
        assert_eq!(sol.snapshots.len(), 5);
        let mut u = u0.clone();
        for _ in 0..4 {
            let out = fv_step(&u, &f, &[1.0], 0.25, &g, &StepOptions::default()).unwrap();
            u = SolutionField { t: u.t + 0.25, u: out.u };
        }
        assert_eq!(sol.last().u, u.u);
    }

    #[test]
    fn brownian_solve_conserves_and_contracts_l1() {
        let f = model("burgers_modulated");
        let g = Grid::new(1, 200, -5.0, 5.0, 20, -2.0, 2.0).unwrap();
        let u0 = bump(&g);
        let z = brownian_pwl(42, 1, 6, 1.0);
        let sol = solve_pathwise(&u0, &f, &z, &g, 1.0, &SolveOptions::default()).unwrap();
        let m0 = u0.mass(&g);
        let l0 = u0.l1(&g);
        for s in &sol.snapshots {
            assert!((s.mass(&g) - m0).abs() < 1e-12);
            assert!(s.l1(&g) <= l0 + 10.0 * f64::EPSILON * g.cells() as f64);
        }
        assert!(sol.ledger.steps.iter().all(|s| s.cells.iter().all(|&m| m >= 0.0)));
        let sum: f64 = sol.ledger.steps.iter().map(|s| s.total).sum();
        assert!((sum - sol.ledger.total_mass).abs() < 1e-14);
    }

    #[test]
    fn zero_data() {
        let f = model("burgers_modulated");
        let g = Grid::new(1, 50, -2.0, 2.0, 8, -1.0, 1.0).unwrap();
        let z = brownian_pwl(1, 1, 4, 1.0);
        let sol = solve_pathwise(&SolutionField::zeros(&g, 0.0), &f, &z, &g, 1.0, &SolveOptions::default()).unwrap();
        assert!(sol.snapshots.iter().all(|s| s.u.iter().all(|&v| v == 0.0)));
        assert_eq!(sol.ledger.total_mass, 0.0);
    }

    #[test]
    fn small_box_is_reported() {
        let f = model("burgers_xindep");
        let g = Grid::new(1, 50, -1.2, 1.2, 8, -1.0, 1.0).unwrap();
        let z = PwlPath::linear(&[3.0], 1.0, 4).unwrap();
        let err = solve_pathwise(&bump(&g), &f, &z, &g, 1.0, &SolveOptions::default()).unwrap_err();
        assert!(matches!(err, KineticError::DomainTooSmall { .. }));
    }

    #[test]
    fn excursion_vanishes_for_x_independent_flux() {
        let z = brownian_pwl(3, 1, 5, 1.0);
        assert_eq!(xi_excursion(&model("burgers_xindep"), &z, -1.0, 1.0, 0.0, 1.0, 100, 4).unwrap(), 0.0);
        assert!(xi_excursion(&model("burgers_modulated"), &z, -1.0, 1.0, 0.0, 1.0, 100, 4).unwrap() > 0.0);
    }

    #[test]
    fn ledger_csv_and_zeroing() {
        let f = model("burgers_xindep");
        let g = Grid::new(1, 100, -3.0, 3.0, 20, -1.5, 1.5).unwrap();
        let z = PwlPath::linear(&[1.0], 2.0, 3).unwrap();
        let opts = SolveOptions { step: StepOptions { record_kinetic: true, ..StepOptions::default() } };
        let sol = solve_pathwise(&bump(&g), &f, &z, &g, 2.0, &opts).unwrap();
        assert!(sol.ledger.kinetic_total() > 0.0);
        let z0 = sol.ledger.zeroed();
        assert_eq!(z0.total_mass, 0.0);
        assert_eq!(z0.kinetic_total(), 0.0);
        let mut buf = Vec::new();
        sol.ledger.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("step,t,total_mass,clamp_residual\n"));
        assert_eq!(text.lines().count(), 4);
        let mut buf = Vec::new();
        sol.write_snapshots_csv(&g, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 4 * 100);
    }
}
