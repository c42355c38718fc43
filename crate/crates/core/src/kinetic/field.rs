use super::{Grid, KineticError};

/// Cell averages of the conserved quantity at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionField {
    pub t: f64,
    pub u: Vec<f64>,
}

impl SolutionField {
    pub fn zeros(grid: &Grid, t: f64) -> Self {
        Self { t, u: vec![0.0; grid.cells()] }
    }

    /// Cell-center samples of `f`.
    pub fn from_fn(grid: &Grid, t: f64, f: impl Fn(&[f64]) -> f64) -> Self {
        Self { t, u: (0..grid.cells()).map(|c| f(&grid.center(c)[..grid.n()])).collect() }
    }

    pub fn mass(&self, grid: &Grid) -> f64 {
        self.u.iter().sum::<f64>() * grid.cell_volume()
    }

    pub fn l1(&self, grid: &Grid) -> f64 {
        self.u.iter().map(|v| v.abs()).sum::<f64>() * grid.cell_volume()
    }

    /// `‖u‖₂²`.
    pub fn l2_sq(&self, grid: &Grid) -> f64 {
        self.u.iter().map(|v| v * v).sum::<f64>() * grid.cell_volume()
    }

    pub fn l1_distance(&self, other: &Self, grid: &Grid) -> f64 {
        self.u.iter().zip(&other.u).map(|(a, b)| (a - b).abs()).sum::<f64>() * grid.cell_volume()
    }

    pub fn max_abs(&self) -> f64 {
        self.u.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.u.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.u.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Total variation `Σ_d Σ |u_{i+e_d} − u_i| dx^{N−1}`.
    pub fn total_variation(&self, grid: &Grid) -> f64 {
        let mut tv = 0.0;
        for d in 0..grid.n() {
            let s = grid.stride(d);
            for c in 0..grid.cells() {
                if grid.multi_index(c)[d] + 1 < grid.nx() {
                    tv += (self.u[c + s] - self.u[c]).abs();
                }
            }
        }
        tv * grid.dx().powi(grid.n() as i32 - 1)
    }
}

/// `∫_{ξa}^{ξb} χ(ξ, u) dξ`.
pub fn chi_cell_integral(u: f64, xi_a: f64, xi_b: f64) -> f64 {
    u.clamp(xi_a, xi_b) - 0.0f64.clamp(xi_a, xi_b)
}

/// `χ(ξ, u)`: `1` on `0 ≤ ξ ≤ u`, `−1` on `u ≤ ξ ≤ 0`, else `0`.
pub fn chi(xi: f64, u: f64) -> f64 {
    if u > 0.0 && xi >= 0.0 && xi <= u {
        1.0
    } else if u < 0.0 && xi <= 0.0 && xi >= u {
        -1.0
    } else {
        0.0
    }
}

/// Cell averages of `χ(ξ, u(x))` on the `(x, ξ)` grid, row-major with ξ fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct KineticField {
    pub t: f64,
    pub nxi: usize,
    pub values: Vec<f64>,
}

impl KineticField {
    pub fn column(&self, cell: usize) -> &[f64] {
        &self.values[cell * self.nxi..(cell + 1) * self.nxi]
    }

    /// Worst violation of `sgn(ξ) f = |f| ≤ 1` and of the ξ-monotonicity of
    /// `f` on either side of zero, over all cells.
    pub fn structure_defect(&self, grid: &Grid) -> f64 {
        let mut worst: f64 = 0.0;
        for c in 0..self.values.len() / self.nxi {
            let col = self.column(c);
            for (j, &f) in col.iter().enumerate() {
                let s = grid.xi_center(j).signum();
                worst = worst.max(f.abs() - 1.0).max(f.abs() - s * f);
                // ∂_ξ f = δ(ξ) − ν: non-increasing on each side of zero.
                if j + 1 < col.len() && grid.xi_center(j).signum() == grid.xi_center(j + 1).signum() {
                    worst = worst.max(col[j + 1] - f);
                }
            }
        }
        worst
    }
}

/// `χ(·, u)` averaged over each ξ-cell, so that `Σ_j f_j Δξ = u` per x-cell.
pub fn chi_of(u: &SolutionField, grid: &Grid) -> Result<KineticField, KineticError> {
    let (lo, hi) = (grid.xi_lo(), grid.xi_hi());
    if let Some((c, &v)) = u.u.iter().enumerate().find(|(_, &v)| v < lo || v > hi) {
        return Err(KineticError::XiRangeTooSmall { value: v, cell: c, lo, hi });
    }
    let nxi = grid.nxi();
    let mut values = vec![0.0; u.u.len() * nxi];
    for (c, &v) in u.u.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        for j in 0..nxi {
            values[c * nxi + j] = chi_cell_integral(v, grid.xi_edge(j), grid.xi_edge(j + 1)) / grid.dxi();
        }
    }
    Ok(KineticField { t: u.t, nxi, values })
}

/// `u = ∫ f dξ` per x-cell.
pub fn reconstruct_u(f: &KineticField, grid: &Grid) -> SolutionField {
    let u = f.values.chunks(f.nxi).map(|col| col.iter().sum::<f64>() * grid.dxi()).collect();
    SolutionField { t: f.t, u }
}
