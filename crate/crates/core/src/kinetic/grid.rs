use super::KineticError;
use crate::flux::{Vec3, MAX_DIM};

/// Uniform grid on `[x_lo, x_hi]^N` with `nx` cells per axis, plus a uniform
/// ξ-axis whose cell edges include `ξ = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    n: usize,
    nx: usize,
    x_lo: f64,
    x_hi: f64,
    dx: f64,
    xi_lo: f64,
    nxi: usize,
    dxi: f64,
}

impl Grid {
    /// The ξ-range `[xi_min, xi_max]` is widened so that `0` falls on an edge;
    /// this may add one ξ-cell.
    pub fn new(
        n: usize,
        nx: usize,
        x_lo: f64,
        x_hi: f64,
        nxi: usize,
        xi_min: f64,
        xi_max: f64,
    ) -> Result<Self, KineticError> {
        if !(1..=MAX_DIM).contains(&n) {
            return Err(KineticError::InvalidGrid(format!("spatial dimension {n} outside 1..={MAX_DIM}")));
        }
        if nx < 4 || nxi < 4 {
            return Err(KineticError::InvalidGrid(format!("need nx, nxi >= 4, got {nx}, {nxi}")));
        }
        if !(x_hi > x_lo) || !x_lo.is_finite() || !x_hi.is_finite() {
            return Err(KineticError::InvalidGrid(format!("empty box [{x_lo}, {x_hi}]")));
        }
        let xi_min = xi_min.min(0.0);
        let xi_max = xi_max.max(0.0);
        if !(xi_max > xi_min) || !xi_min.is_finite() || !xi_max.is_finite() {
            return Err(KineticError::InvalidGrid(format!("empty ξ-range [{xi_min}, {xi_max}]")));
        }
        let dxi = (xi_max - xi_min) / nxi as f64;
        let below = (-xi_min / dxi - 1e-9).ceil().max(0.0) as usize;
        let above = (xi_max / dxi - 1e-9).ceil().max(0.0) as usize;
        let nxi = (below + above).max(nxi);
        Ok(Self { n, nx, x_lo, x_hi, dx: (x_hi - x_lo) / nx as f64, xi_lo: -(below as f64) * dxi, nxi, dxi })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn x_lo(&self) -> f64 {
        self.x_lo
    }

    pub fn x_hi(&self) -> f64 {
        self.x_hi
    }

    pub fn nxi(&self) -> usize {
        self.nxi
    }

    pub fn dxi(&self) -> f64 {
        self.dxi
    }

    pub fn xi_lo(&self) -> f64 {
        self.xi_lo
    }

    pub fn xi_hi(&self) -> f64 {
        self.xi_lo + self.nxi as f64 * self.dxi
    }

    /// Number of x-cells, `nx^N`.
    pub fn cells(&self) -> usize {
        self.nx.pow(self.n as u32)
    }

    /// Volume of one x-cell.
    pub fn cell_volume(&self) -> f64 {
        self.dx.powi(self.n as i32)
    }

    /// Stride of axis `d` in the row-major cell index (axis 0 slowest).
    pub fn stride(&self, d: usize) -> usize {
        self.nx.pow((self.n - 1 - d) as u32)
    }

    pub fn multi_index(&self, cell: usize) -> [usize; MAX_DIM] {
        let mut out = [0; MAX_DIM];
        for d in 0..self.n {
            out[d] = (cell / self.stride(d)) % self.nx;
        }
        out
    }

    pub fn center(&self, cell: usize) -> Vec3 {
        let idx = self.multi_index(cell);
        let mut x = [0.0; MAX_DIM];
        for d in 0..self.n {
            x[d] = self.x_lo + (idx[d] as f64 + 0.5) * self.dx;
        }
        x
    }

    /// Cell containing `x`, if inside the box.
    pub fn locate(&self, x: &[f64]) -> Option<usize> {
        let mut cell = 0;
        for d in 0..self.n {
            let s = ((x[d] - self.x_lo) / self.dx).floor();
            if s < 0.0 || s >= self.nx as f64 {
                return None;
            }
            cell += s as usize * self.stride(d);
        }
        Some(cell)
    }

    pub fn on_boundary(&self, cell: usize) -> bool {
        let idx = self.multi_index(cell);
        idx[..self.n].iter().any(|&i| i == 0 || i + 1 == self.nx)
    }

    pub fn xi_edge(&self, e: usize) -> f64 {
        self.xi_lo + e as f64 * self.dxi
    }

    pub fn xi_center(&self, j: usize) -> f64 {
        self.xi_lo + (j as f64 + 0.5) * self.dxi
    }

    /// ξ-cell containing `xi`, if inside the range.
    pub fn locate_xi(&self, xi: f64) -> Option<usize> {
        let s = ((xi - self.xi_lo) / self.dxi).floor();
        (s >= 0.0 && s < self.nxi as f64).then_some(s as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_is_an_edge() {
        let g = Grid::new(1, 10, -1.0, 1.0, 10, -0.37, 1.21).unwrap();
        let zero = (0..=g.nxi()).map(|e| g.xi_edge(e)).any(|x| x.abs() < 1e-14);
        assert!(zero);
        assert!(g.xi_lo() <= -0.37 && g.xi_hi() >= 1.21);
        let g = Grid::new(1, 10, -1.0, 1.0, 8, 0.5, 2.0).unwrap();
        assert_eq!(g.xi_lo(), 0.0);
    }

    #[test]
    fn indexing_round_trips() {
        let g = Grid::new(2, 5, 0.0, 1.0, 4, -1.0, 1.0).unwrap();
        assert_eq!(g.cells(), 25);
        for cell in 0..g.cells() {
            assert_eq!(g.locate(&g.center(cell)), Some(cell));
        }
        assert!(g.on_boundary(0) && g.on_boundary(4) && !g.on_boundary(6));
        assert_eq!(g.locate(&[1.5, 0.2]), None);
    }

    #[test]
    fn rejects_small_grids() {
        assert!(Grid::new(1, 3, 0.0, 1.0, 8, -1.0, 1.0).is_err());
        assert!(Grid::new(1, 8, 1.0, 1.0, 8, -1.0, 1.0).is_err());
        assert!(Grid::new(4, 8, 0.0, 1.0, 8, -1.0, 1.0).is_err());
    }
}
