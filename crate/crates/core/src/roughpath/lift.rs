use super::{same_time, GroupElement, PathError, PwlPath};

/// Signature data of a path on a time grid, stored as cumulative elements
/// `nodes[k] = S(z)_{t_0, t_k}`. Pair signatures are recovered through
/// `inverse(nodes[i]) ⊗ nodes[j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeometricRoughPath {
    level: usize,
    times: Vec<f64>,
    nodes: Vec<GroupElement>,
}

/// Exact level-`level` signature of the piecewise-linear interpolant of `path`.
pub fn lift_pwl(path: &PwlPath, level: usize) -> Result<GeometricRoughPath, PathError> {
    GeometricRoughPath::lift(path, level)
}

impl GeometricRoughPath {
    pub fn lift(path: &PwlPath, level: usize) -> Result<Self, PathError> {
        if !(1..=2).contains(&level) {
            return Err(PathError::InvalidLevel(level));
        }
        let dim = path.dim();
        let mut nodes = Vec::with_capacity(path.len());
        let mut acc = GroupElement::identity(dim);
        nodes.push(acc.clone());
        for k in 0..path.segments() {
            let delta = path.increment(k);
            let seg = if level == 2 {
                GroupElement::from_increment(&delta)
            } else {
                GroupElement::from_levels(delta, vec![0.0; dim * dim])?
            };
            acc = acc.concat(&seg)?;
            if level == 1 {
                acc = GroupElement::from_levels(acc.level1().to_vec(), vec![0.0; dim * dim])?;
            }
            nodes.push(acc.clone());
        }
        Ok(Self { level, times: path.times().to_vec(), nodes })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.nodes[0].dim()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn node(&self, k: usize) -> &GroupElement {
        &self.nodes[k]
    }

    /// Signature over `[t_i, t_j]`.
    pub fn sig(&self, i: usize, j: usize) -> GroupElement {
        let g = self.nodes[i].inverse().concat(&self.nodes[j]).expect("nodes share a dimension");
        if self.level == 1 {
            let d = g.dim();
            GroupElement::from_levels(g.level1().to_vec(), vec![0.0; d * d]).expect("square level 2")
        } else {
            g
        }
    }

    /// Largest entrywise violation of `sig[i,j] ⊗ sig[j,k] = sig[i,k]` over
    /// grid triples. Grids longer than `max_nodes` are checked on an evenly
    /// strided subset of nodes.
    pub fn chen_defect(&self, max_nodes: usize) -> f64 {
        let stride = self.len().div_ceil(max_nodes.max(2)).max(1);
        let mut idx: Vec<usize> = (0..self.len()).step_by(stride).collect();
        if *idx.last().unwrap() != self.len() - 1 {
            idx.push(self.len() - 1);
        }
        let mut worst: f64 = 0.0;
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate().skip(a) {
                let sij = self.sig(i, j);
                for &k in &idx[b..] {
                    let lhs = sij.concat(&self.sig(j, k)).expect("same dim");
                    worst = worst.max(lhs.max_abs_diff(&self.sig(i, k)));
                }
            }
        }
        worst
    }

    /// Largest geometric-condition violation over all pair signatures from `t_0`
    /// and over consecutive pieces.
    pub fn geometric_defect(&self) -> f64 {
        if self.level == 1 {
            return 0.0;
        }
        let from_start = self.nodes.iter().map(GroupElement::geometric_defect);
        let pieces = (1..self.len()).map(|k| self.sig(k - 1, k).geometric_defect());
        from_start.chain(pieces).fold(0.0, f64::max)
    }

    /// Signature data of `s ↦ z(t1 − s)` on `[0, t1 − t_0]`; `t1` must be a node.
    pub fn time_reverse(&self, t1: f64) -> Result<Self, PathError> {
        let k1 = (0..self.len()).find(|&k| same_time(self.times[k], t1)).ok_or(PathError::NotOnGrid { time: t1 })?;
        let t1 = self.times[k1];
        let base = self.nodes[k1].inverse();
        let times = (0..=k1).map(|m| t1 - self.times[k1 - m]).collect();
        let nodes = (0..=k1).map(|m| base.concat(&self.nodes[k1 - m]).expect("same dim")).collect();
        Ok(Self { level: self.level, times, nodes })
    }

    /// Grid-pair maximum of `max_k |π_k(sig[s,t])|^{1/k} / |t − s|^α`.
    pub fn holder_norm(&self, alpha: f64) -> Result<f64, PathError> {
        if self.len() < 2 {
            return Err(PathError::EmptyGrid);
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                let g = self.sig(i, j);
                let dt = (self.times[j] - self.times[i]).powf(alpha);
                let mut v = g.level1_norm();
                if self.level == 2 {
                    v = v.max(g.level2_norm().sqrt());
                }
                worst = worst.max(v / dt);
            }
        }
        Ok(worst)
    }

    /// Inhomogeneous α-Hölder distance over the grid nodes the two paths share.
    pub fn rho_dist(&self, other: &Self, alpha: f64) -> Result<f64, PathError> {
        if self.dim() != other.dim() {
            return Err(PathError::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        let mut shared = Vec::new();
        let mut j = 0;
        for (i, &t) in self.times.iter().enumerate() {
            while j < other.len() && other.times[j] < t && !same_time(other.times[j], t) {
                j += 1;
            }
            if j < other.len() && same_time(other.times[j], t) {
                shared.push((i, j));
            }
        }
        if shared.len() < 2 {
            return Err(PathError::NoSharedNodes);
        }
        let level2 = self.level == 2 && other.level == 2;
        let mut worst: f64 = 0.0;
        for (a, &(i1, j1)) in shared.iter().enumerate() {
            for &(i2, j2) in &shared[a + 1..] {
                let g = self.sig(i1, i2);
                let h = other.sig(j1, j2);
                let dt = (self.times[i2] - self.times[i1]).powf(alpha);
                let d1 = g.level1().iter().zip(h.level1()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                worst = worst.max(d1 / dt);
                if level2 {
                    let d2 = g.level2().iter().zip(h.level2()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                    worst = worst.max(d2 / (dt * dt));
                }
            }
        }
        Ok(worst)
    }
}

/// `rho_dist` of the level-2 lifts after refining both paths onto the union
/// of their grids. Refinement leaves each piecewise-linear path unchanged.
pub fn rho_dist_pwl(a: &PwlPath, b: &PwlPath, alpha: f64) -> Result<f64, PathError> {
    let ra = a.refine(b.times())?;
    let rb = b.refine(a.times())?;
    lift_pwl(&ra, 2)?.rho_dist(&lift_pwl(&rb, 2)?, alpha)
}
