use super::PathError;

/// Element of the step-2 truncated tensor algebra with scalar part 1.
///
/// `level2` is stored row-major: `level2[i * dim + j]` is the iterated
/// integral of `dz^i` (earlier) against `dz^j` (later).
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    dim: usize,
    level1: Vec<f64>,
    level2: Vec<f64>,
}

impl GroupElement {
    pub fn identity(dim: usize) -> Self {
        Self { dim, level1: vec![0.0; dim], level2: vec![0.0; dim * dim] }
    }

    pub fn from_levels(level1: Vec<f64>, level2: Vec<f64>) -> Result<Self, PathError> {
        let dim = level1.len();
        if level2.len() != dim * dim {
            return Err(PathError::DimensionMismatch { expected: dim * dim, found: level2.len() });
        }
        Ok(Self { dim, level1, level2 })
    }

    /// Signature of a straight segment with increment `delta`: `exp(delta)`.
    pub fn from_increment(delta: &[f64]) -> Self {
        let dim = delta.len();
        let mut level2 = vec![0.0; dim * dim];
        for i in 0..dim {
            for j in 0..dim {
                level2[i * dim + j] = 0.5 * delta[i] * delta[j];
            }
        }
        Self { dim, level1: delta.to_vec(), level2 }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level1(&self) -> &[f64] {
        &self.level1
    }

    pub fn level2(&self) -> &[f64] {
        &self.level2
    }

    pub fn level2_at(&self, i: usize, j: usize) -> f64 {
        self.level2[i * self.dim + j]
    }

    /// Truncated tensor product `self ⊗ other`.
    pub fn concat(&self, other: &Self) -> Result<Self, PathError> {
        if self.dim != other.dim {
            return Err(PathError::DimensionMismatch { expected: self.dim, found: other.dim });
        }
        let d = self.dim;
        let level1 = self.level1.iter().zip(&other.level1).map(|(a, b)| a + b).collect();
        let mut level2 = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let k = i * d + j;
                level2[k] = self.level2[k] + other.level2[k] + self.level1[i] * other.level1[j];
            }
        }
        Ok(Self { dim: d, level1, level2 })
    }

    pub fn inverse(&self) -> Self {
        let d = self.dim;
        let level1 = self.level1.iter().map(|v| -v).collect();
        let mut level2 = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let k = i * d + j;
                level2[k] = self.level1[i] * self.level1[j] - self.level2[k];
            }
        }
        Self { dim: d, level1, level2 }
    }

    /// Antisymmetric part `½(L2 − L2ᵀ)` entry `(i, j)`.
    pub fn levy_area(&self, i: usize, j: usize) -> f64 {
        0.5 * (self.level2_at(i, j) - self.level2_at(j, i))
    }

    /// Largest entrywise violation of `sym(L2) = ½ L1 ⊗ L1`.
    pub fn geometric_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in 0..d {
                let sym = 0.5 * (self.level2_at(i, j) + self.level2_at(j, i));
                worst = worst.max((sym - 0.5 * self.level1[i] * self.level1[j]).abs());
            }
        }
        worst
    }

    /// Euclidean norm of the level-1 component.
    pub fn level1_norm(&self) -> f64 {
        self.level1.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Frobenius norm of the level-2 component.
    pub fn level2_norm(&self) -> f64 {
        self.level2.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Largest entrywise difference to `other`, over both levels.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.level1
            .iter()
            .zip(&other.level1)
            .chain(self.level2.iter().zip(&other.level2))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
