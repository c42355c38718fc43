/// `∫_{-1}^{1} exp(−1/(1 − s²)) ds`.
const BUMP_MASS: f64 = 0.443_993_816_168_079_4;

/// One-dimensional smooth bump of unit mass supported in `[-2ε, 2ε]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bump {
    pub eps: f64,
}

impl Bump {
    pub fn radius(&self) -> f64 {
        2.0 * self.eps
    }

    pub fn value(&self, r: f64) -> f64 {
        let w = self.radius();
        let s = r / w;
        if s.abs() >= 1.0 {
            return 0.0;
        }
        (-1.0 / (1.0 - s * s)).exp() / (w * BUMP_MASS)
    }

    pub fn derivative(&self, r: f64) -> f64 {
        let w = self.radius();
        let s = r / w;
        if s.abs() >= 1.0 {
            return 0.0;
        }
        let d = 1.0 - s * s;
        self.value(r) * (-2.0 * s / (d * d)) / w
    }
}

/// Product mollifier `ρ⁰(x, ξ) = Π_d k(x_d − y_d) · k(ξ − η)` anchored at time `t0`.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunction {
    pub eps: f64,
    pub t0: f64,
    pub y: Vec<f64>,
    pub eta: f64,
}

impl TestFunction {
    pub fn new(eps: f64, t0: f64, y: &[f64], eta: f64) -> Self {
        Self { eps, t0, y: y.to_vec(), eta }
    }

    pub fn bump(&self) -> Bump {
        Bump { eps: self.eps }
    }

    pub fn centered(&self, y: &[f64], eta: f64) -> Self {
        Self { y: y.to_vec(), eta, ..self.clone() }
    }

    /// `ρ⁰(x − y, ξ − η)`.
    pub fn rho0(&self, x: &[f64], xi: f64) -> f64 {
        let k = self.bump();
        let mut v = k.value(xi - self.eta);
        for (a, b) in x.iter().zip(&self.y) {
            if v == 0.0 {
                break;
            }
            v *= k.value(a - b);
        }
        v
    }

    /// Gradient of `ρ⁰(· − y, · − η)`, spatial components first.
    pub fn grad_rho0(&self, x: &[f64], xi: f64) -> Vec<f64> {
        let k = self.bump();
        let n = self.y.len();
        let vals: Vec<f64> = (0..n).map(|d| k.value(x[d] - self.y[d])).chain([k.value(xi - self.eta)]).collect();
        let ders: Vec<f64> =
            (0..n).map(|d| k.derivative(x[d] - self.y[d])).chain([k.derivative(xi - self.eta)]).collect();
        (0..=n).map(|i| (0..=n).map(|j| if i == j { ders[j] } else { vals[j] }).product()).collect()
    }

    /// Support box `[lo, hi]` of `ρ⁰` in `(x, ξ)`.
    pub fn support(&self) -> (Vec<f64>, Vec<f64>) {
        let r = self.bump().radius();
        let lo = self.y.iter().map(|v| v - r).chain([self.eta - r]).collect();
        let hi = self.y.iter().map(|v| v + r).chain([self.eta + r]).collect();
        (lo, hi)
    }
}
