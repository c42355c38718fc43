use std::io::{Read, Write};

use super::PathError;

/// Relative tolerance used when matching grid times.
pub(crate) const TIME_TOL: f64 = 1e-12;

pub(crate) fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= TIME_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Piecewise-linear path sampled on a strictly increasing time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PwlPath {
    dim: usize,
    times: Vec<f64>,
    /// Row-major `(times.len(), dim)`.
    points: Vec<f64>,
}

impl PwlPath {
    pub fn new(times: Vec<f64>, points: Vec<Vec<f64>>) -> Result<Self, PathError> {
        if times.is_empty() {
            return Err(PathError::EmptyGrid);
        }
        if points.len() != times.len() {
            return Err(PathError::DimensionMismatch { expected: times.len(), found: points.len() });
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(PathError::DimensionMismatch { expected: 1, found: 0 });
        }
        let mut flat = Vec::with_capacity(dim * points.len());
        for p in &points {
            if p.len() != dim {
                return Err(PathError::DimensionMismatch { expected: dim, found: p.len() });
            }
            flat.extend_from_slice(p);
        }
        Self::from_flat(dim, times, flat)
    }

    pub fn from_flat(dim: usize, times: Vec<f64>, points: Vec<f64>) -> Result<Self, PathError> {
        if times.is_empty() {
            return Err(PathError::EmptyGrid);
        }
        if points.len() != dim * times.len() {
            return Err(PathError::DimensionMismatch { expected: dim * times.len(), found: points.len() });
        }
        for (k, w) in times.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(PathError::NonMonotoneTimes { index: k + 1 });
            }
        }
        if times.iter().chain(&points).any(|v| !v.is_finite()) {
            return Err(PathError::NonFinite);
        }
        Ok(Self { dim, times, points })
    }

    /// Straight line `z(t) = velocity · t` on a uniform grid of `segments` pieces.
    pub fn linear(velocity: &[f64], horizon: f64, segments: usize) -> Result<Self, PathError> {
        let segments = segments.max(1);
        let times: Vec<f64> = (0..=segments).map(|k| horizon * k as f64 / segments as f64).collect();
        let points = times.iter().flat_map(|&t| velocity.iter().map(move |v| v * t)).collect();
        Self::from_flat(velocity.len(), times, points)
    }

    /// `0 → peak → 0` over `[0, horizon]`, each leg split into `segments_per_leg` pieces.
    pub fn tent(peak: &[f64], horizon: f64, segments_per_leg: usize) -> Result<Self, PathError> {
        let n = segments_per_leg.max(1);
        let mut times = Vec::with_capacity(2 * n + 1);
        let mut points = Vec::with_capacity((2 * n + 1) * peak.len());
        for k in 0..=2 * n {
            let t = horizon * k as f64 / (2 * n) as f64;
            let frac = if k <= n { k as f64 / n as f64 } else { (2 * n - k) as f64 / n as f64 };
            times.push(t);
            points.extend(peak.iter().map(|p| p * frac));
        }
        Self::from_flat(peak.len(), times, points)
    }

    pub fn dim(&self) -> usize {
        self.dim
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

    pub fn point(&self, k: usize) -> &[f64] {
        &self.points[k * self.dim..(k + 1) * self.dim]
    }

    pub fn start_time(&self) -> f64 {
        self.times[0]
    }

    pub fn end_time(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn segments(&self) -> usize {
        self.times.len() - 1
    }

    pub fn increment(&self, k: usize) -> Vec<f64> {
        let (a, b) = (self.point(k), self.point(k + 1));
        b.iter().zip(a).map(|(x, y)| x - y).collect()
    }

    /// Index `k` with `times[k] <= t < times[k + 1]`, clamped to the grid.
    fn segment_of(&self, t: f64) -> usize {
        let last = self.times.len().saturating_sub(2);
        match self.times.binary_search_by(|s| s.partial_cmp(&t).unwrap()) {
            Ok(k) => k.min(last),
            Err(0) => 0,
            Err(k) => (k - 1).min(last),
        }
    }

    /// Linear interpolation; constant extrapolation outside the grid.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out);
        out
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        if self.times.len() == 1 || t <= self.times[0] {
            out.copy_from_slice(self.point(0));
            return;
        }
        if t >= self.end_time() {
            out.copy_from_slice(self.point(self.times.len() - 1));
            return;
        }
        let k = self.segment_of(t);
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        let w = (t - t0) / (t1 - t0);
        let (a, b) = (self.point(k), self.point(k + 1));
        for i in 0..self.dim {
            out[i] = a[i] + w * (b[i] - a[i]);
        }
    }

    /// Grid index equal to `t` within tolerance.
    pub fn node_index(&self, t: f64) -> Option<usize> {
        let k = self.segment_of(t);
        [k, k + 1].into_iter().find(|&i| i < self.times.len() && same_time(self.times[i], t))
    }

    /// Linear pieces traversed when moving along the path from `from` to `to`.
    /// When `to < from` the pieces are visited backwards with negated increments.
    /// Each entry is `(t_start, t_end, increment)`.
    pub fn pieces(&self, from: f64, to: f64) -> Vec<(f64, f64, Vec<f64>)> {
        let mut out = Vec::new();
        if self.times.len() < 2 || same_time(from, to) {
            return out;
        }
        let (lo, hi) = if from < to { (from, to) } else { (to, from) };
        let lo = lo.max(self.times[0]);
        let hi = hi.min(self.end_time());
        if lo >= hi {
            return out;
        }
        let mut a = lo;
        let mut k = self.segment_of(lo);
        let mut za = self.eval(a);
        while a < hi && k < self.times.len() - 1 {
            let b = self.times[k + 1].min(hi);
            let b = if same_time(b, hi) { hi } else { b };
            let zb = self.eval(b);
            if b > a {
                let inc = zb.iter().zip(&za).map(|(x, y)| x - y).collect();
                out.push((a, b, inc));
            }
            a = b;
            za = zb;
            k += 1;
        }
        if from > to {
            out.reverse();
            for piece in &mut out {
                std::mem::swap(&mut piece.0, &mut piece.1);
                piece.2.iter_mut().for_each(|v| *v = -*v);
            }
        }
        out
    }

    /// The path `s ↦ z(t1 − s)` on `[0, t1 − t_0]`; `t1` must be a grid node.
    pub fn time_reverse(&self, t1: f64) -> Result<Self, PathError> {
        let k1 = self.node_index(t1).ok_or(PathError::NotOnGrid { time: t1 })?;
        let t1 = self.times[k1];
        let times: Vec<f64> = (0..=k1).map(|m| t1 - self.times[k1 - m]).collect();
        let mut points = Vec::with_capacity((k1 + 1) * self.dim);
        for m in 0..=k1 {
            points.extend_from_slice(self.point(k1 - m));
        }
        Self::from_flat(self.dim, times, points)
    }

    /// Same path with the given extra nodes inserted (values interpolated).
    pub fn refine(&self, extra: &[f64]) -> Result<Self, PathError> {
        let mut times: Vec<f64> = self.times.clone();
        for &t in extra {
            if t > self.times[0] && t < self.end_time() && self.node_index(t).is_none() {
                times.push(t);
            }
        }
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        times.dedup_by(|a, b| same_time(*a, *b));
        let points = times.iter().flat_map(|&t| self.eval(t)).collect();
        Self::from_flat(self.dim, times, points)
    }

    /// Same path with every piece split into `factor` equal sub-pieces.
    pub fn subdivide(&self, factor: usize) -> Result<Self, PathError> {
        let factor = factor.max(1);
        let mut extra = Vec::with_capacity(self.segments() * factor);
        for w in self.times.windows(2) {
            for s in 1..factor {
                extra.push(w[0] + (w[1] - w[0]) * s as f64 / factor as f64);
            }
        }
        self.refine(&extra)
    }

    /// `λ · z`.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self { dim: self.dim, times: self.times.clone(), points: self.points.iter().map(|v| v * lambda).collect() }
    }

    /// Restriction to `[t_0, t_end]`, with `t_end` inserted as a node if needed.
    pub fn truncated(&self, t_end: f64) -> Result<Self, PathError> {
        if t_end >= self.end_time() {
            return Ok(self.clone());
        }
        let refined = self.refine(&[t_end])?;
        let k = refined.node_index(t_end).ok_or(PathError::NotOnGrid { time: t_end })?;
        Self::from_flat(self.dim, refined.times[..=k].to_vec(), refined.points[..(k + 1) * self.dim].to_vec())
    }

    /// `Σ_k |Δz_k|` with the Euclidean norm.
    pub fn total_variation(&self) -> f64 {
        (0..self.segments()).map(|k| self.increment(k).iter().map(|v| v * v).sum::<f64>().sqrt()).sum()
    }

    /// `L` when the grid is uniform with `2^L` intervals.
    pub fn dyadic_level(&self) -> Option<u32> {
        let segs = self.segments();
        if segs == 0 || !segs.is_power_of_two() {
            return None;
        }
        let h = (self.end_time() - self.start_time()) / segs as f64;
        let uniform = self
            .times
            .iter()
            .enumerate()
            .all(|(k, &t)| (t - (self.start_time() + h * k as f64)).abs() <= 1e-9 * h.max(1e-300));
        uniform.then(|| segs.trailing_zeros())
    }

    /// Restriction to the dyadic grid with `2^n` intervals, linearly interpolated.
    pub fn dyadic_approx(&self, n: u32) -> Result<Self, PathError> {
        let native = self.dyadic_level().ok_or(PathError::NotDyadic)?;
        if n > native {
            return Err(PathError::ExceedsResolution { requested: n, native });
        }
        let stride = 1usize << (native - n);
        let idx: Vec<usize> = (0..=(1usize << n)).map(|k| k * stride).collect();
        let times = idx.iter().map(|&k| self.times[k]).collect();
        let points = idx.iter().flat_map(|&k| self.point(k).to_vec()).collect();
        Self::from_flat(self.dim, times, points)
    }

    /// CSV with header `t,z1,...,zM`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), PathError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim).map(|i| format!("z{i}")));
        w.write_record(&header)?;
        for k in 0..self.len() {
            let mut row = vec![format!("{}", self.times[k])];
            row.extend(self.point(k).iter().map(|v| format!("{v}")));
            w.write_record(&row)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, PathError> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.len() < 2 || &headers[0] != "t" {
            return Err(PathError::Format("expected header `t,z1,...,zM`".into()));
        }
        for (i, h) in headers.iter().enumerate().skip(1) {
            if h != format!("z{i}") {
                return Err(PathError::Format(format!("column {} should be `z{i}`, found `{h}`", i + 1)));
            }
        }
        let dim = headers.len() - 1;
        let mut times = Vec::new();
        let mut points = Vec::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| PathError::Format(format!("row {}: `{s}` is not a number", line + 2)))
            };
            times.push(parse(&rec[0])?);
            for i in 1..=dim {
                points.push(parse(&rec[i])?);
            }
        }
        Self::from_flat(dim, times, points)
    }
}
