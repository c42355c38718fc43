use rand::Rng;
use rand_distr::StandardNormal;

use super::PwlPath;
use crate::rng;

/// Brownian motion sampled on the dyadic grid of `2^level` intervals of `[0, horizon]`.
///
/// Built by midpoint (Lévy) refinement: level `ℓ` draws its bridge midpoints
/// from its own stream, so the path at level `n` is the dyadic restriction of
/// the path at any level `m > n` with the same seed.
pub fn brownian_pwl(seed: u64, dims: usize, level: u32, horizon: f64) -> PwlPath {
    let mut values = vec![vec![0.0; dims], {
        let mut r = rng::stream(seed, "brownian", 0);
        (0..dims).map(|_| horizon.sqrt() * r.sample::<f64, _>(StandardNormal)).collect()
    }];
    for l in 1..=level {
        let mut r = rng::stream(seed, "brownian", u64::from(l));
        // Midpoint of an interval of length h has conditional variance h/4.
        let half_sd = (horizon / f64::from(1u32 << (l - 1)) / 4.0).sqrt();
        let mut next = Vec::with_capacity(2 * values.len() - 1);
        for w in values.windows(2) {
            next.push(w[0].clone());
            next.push(
                w[0].iter()
                    .zip(&w[1])
                    .map(|(a, b)| 0.5 * (a + b) + half_sd * r.sample::<f64, _>(StandardNormal))
                    .collect(),
            );
        }
        next.push(values.pop().unwrap());
        values = next;
    }
    let segs = values.len() - 1;
    let times = (0..=segs).map(|k| horizon * k as f64 / segs as f64).collect();
    PwlPath::new(times, values).expect("brownian samples are finite on an increasing grid")
}
