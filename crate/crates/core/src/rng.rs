//! Seeded random streams.
//!
//! Every random quantity comes from ChaCha8 seeded with `seed_from_u64(seed)`
//! and then moved to an explicit stream with `set_stream(stream)`. Distinct
//! streams of one seed are independent, which lets parallel work draw from
//! its own stream without depending on scheduling.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Prng = ChaCha8Rng;

pub fn stream(seed: u64, stream: u64) -> Prng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn normal_vector(rng: &mut Prng, d: usize) -> DVector<f64> {
    DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Uniform draw on the sphere of `radius` in dimension `d`.
pub fn on_sphere(rng: &mut Prng, d: usize, radius: f64) -> DVector<f64> {
    loop {
        let g = normal_vector(rng, d);
        let n = g.norm();
        if n > 1e-300 {
            return g * (radius / n);
        }
    }
}

/// Uniform draw in the ball of `radius` around `center`.
pub fn in_ball(rng: &mut Prng, center: &DVector<f64>, radius: f64) -> DVector<f64> {
    let d = center.len();
    if d == 0 {
        return center.clone();
    }
    let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
    center + on_sphere(rng, d, r)
}

/// A fresh 64-bit seed derived from `rng`.
pub fn child_seed(rng: &mut Prng) -> u64 {
    rng.random()
}
