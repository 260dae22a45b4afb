//! Fixed probe vectors used to proxy strong and weak operator convergence.
//!
//! The probe set is documented once and reused everywhere: 10 grid delta
//! functions at the decile positions plus 10 seeded Gaussian vectors.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One sentence form of the probe convention, for report headers.
pub const PROBE_NOTE: &str = "strong/weak convergence proxied on a fixed probe set: \
10 grid deltas at decile positions + 10 seeded Gaussian vectors";

/// Samples a standard normal via Box-Muller; deterministic given the RNG.
pub fn standard_normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Seeded Gaussian vector of length `n`.
pub fn gaussian_vector(n: usize, rng: &mut impl Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| standard_normal(rng))
}

/// The documented 20-vector probe set on an `n`-dimensional space.
pub fn probe_set(n: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut probes = Vec::with_capacity(20);
    for i in 0..10usize {
        let idx = (((i as f64 + 0.5) / 10.0) * n as f64).floor() as usize;
        let mut v = DVector::zeros(n);
        v[idx.min(n - 1)] = 1.0;
        probes.push(v);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..10 {
        probes.push(gaussian_vector(n, &mut rng));
    }
    probes
}
