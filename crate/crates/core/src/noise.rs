//! Deterministic, splittable noise streams.
//!
//! Streams are counter-based: `(seed, stream_id)` selects an independent
//! ChaCha stream, so parallel ensembles can hand each worker its own stream
//! and reproduce results regardless of scheduling order.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

/// A reproducible stream of Gaussian draws.
///
/// Same `(seed, stream_id)` replays the identical sequence; distinct
/// `stream_id`s are statistically independent.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha12Rng,
}

impl NoiseStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        NoiseStream { rng }
    }

    /// Standard real normal draw (mean 0, variance 1).
    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Standard complex normal draw: independent unit-variance real and
    /// imaginary parts, so `E|z|² = 2`.
    pub fn complex_normal(&mut self) -> Complex64 {
        let re: f64 = self.rng.sample(StandardNormal);
        let im: f64 = self.rng.sample(StandardNormal);
        Complex64::new(re, im)
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }
}
