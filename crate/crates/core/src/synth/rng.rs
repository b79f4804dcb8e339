use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Portable seeded generator: ChaCha8 keyed by `seed ^ substream`, with a
/// separate ChaCha stream id per purpose.
///
/// Uniforms take the top 53 bits of a `u64` draw; Gaussians use the cosine
/// branch of the Box–Muller transform on two uniforms.
#[derive(Debug, Clone)]
pub struct SplitRng(ChaCha8Rng);

impl SplitRng {
    pub fn new(seed: u64, purpose: u64, substream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ substream);
        rng.set_stream(purpose);
        Self(rng)
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n.saturating_sub(1))
    }

    /// Standard normal draw.
    pub fn gaussian(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn gaussian_vec(&mut self, dim: usize, sigma: f64) -> Vec<f64> {
        (0..dim).map(|_| sigma * self.gaussian()).collect()
    }

    /// A uniformly random direction on the unit sphere.
    pub fn unit_vec(&mut self, dim: usize) -> Vec<f64> {
        loop {
            let v = self.gaussian_vec(dim, 1.0);
            if crate::math::norm(&v) > 1e-12 {
                return crate::math::normalize(&v);
            }
        }
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
