//! Seeded Gaussian noise.
//!
//! ChaCha8 is a counter-based stream cipher, so a given seed yields the same
//! uniform stream on every platform; normals are drawn by Box-Muller.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct GaussianSource {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianSource {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// One standard normal deviate.
    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 53-bit uniform in (0, 1]
        let u1 = ((self.rng.random::<u64>() >> 11) + 1) as f64 / (1u64 << 53) as f64;
        let u2 = (self.rng.random::<u64>() >> 11) as f64 / (1u64 << 53) as f64;
        let r = (-2.0 * u1.ln()).sqrt();
        let (sin, cos) = (2.0 * std::f64::consts::PI * u2).sin_cos();
        self.spare = Some(r * sin);
        r * cos
    }

    pub fn fill(&mut self, out: &mut [f64]) {
        for v in out {
            *v = self.next_normal();
        }
    }

    pub fn take(&mut self, len: usize) -> Vec<f64> {
        (0..len).map(|_| self.next_normal()).collect()
    }
}

/// Derives the seed for frame `index` from a master seed (SplitMix64 finalizer).
pub fn frame_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
