//! Seeded random streams.
//!
//! Every generator is derived from one 64-bit seed plus a path of stream
//! labels, so a replication, a restart or a particle filter run always sees
//! the same numbers regardless of how work is scheduled.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rand::SeedableRng;

use super::special::GammaLaw;

pub type TassRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for the stream addressed by `labels`.
pub fn derive_seed(seed: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix64(seed), |acc, &l| splitmix64(acc ^ splitmix64(l.wrapping_add(0x5851_F42D_4C95_7F2D))))
}

/// Generator for the stream addressed by `labels` under `seed`.
pub fn stream_rng(seed: u64, labels: &[u64]) -> TassRng {
    TassRng::seed_from_u64(derive_seed(seed, labels))
}

/// One Gamma(alpha, rate beta) draw.
pub fn sample_gamma<R: Rng + ?Sized>(law: &GammaLaw, rng: &mut R) -> f64 {
    Gamma::new(law.alpha, 1.0 / law.beta)
        .expect("validated gamma law")
        .sample(rng)
}

/// Reusable Gamma sampler for hot loops.
#[derive(Debug, Clone, Copy)]
pub struct GammaSampler(Gamma<f64>);

impl GammaSampler {
    pub fn new(law: &GammaLaw) -> Self {
        Self(Gamma::new(law.alpha, 1.0 / law.beta).expect("validated gamma law"))
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.0.sample(rng)
    }
}

#[inline]
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Uniform draw on `[0, 1)`.
#[inline]
pub fn uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}
