//! Numerical building blocks shared by every other module.

pub mod chebyshev;
pub mod optimize;
pub mod quadrature;
pub mod random;
pub mod special;

pub use optimize::{maximize, Identity, OptimResult, OptimizerConfig, Reparameterization};
pub use quadrature::{integrate, integrate_graded, GradedNode, QuadratureRule, DEFAULT_ORDER};
pub use random::{derive_seed, sample_gamma, stream_rng, GammaSampler, TassRng};
pub use special::{
    chi_square_sf, gamma_cdf, gamma_inc_pair, gamma_pdf, ln_gamma, normal_ln_pdf, normal_pdf,
    std_normal_cdf, std_normal_quantile, GammaLaw,
};

const PAIRWISE_BLOCK: usize = 32;

/// Pairwise (tree) summation with a fixed split rule: the canonical
/// reduction order shared by the serial and parallel paths.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        let mut s = 0.0;
        for v in values {
            s += v;
        }
        return s;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Same tree as [`pairwise_sum`], with subtrees evaluated on the rayon pool.
pub fn pairwise_sum_par(values: &[f64]) -> f64 {
    if values.len() <= 4096 {
        return pairwise_sum(values);
    }
    let mid = values.len() / 2;
    let (a, b) = rayon::join(
        || pairwise_sum_par(&values[..mid]),
        || pairwise_sum_par(&values[mid..]),
    );
    a + b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_sum_is_bitwise_serial() {
        let v: Vec<f64> = (0..100_003).map(|i| ((i as f64) * 0.37).sin() * 1e3 + 1e-7 * i as f64).collect();
        assert_eq!(pairwise_sum(&v).to_bits(), pairwise_sum_par(&v).to_bits());
    }
}
