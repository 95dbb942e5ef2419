//! Special functions: log-gamma, regularized incomplete gamma, Gamma and
//! Gaussian laws.
//!
//! The incomplete gamma routines use the power series below `x < a + 1` and
//! a modified-Lentz continued fraction above it, and always return the pair
//! `(P, Q)` so that callers can difference whichever tail keeps precision.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TassError};

const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 200_000;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized incomplete gamma pair `(P(a, x), Q(a, x))`.
///
/// `x <= 0` maps to `(0, 1)`; `a` must be positive.
pub fn gamma_inc_pair(a: f64, x: f64) -> (f64, f64) {
    inc_pair(a, x, ln_gamma(a))
}

fn inc_pair(a: f64, x: f64, ln_gamma_a: f64) -> (f64, f64) {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    if x.is_infinite() {
        return (1.0, 0.0);
    }
    let ln_pre = a * x.ln() - x - ln_gamma_a;
    if x < a + 1.0 {
        let p = series_p(a, x) * ln_pre.exp();
        let p = p.min(1.0);
        (p, 1.0 - p)
    } else {
        let q = (continued_fraction_q(a, x) * ln_pre.exp()).min(1.0);
        (1.0 - q, q)
    }
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    gamma_inc_pair(a, x).0
}

/// Regularized upper incomplete gamma `Q(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    gamma_inc_pair(a, x).1
}

fn series_p(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum
}

fn continued_fraction_q(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// See [`GammaLaw::prepared`].
#[derive(Debug, Clone, Copy)]
pub struct PreparedCdf {
    alpha: f64,
    beta: f64,
    ln_gamma_alpha: f64,
}

impl PreparedCdf {
    /// `(P, Q)` at `x`, identical to [`GammaLaw::cdf_pair`].
    pub fn cdf_pair(&self, x: f64) -> (f64, f64) {
        inc_pair(self.alpha, self.beta * x, self.ln_gamma_alpha)
    }

    pub fn sf(&self, x: f64) -> f64 {
        self.cdf_pair(x).1
    }
}

/// Gamma distribution with shape `alpha` and rate `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaLaw {
    pub alpha: f64,
    pub beta: f64,
}

impl GammaLaw {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) || !(beta > 0.0 && beta.is_finite()) {
            return Err(TassError::InvalidParams(format!(
                "gamma law needs alpha > 0 and beta > 0, got ({alpha}, {beta})"
            )));
        }
        Ok(Self { alpha, beta })
    }

    pub fn mean(&self) -> f64 {
        self.alpha / self.beta
    }

    pub fn variance(&self) -> f64 {
        self.alpha / (self.beta * self.beta)
    }

    /// Law of the sum of `count` independent draws.
    pub fn convolved(&self, count: f64) -> GammaLaw {
        GammaLaw {
            alpha: self.alpha * count,
            beta: self.beta,
        }
    }

    /// Mode of the density (0 when `alpha <= 1`).
    pub fn mode(&self) -> f64 {
        ((self.alpha - 1.0) / self.beta).max(0.0)
    }

    /// Log-density; `-inf` outside the support.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return f64::NEG_INFINITY;
        }
        if x == 0.0 {
            return if self.alpha < 1.0 {
                f64::INFINITY
            } else if self.alpha == 1.0 {
                self.beta.ln()
            } else {
                f64::NEG_INFINITY
            };
        }
        self.alpha * self.beta.ln() - ln_gamma(self.alpha) + (self.alpha - 1.0) * x.ln()
            - self.beta * x
    }

    /// `(P, Q)` at `x`.
    pub fn cdf_pair(&self, x: f64) -> (f64, f64) {
        gamma_inc_pair(self.alpha, self.beta * x)
    }

    /// Distribution function with `ln Gamma(alpha)` computed once, for
    /// loops that evaluate it many times.
    pub fn prepared(&self) -> PreparedCdf {
        PreparedCdf { alpha: self.alpha, beta: self.beta, ln_gamma_alpha: ln_gamma(self.alpha) }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.cdf_pair(x).0
    }

    pub fn sf(&self, x: f64) -> f64 {
        self.cdf_pair(x).1
    }

    /// `G(hi) - G(lo)` computed from whichever tail avoids cancellation.
    pub fn cdf_diff(&self, hi: f64, lo: f64) -> f64 {
        let (p_hi, q_hi) = self.cdf_pair(hi);
        let (p_lo, q_lo) = self.cdf_pair(lo);
        if p_lo > 0.5 {
            q_lo - q_hi
        } else {
            p_hi - p_lo
        }
    }

    /// Quantile function by safeguarded Newton iteration.
    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            return 0.0;
        }
        if p >= 1.0 {
            return f64::INFINITY;
        }
        let a = self.alpha;
        // Wilson-Hilferty starting point on the unit-rate scale.
        let z = statrs_normal_quantile(p);
        let wh = a * (1.0 - 1.0 / (9.0 * a) + z / (3.0 * a.sqrt())).powi(3);
        let mut x = if wh > 0.0 { wh } else { (p * (ln_gamma(a + 1.0)).exp()).powf(1.0 / a) };
        let mut lo = 0.0_f64;
        let mut hi = f64::INFINITY;
        for _ in 0..200 {
            let f = gamma_p(a, x) - p;
            if f > 0.0 {
                hi = hi.min(x);
            } else {
                lo = lo.max(x);
            }
            let ln_dens = (a - 1.0) * x.ln() - x - ln_gamma(a);
            let step = f / ln_dens.exp();
            let mut next = x - step;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = if hi.is_finite() { 0.5 * (lo + hi) } else { 2.0 * x.max(1e-300) };
            }
            if (next - x).abs() <= 1e-15 * x.abs().max(1e-300) {
                x = next;
                break;
            }
            x = next;
        }
        x / self.beta
    }
}

fn statrs_normal_quantile(p: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::new(0.0, 1.0).expect("standard normal").inverse_cdf(p)
}

/// Gamma density `beta^alpha / Gamma(alpha) x^(alpha-1) exp(-beta x)`.
pub fn gamma_pdf(x: f64, law: &GammaLaw) -> Result<f64> {
    if x < 0.0 {
        return Err(TassError::Domain(format!("gamma_pdf needs x >= 0, got {x}")));
    }
    Ok(law.ln_pdf(x).exp())
}

/// Gamma distribution function; zero for `x <= 0`.
pub fn gamma_cdf(x: f64, law: &GammaLaw) -> f64 {
    law.cdf(x)
}

/// Gaussian density with the given mean and variance.
pub fn normal_pdf(x: f64, mean: f64, variance: f64) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(TassError::Domain(format!(
            "normal_pdf needs variance > 0, got {variance}"
        )));
    }
    Ok(normal_ln_pdf(x, mean, variance).exp())
}

/// Unchecked Gaussian log-density.
#[inline]
pub fn normal_ln_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let d = x - mean;
    -0.5 * ((2.0 * std::f64::consts::PI * variance).ln() + d * d / variance)
}

/// Standard normal distribution function, accurate in both tails.
pub fn std_normal_cdf(x: f64) -> f64 {
    let half_sq = 0.5 * x * x;
    if x < 0.0 {
        0.5 * gamma_q(0.5, half_sq)
    } else {
        1.0 - 0.5 * gamma_q(0.5, half_sq)
    }
}

/// Standard normal upper tail `1 - Phi(x)`.
pub fn std_normal_sf(x: f64) -> f64 {
    std_normal_cdf(-x)
}

/// Standard normal quantile.
pub fn std_normal_quantile(p: f64) -> f64 {
    statrs_normal_quantile(p)
}

/// Upper tail of the chi-square distribution with `dof` degrees of freedom.
pub fn chi_square_sf(x: f64, dof: f64) -> f64 {
    gamma_q(0.5 * dof, 0.5 * x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ln_gamma_matches_factorials() {
        let mut fact = 1.0_f64;
        for k in 1..20 {
            fact *= k as f64;
            assert_relative_eq!(ln_gamma(k as f64 + 1.0), fact.ln(), max_relative = 1e-14);
        }
        assert_relative_eq!(
            ln_gamma(0.5),
            std::f64::consts::PI.sqrt().ln(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn exponential_special_cases() {
        let law = GammaLaw::new(1.0, 1.0).unwrap();
        assert_relative_eq!(gamma_pdf(1.0, &law).unwrap(), (-1.0f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(gamma_cdf(1.0, &law), 1.0 - (-1.0f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn pdf_at_origin_and_domain() {
        let law = GammaLaw::new(2.0, 5.0).unwrap();
        assert_eq!(gamma_pdf(0.0, &law).unwrap(), 0.0);
        assert!(gamma_pdf(-0.1, &law).is_err());
        assert_eq!(gamma_cdf(-0.3, &law), 0.0);
    }

    #[test]
    fn half_shape_cdf_is_erf() {
        // P(1/2, x) = erf(sqrt x); check through the chi-square(1) relation
        // against a 1e-12 series for erf.
        for &x in &[0.01, 0.3, 1.0, 2.5, 7.0] {
            let z = f64::sqrt(x);
            let erf = erf_series(z);
            assert_relative_eq!(gamma_p(0.5, x), erf, max_relative = 1e-13);
        }
    }

    fn erf_series(z: f64) -> f64 {
        // Maclaurin series, converges for all z; fine for z < 3.
        let mut sum = 0.0;
        let mut term = z;
        let mut n = 0.0;
        loop {
            let add = term / (2.0 * n + 1.0);
            sum += add;
            if add.abs() < 1e-18 * sum.abs() {
                break;
            }
            n += 1.0;
            term *= -z * z / n;
        }
        2.0 / std::f64::consts::PI.sqrt() * sum
    }

    #[test]
    fn tails_are_complementary() {
        for &(a, x) in &[(0.5, 0.2), (3.0, 10.0), (50.0, 49.0), (500.0, 520.0)] {
            let (p, q) = gamma_inc_pair(a, x);
            assert!((p + q - 1.0).abs() < 1e-13);
            assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn cdf_diff_keeps_precision_in_upper_tail() {
        let law = GammaLaw::new(0.5, 50.0).unwrap();
        let d = law.cdf_diff(1.3, 1.2);
        // tail mass is ~1e-28, the naive difference would be exactly 0
        assert!(d > 0.0 && d < 1e-20);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &(a, b) in &[(0.5, 50.0), (2.0, 1.0), (0.211, 5.088), (40.0, 3.0)] {
            let law = GammaLaw::new(a, b).unwrap();
            for &p in &[1e-6, 0.025, 0.5, 0.975, 0.999999] {
                let x = law.quantile(p);
                assert_relative_eq!(law.cdf(x), p, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn normal_values() {
        assert_relative_eq!(
            normal_pdf(0.0, 0.0, 1.0).unwrap(),
            1.0 / (2.0 * std::f64::consts::PI).sqrt(),
            max_relative = 1e-15
        );
        assert!(normal_pdf(0.0, 0.0, 0.0).is_err());
        assert_relative_eq!(std_normal_cdf(0.0), 0.5, max_relative = 1e-15);
        assert_relative_eq!(std_normal_cdf(-1.959963984540054), 0.025, max_relative = 1e-12);
        assert!(std_normal_cdf(-30.0) > 0.0);
    }

    #[test]
    fn chi_square_reference_quantile() {
        // 99th percentile of chi-square(19)
        assert_relative_eq!(chi_square_sf(36.190869, 19.0), 0.01, max_relative = 1e-5);
    }
}
