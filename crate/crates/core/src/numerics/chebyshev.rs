//! Chebyshev interpolation of smooth functions on an interval.

/// Interpolant `sum_k c_k T_k(u)` with `u` the interval mapped onto `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Chebyshev {
    lo: f64,
    hi: f64,
    coeffs: Vec<f64>,
}

impl Chebyshev {
    /// Interpolates `f` at the `n` Chebyshev points of the first kind.
    pub fn fit<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> Self {
        assert!(n >= 1 && hi > lo);
        let pi = std::f64::consts::PI;
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        let values: Vec<f64> = (0..n)
            .map(|i| f(mid + half * (pi * (i as f64 + 0.5) / n as f64).cos()))
            .collect();
        let coeffs = (0..n)
            .map(|k| {
                let s: f64 = values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v * (pi * k as f64 * (i as f64 + 0.5) / n as f64).cos())
                    .sum();
                if k == 0 { s / n as f64 } else { 2.0 * s / n as f64 }
            })
            .collect();
        Self { lo, hi, coeffs }
    }

    /// Doubles the point count from 17 until the last few coefficients
    /// fall below `tol`; `None` when `max_points` is not enough.
    pub fn adaptive<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64, max_points: usize) -> Option<Self> {
        let mut n = 17;
        while n <= max_points {
            let c = Self::fit(&f, lo, hi, n);
            if c.trailing() <= tol {
                return Some(c);
            }
            n = 2 * n - 1;
        }
        None
    }

    /// Largest magnitude among the last three coefficients.
    pub fn trailing(&self) -> f64 {
        self.coeffs.iter().rev().take(3).fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Clenshaw recurrence; `x` is clamped to the interval.
    pub fn eval(&self, x: f64) -> f64 {
        let u = ((2.0 * x - self.lo - self.hi) / (self.hi - self.lo)).clamp(-1.0, 1.0);
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * u * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        u * b1 - b2 + self.coeffs[0]
    }
}
