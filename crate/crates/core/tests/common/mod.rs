//! Independent reference computations shared by the integration tests and
//! the acceptance harness.
#![allow(dead_code)]

use tass::model::{LatentKernel, TassParams, DEFAULT_JMAX};
use tass::numerics::special::{normal_ln_pdf, GammaLaw};
use tass::numerics::QuadratureRule;

/// Gamma CDF with the `G(x) = 0` for `x <= 0` convention.
fn g(law: &GammaLaw, x: f64) -> f64 {
    law.cdf(x)
}

/// `G(a) - G(b)`.
fn gt(law: &GammaLaw, a: f64, b: f64) -> f64 {
    law.cdf_diff(a, b)
}

fn sum_from(start: usize, t_max: usize, f: impl Fn(f64) -> f64) -> f64 {
    (start..=t_max).map(|t| f(t as f64)).sum()
}

/// High-resolution graded quadrature used by the oracles.
fn quad(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let rule = QuadratureRule::gauss_legendre(96);
    rule.endpoint_graded(a, b, 8).into_iter().map(|(x, w)| w * f(x)).sum()
}

/// The eight two-regime weight formulas written out term by term, indexed
/// `[i][j][k]` with 0 for `[0, r)` and 1 for `[r, 1)`. The second term of
/// `w(1,2,2)` is taken with the whole-cycle index of the successor factor
/// starting at 1 and that of the predecessor factor at 0.
pub fn appendix_weights(alpha: f64, beta: f64, r: f64) -> [[[f64; 2]; 2]; 2] {
    let law = GammaLaw::new(alpha, beta).unwrap();
    let l = &law;
    let tm = 100;
    let w111 = quad(
        |u| {
            g(l, r - u) * g(l, u)
                + sum_from(1, tm, |t| gt(l, r - u + t, t - u)) * g(l, u)
                + g(l, r - u) * sum_from(1, tm, |t| gt(l, u + t, u - r + t))
                + sum_from(1, tm, |t| gt(l, r - u + t, t - u)) * sum_from(1, tm, |t| gt(l, u + t, u - r + t))
        },
        0.0,
        r,
    );
    let w112 = quad(
        |u| {
            sum_from(0, tm, |t| gt(l, 1.0 - u + t, r - u + t)) * g(l, u)
                + sum_from(0, tm, |t| gt(l, 1.0 - u + t, r - u + t)) * sum_from(1, tm, |t| gt(l, u + t, u + t - r))
        },
        0.0,
        r,
    );
    let w121 = quad(
        |u| sum_from(1, tm, |t| gt(l, r - u + t, t - u)) * sum_from(0, tm, |t| gt(l, u + t, u - r + t)),
        r,
        1.0,
    );
    let w122 = quad(
        |u| {
            g(l, 1.0 - u) * sum_from(0, tm, |t| gt(l, u + t, u - r + t))
                + sum_from(1, tm, |t| gt(l, 1.0 - u + t, r - u + t)) * sum_from(0, tm, |t| gt(l, u + t, u - r + t))
        },
        r,
        1.0,
    );
    let w222 = quad(
        |u| {
            g(l, 1.0 - u) * g(l, u - r)
                + g(l, 1.0 - u) * sum_from(1, tm, |t| gt(l, u - r + t, u - 1.0 + t))
                + sum_from(1, tm, |t| gt(l, 1.0 - u + t, r - u + t)) * g(l, u - r)
                + sum_from(1, tm, |t| gt(l, 1.0 - u + t, r - u + t)) * sum_from(1, tm, |t| gt(l, u - r + t, u - 1.0 + t))
        },
        r,
        1.0,
    );
    let w221 = quad(
        |u| {
            sum_from(1, tm, |t| gt(l, r - u + t, t - u)) * g(l, u - r)
                + sum_from(1, tm, |t| gt(l, r - u + t, t - u)) * sum_from(1, tm, |t| gt(l, u - r + t, u - 1.0 + t))
        },
        r,
        1.0,
    );
    let w211 = quad(
        |u| {
            g(l, r - u) * sum_from(1, tm, |t| gt(l, u - r + t, u - 1.0 + t))
                + sum_from(1, tm, |t| gt(l, r - u + t, t - u)) * sum_from(1, tm, |t| gt(l, u - r + t, u - 1.0 + t))
        },
        0.0,
        r,
    );
    let w212 = quad(
        |u| sum_from(0, tm, |t| gt(l, 1.0 - u + t, r - u + t)) * sum_from(1, tm, |t| gt(l, u - r + t, u - 1.0 + t)),
        0.0,
        r,
    );
    [[[w111, w112], [w121, w122]], [[w211, w212], [w221, w222]]]
}

/// Direct numerical integration of the triple joint density over the
/// latent cube, using only the transition density. The inner integrals run
/// over the offset from the middle state so the diagonal singularity sits
/// on a panel end; pieces also break at the thresholds.
pub fn brute_force_triple(x: [f64; 3], p: &TassParams) -> f64 {
    let kernel = LatentKernel::new(&p.latent, 100);
    let edges = p.edges();
    let rule = QuadratureRule::gauss_legendre(64);
    let x0_given = |i: usize| {
        normal_ln_pdf(x[0], p.a[i], p.sigma[i] * p.sigma[i] / (1.0 - p.phi[i] * p.phi[i])).exp()
    };
    let x1_given = |j: usize| {
        normal_ln_pdf(x[1], p.a[j] + p.phi[j] * (x[0] - p.a[j]), p.sigma[j] * p.sigma[j]).exp()
    };
    let x2_given = |k: usize| {
        normal_ln_pdf(x[2], p.a[k] + p.phi[k] * (x[1] - p.a[k]), p.sigma[k] * p.sigma[k]).exp()
    };
    // integral over the state y' = y1 + sign * d of h(regime(y')) k(d)
    let side = |y1: f64, sign: f64, h: &dyn Fn(usize) -> f64| -> f64 {
        let mut cuts: Vec<f64> = edges.iter().map(|e| sign * (e - y1)).collect();
        cuts.push(0.0);
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup();
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if hi <= lo {
                continue;
            }
            let mid = y1 + sign * 0.5 * (lo + hi);
            if !(0.0..1.0).contains(&mid) {
                continue;
            }
            let weight = h(regime(p, mid));
            // u is the forward offset from the earlier to the later state
            total += weight
                * rule
                    .endpoint_graded(lo, hi, 4)
                    .into_iter()
                    .map(|(u, wq)| wq * kernel.density_offset(u))
                    .sum::<f64>();
        }
        total
    };
    let mut total = 0.0;
    for j in 0..p.m() {
        for (y1, w1) in rule.endpoint_graded(edges[j], edges[j + 1], 8) {
            // earlier state y0 = y1 - u, forward offset y1 - y0 = u
            let before = side(y1, -1.0, &x0_given);
            let after = side(y1, 1.0, &x2_given);
            total += w1 * x1_given(j) * before * after;
        }
    }
    total
}

fn regime(p: &TassParams, y: f64) -> usize {
    p.thresholds.iter().take_while(|&&r| y >= r).count()
}

/// Trivariate Gaussian density of three consecutive stationary AR(1)
/// values, from the autocovariances `gamma_h = sigma^2 phi^h / (1 - phi^2)`.
pub fn ar1_triple_density(x: [f64; 3], phi: f64, a: f64, sigma: f64) -> f64 {
    let g0 = sigma * sigma / (1.0 - phi * phi);
    let cov = nalgebra::Matrix3::from_fn(|r, c| g0 * phi.powi((r as i32 - c as i32).abs()));
    let inv = cov.try_inverse().unwrap();
    let d = nalgebra::Vector3::new(x[0] - a, x[1] - a, x[2] - a);
    let q = (d.transpose() * inv * d)[(0, 0)];
    (-0.5 * q).exp() / ((2.0 * std::f64::consts::PI).powf(1.5) * cov.determinant().sqrt())
}

/// Exact Gaussian AR(1) maximum likelihood with a stationary start, by
/// golden-section search over `phi` on the profile likelihood.
pub fn ar1_exact_mle(x: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let loglik = |phi: f64, a: f64, s2: f64| -> f64 {
        let mut ll = normal_ln_pdf(x[0], a, s2 / (1.0 - phi * phi));
        for w in x.windows(2) {
            ll += normal_ln_pdf(w[1], a + phi * (w[0] - a), s2);
        }
        ll
    };
    // for fixed phi the stationary-start normal equations give a and s2
    let profile = |phi: f64| -> (f64, f64, f64) {
        let num = (1.0 - phi * phi) * x[0] + (1.0 - phi) * x.windows(2).map(|w| w[1] - phi * w[0]).sum::<f64>();
        let den = (1.0 - phi * phi) + (n - 1.0) * (1.0 - phi) * (1.0 - phi);
        let a = num / den;
        let rss = (1.0 - phi * phi) * (x[0] - a).powi(2)
            + x.windows(2).map(|w| (w[1] - a - phi * (w[0] - a)).powi(2)).sum::<f64>();
        let s2 = rss / n;
        (a, s2, loglik(phi, a, s2))
    };
    let (mut lo, mut hi) = (-0.999, 0.999);
    let gr = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let c = hi - gr * (hi - lo);
        let d = lo + gr * (hi - lo);
        if profile(c).2 > profile(d).2 {
            hi = d;
        } else {
            lo = c;
        }
    }
    let phi = 0.5 * (lo + hi);
    let (a, s2, _) = profile(phi);
    (phi, a, s2.sqrt())
}

/// Log joint of a latent path and the data, evaluated from scratch.
pub fn direct_log_joint(x: &[f64], y: &[f64], p: &TassParams) -> f64 {
    let kernel = LatentKernel::new(&p.latent, DEFAULT_JMAX);
    let j = p.regime_of(y[0]).unwrap();
    let mut total = normal_ln_pdf(x[0], p.a[j], p.stationary_variance(j));
    for t in 1..x.len() {
        let j = p.regime_of(y[t]).unwrap();
        total += kernel.ln_density(y[t - 1], y[t]);
        total += normal_ln_pdf(x[t], p.a[j] + p.phi[j] * (x[t - 1] - p.a[j]), p.sigma[j] * p.sigma[j]);
    }
    total
}
