//! Residuals of a fitted model and the goodness-of-fit checks applied to
//! them: Ljung-Box, Anderson-Darling against a fully specified law, QQ
//! bands from Beta order statistics, and sample autocorrelations.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{Result, TassError};
use crate::inference::MapDecoding;
use crate::model::{LatentPath, ObservedSeries, TassParams};
use crate::numerics::special::{chi_square_sf, std_normal_cdf, std_normal_quantile, GammaLaw};

pub const DEFAULT_LAG: usize = 12;

/// Standardized observation residuals `e_hat` and latent increments
/// `eps_hat`, both for `t = 2..n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSet {
    pub e_hat: Vec<f64>,
    pub eps_hat: Vec<f64>,
}

pub fn residuals(series: &ObservedSeries, decoding: &MapDecoding, params: &TassParams) -> Result<ResidualSet> {
    residuals_from_path(series, &decoding.path, params)
}

pub fn residuals_from_path(series: &ObservedSeries, path: &LatentPath, params: &TassParams) -> Result<ResidualSet> {
    params.validate()?;
    let x = series.values();
    let y = path.values();
    if x.len() != y.len() {
        return Err(TassError::Domain(format!(
            "series has {} values but the latent path has {}",
            x.len(),
            y.len()
        )));
    }
    let mut e_hat = Vec::with_capacity(x.len() - 1);
    let mut eps_hat = Vec::with_capacity(x.len() - 1);
    for t in 1..x.len() {
        let j = params.regime_of_unchecked(y[t]);
        e_hat.push((x[t] - params.a[j] - params.phi[j] * (x[t - 1] - params.a[j])) / params.sigma[j]);
        let d = y[t] - y[t - 1];
        eps_hat.push(if d < 0.0 { d + 1.0 } else { d });
    }
    Ok(ResidualSet { e_hat, eps_hat })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test_name: String,
    pub statistic: f64,
    pub p_value: f64,
    /// Lag or reference-law description.
    pub detail: String,
}

impl TestReport {
    pub fn rejects(&self, level: f64) -> bool {
        self.p_value < level
    }
}

/// Sample autocorrelations at lags `0..=max_lag`.
pub fn autocorrelations(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if max_lag >= n {
        return Err(TassError::Domain(format!("lag {max_lag} needs more than {n} observations")));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let c0: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    if !(c0 > 0.0) {
        return Err(TassError::Degenerate("autocorrelations of a constant sequence are undefined".into()));
    }
    Ok((0..=max_lag)
        .map(|h| {
            if h == 0 {
                return 1.0;
            }
            x.iter().zip(&x[h..]).map(|(a, b)| (a - mean) * (b - mean)).sum::<f64>() / c0
        })
        .collect())
}

/// Autocorrelations with the `±1.96/sqrt(n)` reference band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Acf {
    pub values: Vec<f64>,
    pub bound: f64,
}

pub fn acf(x: &[f64], max_lag: usize) -> Result<Acf> {
    Ok(Acf {
        values: autocorrelations(x, max_lag)?,
        bound: 1.96 / (x.len() as f64).sqrt(),
    })
}

pub fn ljung_box(x: &[f64], lag: usize) -> Result<TestReport> {
    if lag == 0 {
        return Err(TassError::Domain("Ljung-Box lag must be positive".into()));
    }
    let rho = autocorrelations(x, lag)?;
    let n = x.len() as f64;
    let q = n * (n + 2.0) * (1..=lag).map(|h| rho[h] * rho[h] / (n - h as f64)).sum::<f64>();
    Ok(TestReport {
        test_name: "ljung-box".into(),
        statistic: q,
        p_value: chi_square_sf(q, lag as f64).clamp(0.0, 1.0),
        detail: format!("lag {lag}"),
    })
}

/// Fully specified reference law for Anderson-Darling and QQ bands.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TargetLaw {
    StandardNormal,
    Gamma(GammaLaw),
}

impl TargetLaw {
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            TargetLaw::StandardNormal => std_normal_cdf(x),
            TargetLaw::Gamma(g) => g.cdf(x),
        }
    }

    pub fn quantile(&self, p: f64) -> f64 {
        match self {
            TargetLaw::StandardNormal => std_normal_quantile(p),
            TargetLaw::Gamma(g) => g.quantile(p),
        }
    }

    fn describe(&self) -> String {
        match self {
            TargetLaw::StandardNormal => "N(0, 1)".into(),
            TargetLaw::Gamma(g) => format!("Gamma({}, {})", g.alpha, g.beta),
        }
    }
}

/// Limiting CDF of the A² statistic (Marsaglia and Marsaglia, 2004).
fn ad_limit_cdf(z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    if z < 2.0 {
        (-1.2337141 / z).exp() / z.sqrt()
            * (2.00012 + (0.247105 - (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * z) * z) * z) * z) * z)
    } else {
        (-(1.0776 - (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * z) * z) * z) * z) * z).exp()).exp()
    }
}

/// Finite-sample correction to [`ad_limit_cdf`] for sample size `n`.
fn ad_error_fix(n: f64, x: f64) -> f64 {
    if x > 0.8 {
        return (-130.2137 + (745.2337 - (1705.091 - (1950.646 - (1116.360 - 255.7844 * x) * x) * x) * x) * x) / n;
    }
    let c = 0.01265 + 0.1757 / n;
    if x < c {
        let t = x / c;
        let t = t.sqrt() * (1.0 - t) * (49.0 * t - 102.0);
        return t * (0.0037 / (n * n) + 0.00078 / n + 0.00006) / n;
    }
    let t = (x - c) / (0.8 - c);
    let t = -0.00022633 + (6.54034 - (14.6538 - (14.458 - (8.259 - 1.91864 * t) * t) * t) * t) * t;
    t * (0.04213 + 0.01365 / n) / n
}

/// `P(A² <= z)` for a sample of size `n` from the hypothesized law.
pub fn anderson_darling_cdf(n: usize, z: f64) -> f64 {
    let x = ad_limit_cdf(z);
    (x + ad_error_fix(n as f64, x)).clamp(0.0, 1.0)
}

pub fn anderson_darling(x: &[f64], target: TargetLaw) -> Result<TestReport> {
    let n = x.len();
    if n < 8 {
        return Err(TassError::Domain(format!("Anderson-Darling needs at least 8 values, got {n}")));
    }
    let mut u: Vec<f64> = x.iter().map(|&v| target.cdf(v)).collect();
    u.sort_by(f64::total_cmp);
    // keep the logs finite for values beyond double precision in either tail
    let tiny = 1e-300;
    let nf = n as f64;
    let s: f64 = (0..n)
        .map(|i| {
            let lo = u[i].max(tiny).ln();
            let hi = (1.0 - u[n - 1 - i]).max(tiny).ln();
            (2.0 * i as f64 + 1.0) * (lo + hi)
        })
        .sum();
    let a2 = -nf - s / nf;
    Ok(TestReport {
        test_name: "anderson-darling".into(),
        statistic: a2,
        p_value: 1.0 - anderson_darling_cdf(n, a2),
        detail: target.describe(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QqPoint {
    pub sample: f64,
    pub theoretical: f64,
    pub lower: f64,
    pub upper: f64,
}

/// QQ points with pointwise bands: the `k`-th order statistic of `n`
/// uniforms is Beta(k, n + 1 - k), mapped through the target quantile.
/// The theoretical point is the quantile of the Beta median.
pub fn qq_band(sample: &[f64], target: TargetLaw, level: f64) -> Result<Vec<QqPoint>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(TassError::Domain(format!("level {level} outside (0, 1)")));
    }
    if sample.is_empty() {
        return Err(TassError::Domain("empty sample".into()));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let tail = (1.0 - level) / 2.0;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let k = (i + 1) as f64;
            let b = Beta::new(k, n as f64 + 1.0 - k).map_err(|e| TassError::Domain(e.to_string()))?;
            Ok(QqPoint {
                sample: s,
                theoretical: target.quantile(b.inverse_cdf(0.5)),
                lower: target.quantile(b.inverse_cdf(tail)),
                upper: target.quantile(b.inverse_cdf(1.0 - tail)),
            })
        })
        .collect()
}

/// The four residual checks: Ljung-Box and Anderson-Darling on both
/// residual sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticSummary {
    pub ljung_box_e: TestReport,
    pub ljung_box_eps: TestReport,
    pub anderson_darling_e: TestReport,
    pub anderson_darling_eps: TestReport,
}

impl DiagnosticSummary {
    pub fn reports(&self) -> [&TestReport; 4] {
        [&self.ljung_box_e, &self.ljung_box_eps, &self.anderson_darling_e, &self.anderson_darling_eps]
    }
}

pub fn diagnose(res: &ResidualSet, params: &TassParams, lag: usize) -> Result<DiagnosticSummary> {
    Ok(DiagnosticSummary {
        ljung_box_e: ljung_box(&res.e_hat, lag)?,
        ljung_box_eps: ljung_box(&res.eps_hat, lag)?,
        anderson_darling_e: anderson_darling(&res.e_hat, TargetLaw::StandardNormal)?,
        anderson_darling_eps: anderson_darling(&res.eps_hat, TargetLaw::Gamma(params.latent))?,
    })
}
