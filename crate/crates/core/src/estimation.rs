//! CTL2 maximization, regime-count selection by BIC and sandwich
//! covariance of the estimator.

use std::cell::RefCell;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TassError};
use crate::likelihood::{ctl2_cached, cycles_resolved, ctl2_terms, LikelihoodSettings, TripleDensityCache};
use crate::model::{ObservedSeries, TassParams, MIN_REGIME_WIDTH};
use crate::numerics::optimize::{maximize, OptimizerConfig, Reparameterization};
use crate::numerics::quadrature::QuadratureRule;
use crate::numerics::special::GammaLaw;

/// Shape of the latent increments when a single regime leaves them
/// unidentified.
pub const SINGLE_REGIME_ALPHA: f64 = 0.5;

/// Options for [`fit_with`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub optimizer: OptimizerConfig,
    pub likelihood: LikelihoodSettings,
    /// Optimize the AR parameters with the latent part held at its
    /// starting value before the joint search.
    pub warm_start: bool,
    /// Compute the sandwich covariance after the fit.
    pub covariance: bool,
    /// Starting point; the data-driven heuristic is used when absent.
    pub start: Option<TassParams>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            optimizer: OptimizerConfig::default(),
            likelihood: LikelihoodSettings::default(),
            warm_start: true,
            covariance: false,
            start: None,
        }
    }
}

/// Outcome of a CTL2 fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub m: usize,
    pub n: usize,
    pub params: TassParams,
    pub ctl2_value: f64,
    pub bic: f64,
    /// Names of the estimated coordinates, in covariance order.
    pub parameter_names: Vec<String>,
    pub covariance: Option<Vec<Vec<f64>>>,
    pub converged: bool,
    pub restarts_used: usize,
    pub evaluations: usize,
}

impl FitResult {
    /// Square roots of the covariance diagonal.
    pub fn standard_errors(&self) -> Option<Vec<f64>> {
        self.covariance
            .as_ref()
            .map(|c| (0..c.len()).map(|i| c[i][i].max(0.0).sqrt()).collect())
    }
}

/// Average number of triples an observation enters, `3 (n - 2) / n`.
pub fn c2(n: usize) -> f64 {
    3.0 * (n as f64 - 2.0) / n as f64
}

/// `(4m + 2) ln n - (2 / C2) CTL2`.
pub fn bic(ctl2_value: f64, m: usize, n: usize) -> f64 {
    (4 * m + 2) as f64 * (n as f64).ln() - 2.0 / c2(n) * ctl2_value
}

/// Coordinates estimated for an `m`-regime fit: every entry of
/// [`TassParams::to_vector`] except the latent law when `m = 1`.
pub fn free_parameter_names(m: usize) -> Vec<String> {
    let mut names = TassParams::vector_names(m);
    if m == 1 {
        names.truncate(3);
    }
    names
}

fn free_vector(p: &TassParams) -> Vec<f64> {
    let mut v = p.to_vector();
    if p.m() == 1 {
        v.truncate(3);
    }
    v
}

fn params_from_free(m: usize, v: &[f64], latent: &GammaLaw) -> TassParams {
    if m == 1 {
        let mut full = v[..3].to_vec();
        full.extend([latent.alpha, latent.beta]);
        TassParams::from_vector_unchecked(1, &full)
    } else {
        TassParams::from_vector_unchecked(m, v)
    }
}

/// Unconstrained coordinates for the free parameters: `phi = tanh(u)`,
/// `a = center + scale u`, `sigma = exp(u)`, thresholds from softmax
/// widths with floor [`MIN_REGIME_WIDTH`], `alpha, beta = exp(u)`.
/// With `hold_latent` only the AR block is free and the rest is fixed.
#[derive(Debug, Clone)]
pub struct ParamTransform {
    m: usize,
    center: f64,
    scale: f64,
    held: Option<Vec<f64>>,
}

impl ParamTransform {
    pub fn new(m: usize, center: f64, scale: f64) -> Self {
        Self { m, center, scale: scale.max(1e-12), held: None }
    }

    /// Variant that searches over the AR block only, keeping the
    /// thresholds and latent law of `fixed`.
    pub fn holding_latent(m: usize, center: f64, scale: f64, fixed: &[f64]) -> Self {
        Self {
            held: Some(fixed[3 * m..].to_vec()),
            ..Self::new(m, center, scale)
        }
    }

    fn widths_to_logits(&self, thresholds: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut edges = vec![0.0];
        edges.extend_from_slice(thresholds);
        edges.push(1.0);
        let last = (edges[m] - edges[m - 1] - MIN_REGIME_WIDTH).max(1e-12);
        (0..m - 1)
            .map(|l| ((edges[l + 1] - edges[l] - MIN_REGIME_WIDTH).max(1e-12) / last).ln())
            .collect()
    }

    fn logits_to_thresholds(&self, logits: &[f64]) -> Vec<f64> {
        let m = self.m;
        let top = logits.iter().copied().fold(0.0, f64::max);
        let z: Vec<f64> = logits.iter().map(|u| (u - top).exp()).chain([(-top).exp()]).collect();
        let total: f64 = z.iter().sum();
        let slack = 1.0 - m as f64 * MIN_REGIME_WIDTH;
        let mut acc = 0.0;
        (0..m - 1)
            .map(|l| {
                acc += MIN_REGIME_WIDTH + slack * z[l] / total;
                acc
            })
            .collect()
    }
}

/// Search box for the latent Gamma shape and rate. Outside it the walk is
/// either frozen or wraps almost every step, and the weights stop carrying
/// information about the thresholds.
pub const ALPHA_RANGE: (f64, f64) = (1e-2, 1e2);
pub const BETA_RANGE: (f64, f64) = (1.0, 1e4);

impl Reparameterization for ParamTransform {
    fn to_natural(&self, u: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut v = Vec::with_capacity(4 * m + 1);
        for i in 0..m {
            v.push(u[3 * i].tanh());
            v.push(self.center + self.scale * u[3 * i + 1]);
            v.push(u[3 * i + 2].exp());
        }
        if let Some(held) = &self.held {
            v.extend_from_slice(held);
            return v;
        }
        if m > 1 {
            v.extend(self.logits_to_thresholds(&u[3 * m..4 * m - 1]));
            v.push(u[4 * m - 1].clamp(ALPHA_RANGE.0.ln(), ALPHA_RANGE.1.ln()).exp());
            v.push(u[4 * m].clamp(BETA_RANGE.0.ln(), BETA_RANGE.1.ln()).exp());
        }
        v
    }

    fn to_unconstrained(&self, x: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut u = Vec::with_capacity(4 * m + 1);
        for i in 0..m {
            u.push(x[3 * i].clamp(-0.999_999, 0.999_999).atanh());
            u.push((x[3 * i + 1] - self.center) / self.scale);
            u.push(x[3 * i + 2].ln());
        }
        if self.held.is_some() || m == 1 {
            return u;
        }
        u.extend(self.widths_to_logits(&x[3 * m..4 * m - 1]));
        u.push(x[4 * m - 1].clamp(ALPHA_RANGE.0, ALPHA_RANGE.1).ln());
        u.push(x[4 * m].clamp(BETA_RANGE.0, BETA_RANGE.1).ln());
        u
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Data-driven starting values: one-dimensional k-means from quantile
/// splits, per-group lag-one autocorrelation for `phi` (clamped to
/// `+-0.9`), equally spaced thresholds, `alpha = 0.5` and
/// `beta = alpha n / (4 m^2)`. Groups are ordered by mean.
pub fn initial_params(series: &ObservedSeries, m: usize) -> Result<TassParams> {
    let x = series.values();
    let n = x.len();
    let (_, sd_all) = mean_sd(x);
    let sd_all = if sd_all > 0.0 { sd_all } else { 1.0 };
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let mut centers: Vec<f64> = (0..m)
        .map(|g| {
            let lo = g * n / m;
            let hi = ((g + 1) * n / m).max(lo + 1).min(n);
            sorted[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let assign = |c: &[f64], v: f64| -> usize {
        (0..c.len())
            .min_by(|&a, &b| (v - c[a]).abs().total_cmp(&(v - c[b]).abs()))
            .unwrap_or(0)
    };
    for _ in 0..50 {
        let mut sums = vec![0.0; m];
        let mut counts = vec![0usize; m];
        for &v in x {
            let g = assign(&centers, v);
            sums[g] += v;
            counts[g] += 1;
        }
        let next: Vec<f64> = (0..m)
            .map(|g| if counts[g] > 0 { sums[g] / counts[g] as f64 } else { centers[g] })
            .collect();
        if next == centers {
            break;
        }
        centers = next;
    }
    centers.sort_by(|a, b| a.total_cmp(b));
    let labels: Vec<usize> = x.iter().map(|&v| assign(&centers, v)).collect();
    let mut phi = Vec::with_capacity(m);
    let mut a = Vec::with_capacity(m);
    let mut sigma = Vec::with_capacity(m);
    for g in 0..m {
        let members: Vec<f64> = x.iter().zip(&labels).filter(|(_, &l)| l == g).map(|(&v, _)| v).collect();
        let (mean, sd) = if members.len() >= 2 { mean_sd(&members) } else { (centers[g], sd_all) };
        let sd = if sd > 0.0 { sd } else { sd_all / m as f64 };
        // lag-one pairs ending in the group
        let pairs: Vec<(f64, f64)> = (1..n).filter(|&t| labels[t] == g).map(|t| (x[t - 1], x[t])).collect();
        let rho = if pairs.len() >= 3 {
            let (u, v): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let (mu, su) = mean_sd(&u);
            let (mv, sv) = mean_sd(&v);
            if su > 0.0 && sv > 0.0 {
                u.iter().zip(&v).map(|(p, q)| (p - mu) * (q - mv)).sum::<f64>() / ((u.len() as f64 - 1.0) * su * sv)
            } else {
                0.0
            }
        } else {
            0.0
        };
        let rho = if rho.is_finite() { rho.clamp(-0.9, 0.9) } else { 0.0 };
        phi.push(rho);
        a.push(mean);
        sigma.push(sd * (1.0 - rho * rho).sqrt());
    }
    let alpha = SINGLE_REGIME_ALPHA;
    let beta = alpha * n as f64 / (4.0 * (m * m) as f64);
    let thresholds = (1..m).map(|j| j as f64 / m as f64).collect();
    TassParams::new(phi, a, sigma, thresholds, GammaLaw::new(alpha, beta)?)
}

/// Objective over free natural coordinates, reusing the regime weights
/// while the latent block is unchanged.
struct Objective<'a> {
    series: &'a ObservedSeries,
    m: usize,
    latent: GammaLaw,
    settings: LikelihoodSettings,
    rule: QuadratureRule,
    cache: RefCell<Option<TripleDensityCache>>,
}

impl<'a> Objective<'a> {
    fn new(series: &'a ObservedSeries, m: usize, latent: GammaLaw, settings: LikelihoodSettings) -> Self {
        Self {
            series,
            m,
            latent,
            settings,
            rule: QuadratureRule::gauss_legendre(settings.quadrature_order),
            cache: RefCell::new(None),
        }
    }

    fn params(&self, v: &[f64]) -> TassParams {
        params_from_free(self.m, v, &self.latent)
    }

    fn cache_for(&self, p: &TassParams) -> TripleDensityCache {
        let mut slot = self.cache.borrow_mut();
        match slot.as_ref() {
            Some(c) if c.matches(p) => c.clone(),
            _ => {
                let c = TripleDensityCache::with_rule(p, self.settings, &self.rule);
                *slot = Some(c.clone());
                c
            }
        }
    }

    fn value(&self, v: &[f64]) -> f64 {
        let p = self.params(v);
        if p.validate().is_err() || !cycles_resolved(&p.latent, self.settings.j_max) {
            return f64::NEG_INFINITY;
        }
        let cache = self.cache_for(&p);
        ctl2_cached(self.series, &p, &cache).unwrap_or(f64::NEG_INFINITY)
    }

    fn terms(&self, v: &[f64]) -> Result<Vec<f64>> {
        let p = self.params(v);
        p.validate()?;
        let cache = self.cache_for(&p);
        ctl2_terms(self.series, &p, &cache)
    }
}

/// CTL2 fit with default options.
pub fn fit(series: &ObservedSeries, m: usize, cfg: &OptimizerConfig) -> Result<FitResult> {
    fit_with(series, m, &FitOptions { optimizer: cfg.clone(), ..Default::default() })
}

/// Maximizes CTL2 over an `m`-regime model. The estimate is reported in
/// identified form (smallest regime mean first).
pub fn fit_with(series: &ObservedSeries, m: usize, opts: &FitOptions) -> Result<FitResult> {
    if m == 0 {
        return Err(TassError::InvalidParams("m must be at least 1".into()));
    }
    opts.optimizer.validate()?;
    let n = series.len();
    let start = match &opts.start {
        Some(p) if p.m() == m => {
            p.validate()?;
            p.clone()
        }
        Some(p) => {
            return Err(TassError::InvalidParams(format!(
                "starting point has {} regimes, fit asked for {m}",
                p.m()
            )))
        }
        None => initial_params(series, m)?,
    };
    let (center, scale) = mean_sd(series.values());
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let objective = Objective::new(series, m, start.latent, opts.likelihood);
    let mut x0 = free_vector(&start);
    let mut evaluations = 0;

    if opts.warm_start && m > 1 {
        let held = ParamTransform::holding_latent(m, center, scale, &x0);
        let cfg = OptimizerConfig { restarts: 1, ..opts.optimizer.clone() };
        let ar = maximize(|v: &[f64]| objective.value(v), &x0, &held, &cfg);
        evaluations += ar.evaluations;
        if ar.value.is_finite() {
            x0 = ar.argmax;
        }
    }
    let transform = ParamTransform::new(m, center, scale);
    let res = maximize(|v: &[f64]| objective.value(v), &x0, &transform, &opts.optimizer);
    evaluations += res.evaluations;
    if !res.value.is_finite() {
        return Err(TassError::Degenerate(format!(
            "CTL2 is not finite anywhere the optimizer looked (m = {m})"
        )));
    }
    let params = objective.params(&res.argmax).identified();
    params.validate()?;
    let mut out = FitResult {
        m,
        n,
        ctl2_value: res.value,
        bic: bic(res.value, m, n),
        parameter_names: free_parameter_names(m),
        covariance: None,
        converged: res.converged,
        restarts_used: res.restarts_used,
        evaluations,
        params,
    };
    if opts.covariance {
        out.covariance = Some(sandwich_covariance_with(series, &out.params, opts.likelihood)?);
    }
    Ok(out)
}

/// Fits of every regime count up to `m_max` and the BIC minimizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSelection {
    pub fits: Vec<FitResult>,
    pub chosen_m: usize,
}

impl ModelSelection {
    pub fn chosen(&self) -> &FitResult {
        &self.fits[self.chosen_m - 1]
    }
}

/// BIC minimizer among precomputed fits; ties go to the smaller `m`.
pub fn choose_by_bic(fits: &[FitResult]) -> usize {
    let mut best = 0;
    for (i, f) in fits.iter().enumerate() {
        if f.bic < fits[best].bic {
            best = i;
        }
    }
    fits[best].m
}

/// Fits `m = 1..=m_max` (in parallel) and picks the smallest BIC.
pub fn select_model(series: &ObservedSeries, m_max: usize, cfg: &OptimizerConfig) -> Result<ModelSelection> {
    select_model_with(series, m_max, &FitOptions { optimizer: cfg.clone(), ..Default::default() })
}

pub fn select_model_with(series: &ObservedSeries, m_max: usize, opts: &FitOptions) -> Result<ModelSelection> {
    if m_max == 0 {
        return Err(TassError::InvalidParams("m_max must be at least 1".into()));
    }
    let fits = (1..=m_max)
        .into_par_iter()
        .map(|m| fit_with(series, m, &FitOptions { start: None, ..opts.clone() }))
        .collect::<Result<Vec<_>>>()?;
    let chosen_m = choose_by_bic(&fits);
    Ok(ModelSelection { fits, chosen_m })
}

/// Largest condition number accepted for the averaged Hessian.
pub const MAX_CONDITION: f64 = 1e12;

/// Sandwich covariance with default likelihood settings.
pub fn sandwich_covariance(series: &ObservedSeries, params: &TassParams) -> Result<Vec<Vec<f64>>> {
    sandwich_covariance_with(series, params, LikelihoodSettings::default())
}

/// `H^-1 S H^-1 / T` over the free coordinates, where `H` is minus the
/// average Hessian of the per-triple log densities, `S` is the Bartlett
/// long-run variance (bandwidth `floor(n^(1/3))`) of the per-triple
/// scores and `T = n - 2`. Derivatives are central differences with
/// relative step `1e-4`.
pub fn sandwich_covariance_with(
    series: &ObservedSeries,
    params: &TassParams,
    settings: LikelihoodSettings,
) -> Result<Vec<Vec<f64>>> {
    params.validate()?;
    let m = params.m();
    let objective = Objective::new(series, m, params.latent, settings);
    let theta = free_vector(params);
    let p = theta.len();
    let steps: Vec<f64> = theta.iter().map(|v| 1e-4 * v.abs().max(1e-2)).collect();
    let eval = |delta: &[(usize, f64)]| -> Result<Vec<f64>> {
        let mut v = theta.clone();
        for &(i, s) in delta {
            v[i] += s;
        }
        objective.terms(&v)
    };
    let center = eval(&[])?;
    let t_count = center.len();
    let mut plus = Vec::with_capacity(p);
    let mut minus = Vec::with_capacity(p);
    for i in 0..p {
        plus.push(eval(&[(i, steps[i])])?);
        minus.push(eval(&[(i, -steps[i])])?);
    }
    // scores
    let scores: Vec<Vec<f64>> = (0..t_count)
        .map(|t| (0..p).map(|i| (plus[i][t] - minus[i][t]) / (2.0 * steps[i])).collect())
        .collect();
    // averaged Hessian
    let mut hess = DMatrix::<f64>::zeros(p, p);
    for i in 0..p {
        let d2: f64 = (0..t_count).map(|t| plus[i][t] - 2.0 * center[t] + minus[i][t]).sum();
        hess[(i, i)] = d2 / (steps[i] * steps[i] * t_count as f64);
        for j in 0..i {
            let pp = eval(&[(i, steps[i]), (j, steps[j])])?;
            let pm = eval(&[(i, steps[i]), (j, -steps[j])])?;
            let mp = eval(&[(i, -steps[i]), (j, steps[j])])?;
            let mm = eval(&[(i, -steps[i]), (j, -steps[j])])?;
            let s: f64 = (0..t_count).map(|t| pp[t] - pm[t] - mp[t] + mm[t]).sum();
            let v = s / (4.0 * steps[i] * steps[j] * t_count as f64);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    let info = -hess;
    let sv = info.clone().svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition < MAX_CONDITION) {
        return Err(TassError::SingularHessian { condition });
    }
    let inv = info.try_inverse().ok_or(TassError::SingularHessian { condition })?;
    let lrv = long_run_variance(&scores, (series.len() as f64).cbrt().floor() as usize);
    let cov = &inv * lrv * &inv / t_count as f64;
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok((0..p).map(|i| (0..p).map(|j| cov[(i, j)]).collect()).collect())
}

/// Bartlett-weighted long-run covariance of the rows of `x` (centered).
pub fn long_run_variance(x: &[Vec<f64>], bandwidth: usize) -> DMatrix<f64> {
    let n = x.len();
    let p = x.first().map_or(0, |r| r.len());
    let mut mean = vec![0.0; p];
    for row in x {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / n as f64;
        }
    }
    let centered: Vec<Vec<f64>> = x.iter().map(|r| r.iter().zip(&mean).map(|(v, m)| v - m).collect()).collect();
    let gamma = |h: usize| -> DMatrix<f64> {
        let mut g = DMatrix::<f64>::zeros(p, p);
        for t in h..n {
            for i in 0..p {
                for j in 0..p {
                    g[(i, j)] += centered[t][i] * centered[t - h][j];
                }
            }
        }
        g / n as f64
    };
    let mut s = gamma(0);
    for h in 1..=bandwidth.min(n.saturating_sub(1)) {
        let w = 1.0 - h as f64 / (bandwidth as f64 + 1.0);
        let g = gamma(h);
        s += (&g + g.transpose()) * w;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bic_arithmetic() {
        assert!((c2(1000) - 2.994).abs() < 1e-12);
        assert!((bic(0.0, 2, 1000) - 10.0 * 1000f64.ln()).abs() < 1e-12);
        assert!((bic(0.0, 2, 1000) - 69.08).abs() < 5e-3);
        for m in 1..6 {
            assert!(bic(-500.0, m + 1, 800) > bic(-500.0, m, 800));
        }
    }

    #[test]
    fn transform_round_trips_and_respects_constraints() {
        let t = ParamTransform::new(3, 1.0, 2.0);
        let p = TassParams::new(
            vec![0.2, -0.5, 0.8],
            vec![-1.0, 0.5, 3.0],
            vec![0.5, 1.0, 2.0],
            vec![0.2, 0.7],
            GammaLaw::new(0.7, 30.0).unwrap(),
        )
        .unwrap();
        let v = p.to_vector();
        let back = t.to_natural(&t.to_unconstrained(&v));
        for (a, b) in v.iter().zip(&back) {
            assert!((a - b).abs() < 1e-9 * a.abs().max(1.0), "{v:?} vs {back:?}");
        }
        for u in [vec![40.0; 13], vec![-40.0; 13], vec![0.0; 13]] {
            let q = TassParams::from_vector_unchecked(3, &t.to_natural(&u));
            let edges = q.edges();
            assert!(edges.windows(2).all(|w| w[1] - w[0] >= MIN_REGIME_WIDTH - 1e-12), "{edges:?}");
        }
    }

    #[test]
    fn long_run_variance_of_white_noise_is_its_variance() {
        let x: Vec<Vec<f64>> = (0..4000).map(|i| vec![if i % 2 == 0 { 1.0 } else { -1.0 }]).collect();
        // alternating series: strong negative autocorrelation shrinks it
        let s = long_run_variance(&x, 0);
        assert!((s[(0, 0)] - 1.0).abs() < 1e-12);
        let s = long_run_variance(&x, 5);
        assert!(s[(0, 0)] < 0.5);
    }

    #[test]
    fn initial_values_are_valid_and_ordered() {
        let p = TassParams::two_regime_benchmark();
        let sim = crate::model::simulate(&p, 1000, &mut crate::numerics::random::stream_rng(1, &[])).unwrap();
        for m in 1..=4 {
            let q = initial_params(&sim.series, m).unwrap();
            assert!(q.validate().is_ok());
            assert!(q.a.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}
