//! Future change-points: hitting-time survival of the latent random walk,
//! point predictor and prediction intervals, and particle forecasts of
//! future observations.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TassError};
use crate::inference::ParticleEnsemble;
use crate::model::{latent_step, TassParams};
use crate::numerics::random::{standard_normal, GammaSampler};
use crate::numerics::special::GammaLaw;

/// Default truncation of the survival curve.
pub const DEFAULT_TAIL_EPS: f64 = 1e-8;

/// Hard cap on the evaluated horizon.
pub const MAX_HORIZON: usize = 1_000_000;

/// The `k`-th threshold reached after `y` in cyclic order and the number of
/// whole unit cycles the walk completes before reaching it. The barrier to
/// be covered is `threshold + wraps - y`.
pub fn next_threshold(y: f64, k: usize, params: &TassParams) -> Result<(f64, u64)> {
    if k == 0 {
        return Err(TassError::Domain("change-point ordinal k starts at 1".into()));
    }
    let m = params.m();
    let edges = params.edges();
    // position of the first edge above y, counted 1..m
    let first = params.regime_of(y)? + 1;
    let step = first + k - 2;
    let idx = step % m + 1;
    Ok((edges[idx], (step / m) as u64))
}

fn barrier(y: f64, k: usize, params: &TassParams) -> Result<f64> {
    let (r, wraps) = next_threshold(y, k, params)?;
    Ok(r + wraps as f64 - y)
}

/// Survival function of the hitting time `T_k`, averaged over particles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingDistribution {
    pub k: usize,
    /// `survival[t - 1] = P(T_k > t)` for `t = 1..=truncation_horizon`.
    pub survival: Vec<f64>,
    pub truncation_horizon: usize,
    /// Geometric-decay estimate of the survival mass beyond the horizon.
    pub tail_bound: f64,
    law: GammaLaw,
    /// Distinct barriers and their particle counts.
    barriers: Vec<(f64, usize)>,
    particles: usize,
}

impl HittingDistribution {
    /// `P(T_k > t)` for integer `t >= 0`.
    pub fn survival_at(&self, t: usize) -> f64 {
        match t {
            0 => 1.0,
            t if t <= self.survival.len() => self.survival[t - 1],
            t => self.survival_continuous(t as f64),
        }
    }

    /// The survival formula evaluated at a real horizon `tau > 0`.
    pub fn survival_continuous(&self, tau: f64) -> f64 {
        if tau <= 0.0 {
            return 1.0;
        }
        let law = self.law.convolved(tau);
        let total: f64 = self.barriers.iter().map(|&(b, c)| c as f64 * law.cdf(b)).sum();
        (total / self.particles as f64).clamp(0.0, 1.0)
    }

    pub fn barriers(&self) -> &[(f64, usize)] {
        &self.barriers
    }
}

/// Hitting-time survival for the `k`-th future change-point from the
/// terminal states of a filter run.
pub fn hitting_distribution(
    ensemble: &ParticleEnsemble,
    params: &TassParams,
    k: usize,
    tail_eps: f64,
) -> Result<HittingDistribution> {
    hitting_distribution_from_states(&ensemble.terminal_states(), params, k, tail_eps)
}

pub fn hitting_distribution_from_states(
    states: &[f64],
    params: &TassParams,
    k: usize,
    tail_eps: f64,
) -> Result<HittingDistribution> {
    params.validate()?;
    if states.is_empty() {
        return Err(TassError::Domain("no particle states to predict from".into()));
    }
    if !(tail_eps > 0.0 && tail_eps < 1.0) {
        return Err(TassError::Domain(format!("tail_eps = {tail_eps} outside (0, 1)")));
    }
    let mut bs = states.iter().map(|&y| barrier(y, k, params)).collect::<Result<Vec<_>>>()?;
    bs.sort_by(f64::total_cmp);
    let mut barriers: Vec<(f64, usize)> = Vec::new();
    for b in bs {
        match barriers.last_mut() {
            Some((v, c)) if *v == b => *c += 1,
            _ => barriers.push((b, 1)),
        }
    }
    let mut dist = HittingDistribution {
        k,
        survival: Vec::new(),
        truncation_horizon: 0,
        tail_bound: 0.0,
        law: params.latent,
        barriers,
        particles: states.len(),
    };
    let mut prev = 1.0;
    for t in 1..=MAX_HORIZON {
        // clamp so rounding never lets the curve rise
        let s = dist.survival_continuous(t as f64).min(prev);
        dist.survival.push(s);
        prev = s;
        if s < tail_eps {
            break;
        }
    }
    dist.truncation_horizon = dist.survival.len();
    let len = dist.survival.len();
    let last = dist.survival[len - 1];
    let ratio = if len >= 2 && dist.survival[len - 2] > 0.0 { last / dist.survival[len - 2] } else { 0.0 };
    dist.tail_bound = if ratio < 1.0 { last * ratio / (1.0 - ratio) } else { f64::INFINITY };
    Ok(dist)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionInterval {
    /// Coverage level in (0, 1).
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangePointForecast {
    pub k: usize,
    pub point: f64,
    pub intervals: Vec<PredictionInterval>,
}

impl ChangePointForecast {
    pub fn interval(&self, level: f64) -> Option<&PredictionInterval> {
        self.intervals.iter().find(|i| (i.level - level).abs() < 1e-12)
    }
}

/// Real `tau` with `1 - S(tau) = q`, by bisection.
fn hitting_quantile(dist: &HittingDistribution, q: f64) -> f64 {
    let cdf = |tau: f64| 1.0 - dist.survival_continuous(tau);
    let mut lo = 0.0;
    let mut hi = dist.truncation_horizon.max(1) as f64;
    while cdf(hi) < q && hi < MAX_HORIZON as f64 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-10 * hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Point predictor `n + sum_{t>=1} P(T_k > t)` and equal-tailed intervals
/// at each coverage level.
pub fn predict_change_point(dist: &HittingDistribution, n: usize, levels: &[f64]) -> Result<ChangePointForecast> {
    let mut intervals = Vec::with_capacity(levels.len());
    for &level in levels {
        if !(level > 0.0 && level < 1.0) {
            return Err(TassError::Domain(format!("coverage level {level} outside (0, 1)")));
        }
        let a0 = 1.0 - level;
        intervals.push(PredictionInterval {
            level,
            lower: n as f64 + hitting_quantile(dist, a0 / 2.0),
            upper: n as f64 + hitting_quantile(dist, 1.0 - a0 / 2.0),
        });
    }
    let point = n as f64 + crate::numerics::pairwise_sum(&dist.survival);
    Ok(ChangePointForecast { k: dist.k, point, intervals })
}

/// Forecasts for the next `k_max` change-points.
pub fn forecast_change_points(
    ensemble: &ParticleEnsemble,
    params: &TassParams,
    n: usize,
    k_max: usize,
    levels: &[f64],
    tail_eps: f64,
) -> Result<Vec<ChangePointForecast>> {
    (1..=k_max)
        .map(|k| predict_change_point(&hitting_distribution(ensemble, params, k, tail_eps)?, n, levels))
        .collect()
}

/// Mean of forward simulations of `(y, x)` from every particle, for
/// `horizon` steps past the last observation `x_last`.
pub fn forecast_series<R: Rng + ?Sized>(
    ensemble: &ParticleEnsemble,
    params: &TassParams,
    x_last: f64,
    horizon: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    forecast_from_states(&ensemble.terminal_states(), params, x_last, horizon, rng)
}

pub fn forecast_from_states<R: Rng + ?Sized>(
    states: &[f64],
    params: &TassParams,
    x_last: f64,
    horizon: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    params.validate()?;
    if horizon == 0 {
        return Err(TassError::Domain("forecast horizon must be at least 1".into()));
    }
    if states.is_empty() {
        return Err(TassError::Domain("no particle states to forecast from".into()));
    }
    let sampler = GammaSampler::new(&params.latent);
    let mut sums = vec![0.0; horizon];
    for &y0 in states {
        let (mut y, mut x) = (y0, x_last);
        for s in sums.iter_mut() {
            y = latent_step(y, sampler.sample(rng)).0;
            let j = params.regime_of_unchecked(y);
            x = params.a[j] + params.phi[j] * (x - params.a[j]) + params.sigma[j] * standard_normal(rng);
            *s += x;
        }
    }
    let n = states.len() as f64;
    Ok(sums.into_iter().map(|s| s / n).collect())
}
