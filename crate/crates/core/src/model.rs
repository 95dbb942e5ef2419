//! TASS(m) parameters, data containers, simulation and the latent
//! transition density.
//!
//! Conventions used throughout the crate:
//! - regime indices are 0-based: regime `j` is `[r_j, r_{j+1})` with
//!   `r_0 = 0` and `r_m = 1` (file outputs print them 1-based);
//! - time indices in change-point lists are 1-based observation numbers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TassError};
use crate::numerics::random::{standard_normal, uniform, GammaSampler};
use crate::numerics::special::{ln_gamma, GammaLaw};

/// Smallest admissible regime width (including the wrap-around regime).
pub const MIN_REGIME_WIDTH: f64 = 0.01;

/// Default truncation of the wrapped sums over whole latent cycles.
pub const DEFAULT_JMAX: usize = 100;

/// Parameter vector of a TASS(m) model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TassParams {
    pub phi: Vec<f64>,
    pub a: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Interior thresholds `r_1 < ... < r_{m-1}` in `(0, 1)`.
    pub thresholds: Vec<f64>,
    pub latent: GammaLaw,
}

impl TassParams {
    pub fn new(
        phi: Vec<f64>,
        a: Vec<f64>,
        sigma: Vec<f64>,
        thresholds: Vec<f64>,
        latent: GammaLaw,
    ) -> Result<Self> {
        let p = Self { phi, a, sigma, thresholds, latent };
        p.validate()?;
        Ok(p)
    }

    /// Plain AR(1) as a one-regime model. The latent law is irrelevant
    /// to the observations when `m = 1`.
    pub fn ar1(phi: f64, a: f64, sigma: f64) -> Result<Self> {
        Self::new(vec![phi], vec![a], vec![sigma], vec![], GammaLaw { alpha: 0.5, beta: 50.0 })
    }

    pub fn m(&self) -> usize {
        self.phi.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.m();
        let bad = |msg: String| Err(TassError::InvalidParams(msg));
        if m == 0 {
            return bad("at least one regime is required".into());
        }
        if self.a.len() != m || self.sigma.len() != m || self.thresholds.len() + 1 != m {
            return bad(format!(
                "inconsistent lengths: phi {}, a {}, sigma {}, thresholds {}",
                m,
                self.a.len(),
                self.sigma.len(),
                self.thresholds.len()
            ));
        }
        for i in 0..m {
            if !(self.phi[i].abs() < 1.0) {
                return bad(format!("|phi_{}| = {} must be < 1", i + 1, self.phi[i].abs()));
            }
            if !(self.sigma[i] > 0.0 && self.sigma[i].is_finite()) {
                return bad(format!("sigma_{} = {} must be positive", i + 1, self.sigma[i]));
            }
            if !self.a[i].is_finite() {
                return bad(format!("a_{} is not finite", i + 1));
            }
        }
        let edges = self.edges();
        for w in edges.windows(2) {
            if !(w[1] - w[0] >= MIN_REGIME_WIDTH - 1e-12) {
                return bad(format!(
                    "thresholds {:?} must increase with gaps >= {MIN_REGIME_WIDTH}",
                    self.thresholds
                ));
            }
        }
        GammaLaw::new(self.latent.alpha, self.latent.beta)?;
        Ok(())
    }

    /// `[0, r_1, ..., r_{m-1}, 1]`.
    pub fn edges(&self) -> Vec<f64> {
        let mut e = Vec::with_capacity(self.m() + 1);
        e.push(0.0);
        e.extend_from_slice(&self.thresholds);
        e.push(1.0);
        e
    }

    /// Regime (0-based) containing latent value `y`.
    pub fn regime_of(&self, y: f64) -> Result<usize> {
        if !(0.0..1.0).contains(&y) {
            return Err(TassError::Domain(format!("latent value {y} outside [0, 1)")));
        }
        Ok(self.regime_of_unchecked(y))
    }

    #[inline]
    pub(crate) fn regime_of_unchecked(&self, y: f64) -> usize {
        self.thresholds.iter().take_while(|&&r| y >= r).count()
    }

    /// Stationary variance of regime `i`'s AR(1) law.
    pub fn stationary_variance(&self, i: usize) -> f64 {
        self.sigma[i] * self.sigma[i] / (1.0 - self.phi[i] * self.phi[i])
    }

    /// True when `a_1` is the smallest regime mean.
    pub fn is_identified(&self) -> bool {
        self.a.iter().all(|&v| v >= self.a[0])
    }

    /// Equivalent parameterization with the circle rotated so that the
    /// regime with the smallest mean comes first. The latent dynamics are
    /// invariant under rotation, so the observation law is unchanged.
    pub fn identified(&self) -> TassParams {
        let start = (0..self.m())
            .min_by(|&i, &j| self.a[i].total_cmp(&self.a[j]))
            .unwrap_or(0);
        self.rotated(start)
    }

    /// Rotation that makes regime `start` the first one.
    pub fn rotated(&self, start: usize) -> TassParams {
        let m = self.m();
        if start == 0 || m == 1 {
            return self.clone();
        }
        let edges = self.edges();
        let origin = edges[start];
        let order: Vec<usize> = (0..m).map(|k| (start + k) % m).collect();
        let thresholds = (1..m)
            .map(|k| {
                let e = edges[(start + k) % m];
                let v = e - origin;
                if v <= 0.0 { v + 1.0 } else { v }
            })
            .collect();
        TassParams {
            phi: order.iter().map(|&i| self.phi[i]).collect(),
            a: order.iter().map(|&i| self.a[i]).collect(),
            sigma: order.iter().map(|&i| self.sigma[i]).collect(),
            thresholds,
            latent: self.latent,
        }
    }

    /// `(phi_1, a_1, sigma_1, ..., phi_m, a_m, sigma_m, r_1..r_{m-1}, alpha, beta)`.
    pub fn to_vector(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(4 * self.m() + 1);
        for i in 0..self.m() {
            v.extend([self.phi[i], self.a[i], self.sigma[i]]);
        }
        v.extend_from_slice(&self.thresholds);
        v.extend([self.latent.alpha, self.latent.beta]);
        v
    }

    /// Inverse of [`to_vector`](Self::to_vector), without validation.
    pub fn from_vector_unchecked(m: usize, v: &[f64]) -> TassParams {
        let mut phi = Vec::with_capacity(m);
        let mut a = Vec::with_capacity(m);
        let mut sigma = Vec::with_capacity(m);
        for i in 0..m {
            phi.push(v[3 * i]);
            a.push(v[3 * i + 1]);
            sigma.push(v[3 * i + 2]);
        }
        let thresholds = v[3 * m..4 * m - 1].to_vec();
        let latent = GammaLaw { alpha: v[4 * m - 1], beta: v[4 * m] };
        TassParams { phi, a, sigma, thresholds, latent }
    }

    /// Names matching [`to_vector`](Self::to_vector).
    pub fn vector_names(m: usize) -> Vec<String> {
        let mut names = Vec::new();
        for i in 1..=m {
            names.extend([format!("phi_{i}"), format!("a_{i}"), format!("sigma_{i}")]);
        }
        for i in 1..m {
            names.push(format!("r_{i}"));
        }
        names.extend(["alpha".to_string(), "beta".to_string()]);
        names
    }

    /// Two-regime model used throughout the simulation studies:
    /// regime 1 `X = -3 - 0.3 (X' + 3) + e` on `[0, 0.6)`, regime 2
    /// `X = 2 + 0.6 (X' - 2) + 2 e` on `[0.6, 1)`, increments Gamma(0.5, 50).
    pub fn two_regime_benchmark() -> TassParams {
        TassParams {
            phi: vec![-0.3, 0.6],
            a: vec![-3.0, 2.0],
            sigma: vec![1.0, 2.0],
            thresholds: vec![0.6],
            latent: GammaLaw { alpha: 0.5, beta: 50.0 },
        }
    }
}

/// Observed series `x_1..x_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservedSeries {
    values: Vec<f64>,
}

impl ObservedSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 {
            return Err(TassError::Domain(format!(
                "series needs at least 3 observations, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(TassError::Domain(format!("observation {} is not finite", i + 1)));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// First `len` observations.
    pub fn prefix(&self, len: usize) -> Result<ObservedSeries> {
        ObservedSeries::new(self.values[..len.min(self.values.len())].to_vec())
    }
}

/// Latent path `y_1..y_n` in `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentPath {
    values: Vec<f64>,
}

impl LatentPath {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(0.0..1.0).contains(*v)) {
            return Err(TassError::Domain(format!("latent value {v} outside [0, 1)")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One latent step: returns the wrapped state and the number of whole
/// cycles removed.
#[inline]
pub fn latent_step(y_prev: f64, increment: f64) -> (f64, u64) {
    let s = y_prev + increment;
    if s < 1.0 {
        (s, 0)
    } else {
        let k = s.floor();
        let y = s - k;
        // guard against s - floor(s) rounding up to 1
        let y = if y >= 1.0 { 0.0 } else { y };
        (y, k as u64)
    }
}

/// Number of barriers `e_j + K` (`j = 1..m`, `K >= 0`, `e_m = 1`) in the
/// half-open interval `(y_prev, y_prev + increment]`.
pub(crate) fn barriers_crossed(edges: &[f64], y_prev: f64, increment: f64) -> u64 {
    let s = y_prev + increment;
    edges[1..]
        .iter()
        .map(|&e| {
            if s < e {
                return 0;
            }
            let lo = if e > y_prev { 0 } else { 1 };
            let hi = (s - e).floor() as u64;
            (hi + 1).saturating_sub(lo)
        })
        .sum()
}

/// Simulates `n` latent states. Without `y0` the path starts from the
/// stationary Uniform(0, 1) law; with `y0` the first state is one step
/// after `y0`.
pub fn simulate_latent<R: Rng + ?Sized>(
    n: usize,
    law: &GammaLaw,
    y0: Option<f64>,
    rng: &mut R,
) -> Result<LatentPath> {
    if n == 0 {
        return Err(TassError::Domain("latent path length must be positive".into()));
    }
    let sampler = GammaSampler::new(law);
    let mut values = Vec::with_capacity(n);
    let mut y = match y0 {
        Some(v) => {
            if !(0.0..1.0).contains(&v) {
                return Err(TassError::Domain(format!("y0 = {v} outside [0, 1)")));
            }
            latent_step(v, sampler.sample(rng)).0
        }
        None => uniform(rng),
    };
    values.push(y);
    for _ in 1..n {
        y = latent_step(y, sampler.sample(rng)).0;
        values.push(y);
    }
    LatentPath::new(values)
}

/// Output of [`simulate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOutput {
    pub series: ObservedSeries,
    pub latent: LatentPath,
    /// 1-based times at which at least one threshold (or the wrap point) was hit.
    pub change_points: Vec<usize>,
    /// 0-based regime of each observation.
    pub regimes: Vec<usize>,
    /// Latent increments `eps_2..eps_n`.
    pub increments: Vec<f64>,
}

/// Draws `n` observations from the model. The first observation comes
/// from the stationary AR(1) law of the initial regime.
pub fn simulate<R: Rng + ?Sized>(params: &TassParams, n: usize, rng: &mut R) -> Result<SimulationOutput> {
    params.validate()?;
    if n < 3 {
        return Err(TassError::Domain("simulate needs n >= 3".into()));
    }
    let sampler = GammaSampler::new(&params.latent);
    let edges = params.edges();
    let mut ys = Vec::with_capacity(n);
    let mut xs = Vec::with_capacity(n);
    let mut regimes = Vec::with_capacity(n);
    let mut increments = Vec::with_capacity(n - 1);
    let mut change_points = Vec::new();

    let mut y = uniform(rng);
    let mut j = params.regime_of_unchecked(y);
    let mut x = params.a[j] + params.stationary_variance(j).sqrt() * standard_normal(rng);
    ys.push(y);
    xs.push(x);
    regimes.push(j);
    for t in 2..=n {
        let eps = sampler.sample(rng);
        if barriers_crossed(&edges, y, eps) > 0 {
            change_points.push(t);
        }
        y = latent_step(y, eps).0;
        j = params.regime_of_unchecked(y);
        x = params.a[j] + params.phi[j] * (x - params.a[j]) + params.sigma[j] * standard_normal(rng);
        ys.push(y);
        xs.push(x);
        regimes.push(j);
        increments.push(eps);
    }
    Ok(SimulationOutput {
        series: ObservedSeries::new(xs)?,
        latent: LatentPath::new(ys)?,
        change_points,
        regimes,
        increments,
    })
}

/// Log of the latent transition density with whole-cycle sums truncated at
/// `j_max`; the sum stops early once terms fall below `1e-16` of the total.
#[derive(Debug, Clone, Copy)]
pub struct LatentKernel {
    law: GammaLaw,
    ln_norm: f64,
    mode: f64,
    j_max: usize,
}

impl LatentKernel {
    pub fn new(law: &GammaLaw, j_max: usize) -> Self {
        Self {
            law: *law,
            ln_norm: law.alpha * law.beta.ln() - ln_gamma(law.alpha),
            mode: law.mode(),
            j_max,
        }
    }

    #[inline]
    fn ln_g(&self, d: f64) -> f64 {
        self.ln_norm + (self.law.alpha - 1.0) * d.ln() - self.law.beta * d
    }

    /// `ln p(y | y_prev)`.
    pub fn ln_density(&self, y_prev: f64, y: f64) -> f64 {
        self.ln_density_offset(y - y_prev)
    }

    /// Log-density as a function of `d = y - y_prev` in `(-1, 1)`.
    pub fn ln_density_offset(&self, d: f64) -> f64 {
        // log-sum-exp accumulation
        let mut top = f64::NEG_INFINITY;
        let mut acc = 0.0;
        let add = |lv: f64, top: &mut f64, acc: &mut f64| {
            if lv > *top {
                *acc = *acc * (*top - lv).exp() + 1.0;
                *top = lv;
            } else {
                *acc += (lv - *top).exp();
            }
        };
        if d > 0.0 {
            add(self.ln_g(d), &mut top, &mut acc);
        }
        for j in 1..=self.j_max {
            let arg = d + j as f64;
            let lv = self.ln_g(arg);
            add(lv, &mut top, &mut acc);
            if arg > self.mode && lv < top - 37.0 {
                break;
            }
        }
        if top == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        top + acc.ln()
    }

    pub fn density(&self, y_prev: f64, y: f64) -> f64 {
        self.ln_density(y_prev, y).exp()
    }

    pub fn density_offset(&self, d: f64) -> f64 {
        self.ln_density_offset(d).exp()
    }
}

/// `p(y | y_prev) = g(y - y_prev) 1{y > y_prev} + sum_{j=1}^{j_max} g(y - y_prev + j)`.
pub fn transition_density(y_prev: f64, y: f64, law: &GammaLaw, j_max: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&y_prev) || !(0.0..1.0).contains(&y) {
        return Err(TassError::Domain(format!(
            "transition density needs both states in [0, 1), got ({y_prev}, {y})"
        )));
    }
    Ok(LatentKernel::new(law, j_max).density(y_prev, y))
}
