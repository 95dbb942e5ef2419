//! Consecutive-triple composite likelihood.
//!
//! The joint density of `(x_t, x_{t+1}, x_{t+2})` is a mixture over the
//! regimes `(i, j, k)` of the three latent states. Each mixture weight
//! `w(i, j, k)` is the stationary probability of that regime triple and
//! is the same for every `t`, so it is computed once per parameter value:
//!
//! `w(i, j, k) = int_{R_j} A_i(y) B_k(y) dy`, where `A_i(y)` is the mass
//! of predecessors in `R_i` of a latent state at `y` and `B_k(y)` is the
//! probability that the next state lands in `R_k`. Both are sums over
//! whole cycles of Gamma distribution-function differences.

use std::hash::{DefaultHasher, Hash, Hasher};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TassError};
use crate::model::{ObservedSeries, TassParams, DEFAULT_JMAX};
use crate::numerics::chebyshev::Chebyshev;
use crate::numerics::quadrature::{QuadratureRule, DEFAULT_ORDER};
use crate::numerics::special::{normal_ln_pdf, GammaLaw, PreparedCdf};
use crate::numerics::{pairwise_sum, pairwise_sum_par};

/// Whole-cycle sums stop once a cycle contributes less than this.
const CYCLE_TOL: f64 = 1e-14;

/// How the third observation enters the Gaussian factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FactorForm {
    /// `p(x_{t+2} | x_{t+1}, k)`: the Markov factorization of the triple.
    #[default]
    Chained,
    /// `p(x_{t+2} | x_t, j, k)`: two-step law with mean
    /// `a_k + phi_k (a_j - a_k) + phi_k phi_j (x_t - a_j)` and variance
    /// `phi_k^2 sigma_j^2 + sigma_k^2`.
    TwoStepMarginal,
}

/// Numerical settings for the likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodSettings {
    pub j_max: usize,
    pub quadrature_order: usize,
    pub form: FactorForm,
}

impl Default for LikelihoodSettings {
    fn default() -> Self {
        Self {
            j_max: DEFAULT_JMAX,
            quadrature_order: DEFAULT_ORDER,
            form: FactorForm::Chained,
        }
    }
}

/// `N(a_i, sigma_i^2 / (1 - phi_i^2))` density at `x`.
pub fn stationary_x_density(x: f64, regime: usize, params: &TassParams) -> f64 {
    normal_ln_pdf(x, params.a[regime], params.stationary_variance(regime)).exp()
}

/// `N(a_j + phi_j (x - a_j), sigma_j^2)` density at `x_next`.
pub fn one_step_x_density(x_next: f64, x: f64, regime_next: usize, params: &TassParams) -> f64 {
    ln_one_step(x_next, x, regime_next, params).exp()
}

#[inline]
pub(crate) fn ln_one_step(x_next: f64, x: f64, j: usize, params: &TassParams) -> f64 {
    let mean = params.a[j] + params.phi[j] * (x - params.a[j]);
    normal_ln_pdf(x_next, mean, params.sigma[j] * params.sigma[j])
}

#[inline]
pub(crate) fn ln_stationary(x: f64, i: usize, params: &TassParams) -> f64 {
    normal_ln_pdf(x, params.a[i], params.stationary_variance(i))
}

#[inline]
fn ln_two_step(x2: f64, x0: f64, j: usize, k: usize, p: &TassParams) -> f64 {
    let mean = p.phi[k] * p.phi[j] * (x0 - p.a[j]) + p.phi[k] * (p.a[j] - p.a[k]) + p.a[k];
    let var = p.phi[k] * p.phi[k] * p.sigma[j] * p.sigma[j] + p.sigma[k] * p.sigma[k];
    normal_ln_pdf(x2, mean, var)
}

/// Product of the three Gaussian densities for regimes `(i, j, k)`.
pub fn gaussian_factor(
    x: [f64; 3],
    regimes: [usize; 3],
    params: &TassParams,
    form: FactorForm,
) -> f64 {
    let [i, j, k] = regimes;
    let third = match form {
        FactorForm::Chained => ln_one_step(x[2], x[1], k, params),
        FactorForm::TwoStepMarginal => ln_two_step(x[2], x[0], j, k, params),
    };
    (ln_stationary(x[0], i, params) + ln_one_step(x[1], x[0], j, params) + third).exp()
}

/// Stationary regime-triple probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeWeights {
    m: usize,
    w: Vec<f64>,
}

impl RegimeWeights {
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.w[(i * self.m + j) * self.m + k]
    }

    /// Flat `m^3` array in `(i, j, k)` row-major order.
    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn total(&self) -> f64 {
        self.w.iter().sum()
    }

    /// Pairwise marginal `P(regime_t = i, regime_{t+1} = j)`.
    pub fn pair(&self, i: usize, j: usize) -> f64 {
        (0..self.m).map(|k| self.get(i, j, k)).sum()
    }
}

/// Whole cycles summed exactly at every node; later ones come from
/// [`CycleTail`].
const EXACT_CYCLES: usize = 2;

/// Later-cycle masses. With `R(x) = sum_{T >= 2} Q(x + T)`, `Q` the
/// increment survival function, the share of a window `[a, b]` from cycles
/// `T >= 2` is `R(a) - R(b)`. `R` is smooth on `[-1, 1]`, so one
/// interpolant per law replaces the long per-node sums of heavy-tailed
/// laws.
enum CycleTail {
    Negligible,
    Smooth(Chebyshev),
    /// The interpolant did not settle; sum every cycle at every node.
    Exact,
}

impl CycleTail {
    fn new(law: &PreparedCdf, j_max: usize) -> Self {
        if j_max < EXACT_CYCLES {
            return CycleTail::Exact;
        }
        let r = |x: f64| {
            let mut s = 0.0;
            for t in EXACT_CYCLES..=j_max {
                let q = law.sf(x + t as f64);
                s += q;
                if q < 1e-18 {
                    break;
                }
            }
            s
        };
        // R is decreasing, so R(-1) is its scale
        let scale = r(-1.0);
        if scale < CYCLE_TOL {
            return CycleTail::Negligible;
        }
        // the survival function itself is good to a few ulps, no better
        match Chebyshev::adaptive(r, -1.0, 1.0, 1e-14 * scale, 257) {
            Some(c) => CycleTail::Smooth(c),
            None => CycleTail::Exact,
        }
    }
}

/// Masses `out[l] = sum_T [G(hi_l + T) - G(lo_l + T)]` for the `m`
/// intervals defined by `arg(l)` (`l = 0..=m`, monotone in `l`), where
/// interval `l` runs from `arg(l)` to `arg(l + 1)` when `increasing` and
/// the other way round otherwise.
fn cycle_masses(
    law: &PreparedCdf,
    args: &[f64],
    increasing: bool,
    j_max: usize,
    tail: &CycleTail,
    pq: &mut [(f64, f64)],
    out: &mut [f64],
) {
    let m = out.len();
    out.iter_mut().for_each(|v| *v = 0.0);
    let last = match tail {
        CycleTail::Exact => j_max,
        _ => j_max.min(EXACT_CYCLES - 1),
    };
    for t in 0..=last {
        let shift = t as f64;
        for (slot, &a) in pq.iter_mut().zip(args) {
            *slot = law.cdf_pair(a + shift);
        }
        let mut cycle = 0.0;
        for l in 0..m {
            let (hi, lo) = if increasing { (pq[l + 1], pq[l]) } else { (pq[l], pq[l + 1]) };
            let d = if lo.0 > 0.5 { lo.1 - hi.1 } else { hi.0 - lo.0 };
            let d = d.max(0.0);
            out[l] += d;
            cycle += d;
        }
        if t >= 1 && cycle < CYCLE_TOL {
            return;
        }
    }
    if let CycleTail::Smooth(r) = tail {
        for l in 0..m {
            let (a, b) = if increasing { (args[l], args[l + 1]) } else { (args[l + 1], args[l]) };
            out[l] += (r.eval(a) - r.eval(b)).max(0.0);
        }
    }
}

/// Whether whole-cycle sums cut at `j_max` hold all but a negligible
/// share of the increment law. Laws that fail this spread over more
/// cycles than the sums visit, and their weights are both slow and lossy.
pub fn cycles_resolved(law: &GammaLaw, j_max: usize) -> bool {
    law.sf(j_max as f64) <= 1e-12
}

/// Regime-triple weights `w(i, j, k)` for any `m`.
pub fn regime_weights(params: &TassParams, j_max: usize, rule: &QuadratureRule) -> RegimeWeights {
    weights_with_tail(params, j_max, rule, CycleTail::new(&params.latent.prepared(), j_max))
}

fn weights_with_tail(params: &TassParams, j_max: usize, rule: &QuadratureRule, tail: CycleTail) -> RegimeWeights {
    let m = params.m();
    if m == 1 {
        return RegimeWeights { m, w: vec![1.0] };
    }
    let law = params.latent.prepared();
    let edges = params.edges();
    let mut w = vec![0.0; m * m * m];
    let mut back = vec![0.0; m];
    let mut fwd = vec![0.0; m];
    let mut pq = vec![(0.0, 1.0); m + 1];
    let mut args = vec![0.0; m + 1];

    // Integrate A_i B_k over R_j on the endpoint-graded rule, doubling the
    // panel count until the whole block of m^2 integrals settles.
    let mut block = |j: usize, lo: f64, hi: f64, panels: usize, acc: &mut [f64]| {
        acc.iter_mut().for_each(|v| *v = 0.0);
        for node in rule.endpoint_graded_nodes(lo, hi, panels) {
            let wq = node.weight;
            // offsets to the two edges of R_j come straight from the rule
            let offset = |l: usize| {
                if l == j {
                    node.from_lo
                } else if l == j + 1 {
                    -node.to_hi
                } else {
                    node.x - edges[l]
                }
            };
            // predecessor masses: arguments y - e_l, decreasing in l
            for (l, a) in args.iter_mut().enumerate() {
                *a = offset(l);
            }
            cycle_masses(&law, &args, false, j_max, &tail, &mut pq, &mut back);
            // successor masses: arguments e_l - y, increasing in l
            for (l, a) in args.iter_mut().enumerate() {
                *a = -offset(l);
            }
            cycle_masses(&law, &args, true, j_max, &tail, &mut pq, &mut fwd);
            for i in 0..m {
                let bi = wq * back[i];
                for k in 0..m {
                    acc[i * m + k] += bi * fwd[k];
                }
            }
        }
    };

    let mut coarse = vec![0.0; m * m];
    let mut fine = vec![0.0; m * m];
    for j in 0..m {
        let (lo, hi) = (edges[j], edges[j + 1]);
        let mut panels = 1;
        block(j, lo, hi, panels, &mut coarse);
        loop {
            panels *= 2;
            block(j, lo, hi, panels, &mut fine);
            let gap = coarse.iter().zip(&fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            std::mem::swap(&mut coarse, &mut fine);
            if gap <= 1e-11 || panels >= 32 {
                break;
            }
        }
        for i in 0..m {
            for k in 0..m {
                w[(i * m + j) * m + k] = coarse[i * m + k].max(0.0);
            }
        }
    }
    RegimeWeights { m, w }
}

/// Regime weights tagged with the parameters they were computed for.
#[derive(Debug, Clone)]
pub struct TripleDensityCache {
    weights: RegimeWeights,
    fingerprint: u64,
    settings: LikelihoodSettings,
}

/// Hash of the latent part of the parameters plus numerical settings.
pub fn latent_fingerprint(params: &TassParams, settings: &LikelihoodSettings) -> u64 {
    let mut h = DefaultHasher::new();
    params.m().hash(&mut h);
    for r in &params.thresholds {
        r.to_bits().hash(&mut h);
    }
    if params.m() > 1 {
        params.latent.alpha.to_bits().hash(&mut h);
        params.latent.beta.to_bits().hash(&mut h);
    }
    settings.j_max.hash(&mut h);
    settings.quadrature_order.hash(&mut h);
    h.finish()
}

impl TripleDensityCache {
    pub fn new(params: &TassParams, settings: LikelihoodSettings) -> Self {
        let rule = QuadratureRule::gauss_legendre(settings.quadrature_order);
        Self::with_rule(params, settings, &rule)
    }

    pub fn with_rule(params: &TassParams, settings: LikelihoodSettings, rule: &QuadratureRule) -> Self {
        Self {
            weights: regime_weights(params, settings.j_max, rule),
            fingerprint: latent_fingerprint(params, &settings),
            settings,
        }
    }

    pub fn weights(&self) -> &RegimeWeights {
        &self.weights
    }

    pub fn settings(&self) -> &LikelihoodSettings {
        &self.settings
    }

    pub fn matches(&self, params: &TassParams) -> bool {
        self.weights.m == params.m() && self.fingerprint == latent_fingerprint(params, &self.settings)
    }

    fn check(&self, params: &TassParams) -> Result<()> {
        if self.matches(params) {
            Ok(())
        } else {
            Err(TassError::StaleCache)
        }
    }
}

/// Joint density of three consecutive observations.
pub fn triple_density(x: [f64; 3], params: &TassParams, cache: &TripleDensityCache) -> Result<f64> {
    cache.check(params)?;
    Ok(ln_triple(x, params, cache.weights(), cache.settings.form).exp())
}

/// Log of [`triple_density`]; stays finite where the density underflows.
pub fn ln_triple_density(x: [f64; 3], params: &TassParams, cache: &TripleDensityCache) -> Result<f64> {
    cache.check(params)?;
    Ok(ln_triple(x, params, cache.weights(), cache.settings.form))
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn ln_triple(x: [f64; 3], p: &TassParams, w: &RegimeWeights, form: FactorForm) -> f64 {
    let m = p.m();
    if m == 1 {
        let third = match form {
            FactorForm::Chained => ln_one_step(x[2], x[1], 0, p),
            FactorForm::TwoStepMarginal => ln_two_step(x[2], x[0], 0, 0, p),
        };
        return ln_stationary(x[0], 0, p) + ln_one_step(x[1], x[0], 0, p) + third;
    }
    let lu: Vec<f64> = (0..m).map(|i| ln_stationary(x[0], i, p)).collect();
    let lv: Vec<f64> = (0..m).map(|j| ln_one_step(x[1], x[0], j, p)).collect();
    let mu = max_of(&lu);
    let mv = max_of(&lv);
    match form {
        FactorForm::Chained => {
            let mut lz = vec![0.0; m];
            for k in 0..m {
                lz[k] = ln_one_step(x[2], x[1], k, p);
            }
            let mz = max_of(&lz);
            let eu: Vec<f64> = lu.iter().map(|v| (v - mu).exp()).collect();
            let ev: Vec<f64> = lv.iter().map(|v| (v - mv).exp()).collect();
            let ez: Vec<f64> = lz.iter().map(|v| (v - mz).exp()).collect();
            let ws = w.as_slice();
            let mut s = 0.0;
            for i in 0..m {
                for j in 0..m {
                    let base = (i * m + j) * m;
                    let mut inner = 0.0;
                    for k in 0..m {
                        inner += ws[base + k] * ez[k];
                    }
                    s += eu[i] * ev[j] * inner;
                }
            }
            mu + mv + mz + s.ln()
        }
        FactorForm::TwoStepMarginal => {
            let mut lz = vec![0.0; m * m];
            for j in 0..m {
                for k in 0..m {
                    lz[j * m + k] = ln_two_step(x[2], x[0], j, k, p);
                }
            }
            let mz = max_of(&lz);
            let mut s = 0.0;
            for i in 0..m {
                let eu = (lu[i] - mu).exp();
                for j in 0..m {
                    let ev = (lv[j] - mv).exp();
                    for k in 0..m {
                        s += eu * ev * (lz[j * m + k] - mz).exp() * w.get(i, j, k);
                    }
                }
            }
            mu + mv + mz + s.ln()
        }
    }
}

/// Per-regime Gaussian log-density constants: `ln_norm - half_prec d^2`.
#[derive(Clone, Copy)]
struct Gauss {
    ln_norm: f64,
    half_prec: f64,
}

impl Gauss {
    fn new(variance: f64) -> Self {
        Self {
            ln_norm: -0.5 * (2.0 * std::f64::consts::PI * variance).ln(),
            half_prec: 0.5 / variance,
        }
    }

    #[inline]
    fn ln(&self, d: f64) -> f64 {
        self.ln_norm - self.half_prec * d * d
    }
}

/// Max-shifted per-time factors of the chained form: the stationary
/// density of `x_t` and the one-step density of `x_{t+1}` given `x_t`,
/// for every regime.
struct ChainedFactors {
    m: usize,
    stat_max: Vec<f64>,
    stat: Vec<f64>,
    step_max: Vec<f64>,
    step: Vec<f64>,
}

fn shifted(ln: &mut [f64]) -> f64 {
    let top = max_of(ln);
    for v in ln.iter_mut() {
        *v = (*v - top).exp();
    }
    top
}

impl ChainedFactors {
    fn new(x: &[f64], p: &TassParams, parallel: bool) -> Self {
        let m = p.m();
        let stat_g: Vec<Gauss> = (0..m).map(|i| Gauss::new(p.stationary_variance(i))).collect();
        let step_g: Vec<Gauss> = (0..m).map(|j| Gauss::new(p.sigma[j] * p.sigma[j])).collect();
        let at = |t: usize| -> (f64, [f64; MAX_INLINE], f64, [f64; MAX_INLINE]) {
            let mut ls = [0.0; MAX_INLINE];
            let mut lo = [0.0; MAX_INLINE];
            for i in 0..m {
                ls[i] = stat_g[i].ln(x[t] - p.a[i]);
            }
            let ms = shifted(&mut ls[..m]);
            let mo = if t + 1 < x.len() {
                for j in 0..m {
                    lo[j] = step_g[j].ln(x[t + 1] - p.a[j] - p.phi[j] * (x[t] - p.a[j]));
                }
                shifted(&mut lo[..m])
            } else {
                0.0
            };
            (ms, ls, mo, lo)
        };
        let rows: Vec<_> = if parallel {
            (0..x.len()).into_par_iter().map(at).collect()
        } else {
            (0..x.len()).map(at).collect()
        };
        let mut f = ChainedFactors {
            m,
            stat_max: Vec::with_capacity(x.len()),
            stat: Vec::with_capacity(x.len() * m),
            step_max: Vec::with_capacity(x.len()),
            step: Vec::with_capacity(x.len() * m),
        };
        for (ms, ls, mo, lo) in rows {
            f.stat_max.push(ms);
            f.stat.extend_from_slice(&ls[..m]);
            f.step_max.push(mo);
            f.step.extend_from_slice(&lo[..m]);
        }
        f
    }

    /// Log density of the triple starting at `t` (0-based), or `None`
    /// when the shifted sum is too small to trust.
    #[inline]
    fn term(&self, t: usize, w: &[f64]) -> Option<f64> {
        let m = self.m;
        let eu = &self.stat[t * m..(t + 1) * m];
        let ev = &self.step[t * m..(t + 1) * m];
        let ez = &self.step[(t + 1) * m..(t + 2) * m];
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                let base = (i * m + j) * m;
                let mut inner = 0.0;
                for k in 0..m {
                    inner += w[base + k] * ez[k];
                }
                s += eu[i] * ev[j] * inner;
            }
        }
        (s.is_finite() && s >= f64::MIN_POSITIVE)
            .then(|| self.stat_max[t] + self.step_max[t] + self.step_max[t + 1] + s.ln())
    }
}

/// Regime counts up to this size use stack buffers in the fast path.
const MAX_INLINE: usize = 16;

fn terms_impl(x: &[f64], params: &TassParams, cache: &TripleDensityCache, parallel: bool) -> Vec<f64> {
    let form = cache.settings.form;
    let weights = cache.weights();
    let slow = |t: usize| ln_triple([x[t], x[t + 1], x[t + 2]], params, weights, form);
    let count = x.len() - 2;
    if form != FactorForm::Chained || params.m() > MAX_INLINE {
        return if parallel {
            (0..count).into_par_iter().map(slow).collect()
        } else {
            (0..count).map(slow).collect()
        };
    }
    let factors = ChainedFactors::new(x, params, parallel);
    let w = weights.as_slice();
    let fast = |t: usize| factors.term(t, w).unwrap_or_else(|| slow(t));
    if parallel {
        (0..count).into_par_iter().map(fast).collect()
    } else {
        (0..count).map(fast).collect()
    }
}

/// Per-triple log densities `log p(x_t, x_{t+1}, x_{t+2})`, `t = 1..n-2`.
pub fn ctl2_terms(series: &ObservedSeries, params: &TassParams, cache: &TripleDensityCache) -> Result<Vec<f64>> {
    cache.check(params)?;
    Ok(terms_impl(series.values(), params, cache, false))
}

fn finite_or_sentinel(v: f64) -> f64 {
    if v.is_finite() { v } else { f64::NEG_INFINITY }
}

/// CTL2 with a prepared cache; `-inf` signals an underflowed triple.
pub fn ctl2_cached(series: &ObservedSeries, params: &TassParams, cache: &TripleDensityCache) -> Result<f64> {
    let terms = ctl2_terms(series, params, cache)?;
    Ok(finite_or_sentinel(pairwise_sum(&terms)))
}

/// Parallel CTL2; bit-identical to [`ctl2_cached`].
pub fn ctl2_par(series: &ObservedSeries, params: &TassParams, cache: &TripleDensityCache) -> Result<f64> {
    cache.check(params)?;
    let terms = terms_impl(series.values(), params, cache, true);
    Ok(finite_or_sentinel(pairwise_sum_par(&terms)))
}

/// `sum_{t=1}^{n-2} log p(x_t, x_{t+1}, x_{t+2})` with default settings.
pub fn ctl2(series: &ObservedSeries, params: &TassParams) -> Result<f64> {
    params.validate()?;
    let cache = TripleDensityCache::new(params, LikelihoodSettings::default());
    ctl2_cached(series, params, &cache)
}
