//! Bootstrap particle filter over latent paths, MAP path selection and
//! retrospective change-point extraction.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TassError};
use crate::likelihood::{ln_one_step, ln_stationary};
use crate::model::{barriers_crossed, latent_step, LatentKernel, LatentPath, ObservedSeries, TassParams, DEFAULT_JMAX};
use crate::numerics::random::{uniform, GammaSampler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Resampling {
    /// Independent draws with probability equal to the weights.
    #[default]
    Multinomial,
    /// One uniform offset and evenly spaced pointers.
    Systematic,
}

/// How the running log-joint score starts at `t = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ScoreInit {
    /// `ln p(y_1) + ln p(x_1 | y_1)`, so the final score is the exact log
    /// joint of the path and the data.
    #[default]
    WithObservation,
    /// `ln p(y_1) = 0` only.
    LatentOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterOptions {
    pub resampling: Resampling,
    pub score_init: ScoreInit,
    pub j_max: usize,
}

impl Default for FilterOptions {
    fn default() -> Self {
        Self {
            resampling: Resampling::Multinomial,
            score_init: ScoreInit::WithObservation,
            j_max: DEFAULT_JMAX,
        }
    }
}

/// Output of the bootstrap filter.
///
/// Paths are stored as a genealogy: the propagated states at each time
/// and, for every state, the index of its parent among the states one
/// step earlier. After resampling at time `t`, particle `k` sits on state
/// `picks[t][k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleEnsemble {
    n: usize,
    particles: usize,
    states: Vec<Vec<f64>>,
    parents: Vec<Vec<u32>>,
    picks: Vec<Vec<u32>>,
    /// Running scores of the resampled particles at the final time.
    scores: Vec<f64>,
    /// Normalized importance weights at the final time (before resampling).
    final_weights: Vec<f64>,
    /// Largest deviation of any step's weight total from 1.
    max_weight_error: f64,
}

impl ParticleEnsemble {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn final_weights(&self) -> &[f64] {
        &self.final_weights
    }

    pub fn max_weight_error(&self) -> f64 {
        self.max_weight_error
    }

    /// States of the resampled particles at time `t` (1-based).
    pub fn filtered(&self, t: usize) -> Vec<f64> {
        let s = &self.states[t - 1];
        self.picks[t - 1].iter().map(|&i| s[i as usize]).collect()
    }

    /// Latent values of the final resampled particles.
    pub fn terminal_states(&self) -> Vec<f64> {
        self.filtered(self.n)
    }

    /// Full path of final particle `k`.
    pub fn path(&self, k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        let mut idx = self.picks[self.n - 1][k] as usize;
        for t in (0..self.n).rev() {
            out[t] = self.states[t][idx];
            if t > 0 {
                idx = self.parents[t][idx] as usize;
            }
        }
        out
    }

    /// Index of the final particle with the largest score (first on ties).
    pub fn best_particle(&self) -> usize {
        let mut best = 0;
        for (k, s) in self.scores.iter().enumerate() {
            if *s > self.scores[best] {
                best = k;
            }
        }
        best
    }

    /// MAP path among the particle paths.
    pub fn map_decoding(&self, params: &TassParams) -> Result<MapDecoding> {
        let k = self.best_particle();
        let path = LatentPath::new(self.path(k))?;
        let change_points = extract_change_points(&path, params)?;
        let regimes = path.values().iter().map(|&y| params.regime_of_unchecked(y)).collect();
        Ok(MapDecoding {
            log_joint: self.scores[k],
            path,
            change_points,
            regimes,
        })
    }
}

/// MAP latent path and what follows from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapDecoding {
    pub path: LatentPath,
    pub log_joint: f64,
    /// 1-based change-point times.
    pub change_points: Vec<usize>,
    /// 0-based regime of each time point.
    pub regimes: Vec<usize>,
}

/// Normalizes log weights in place into probabilities; returns the
/// deviation of their sum from one.
fn normalize(log_w: &[f64], out: &mut [f64], time: usize) -> Result<f64> {
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(TassError::DegenerateWeights { time });
    }
    let mut total = 0.0;
    for (o, l) in out.iter_mut().zip(log_w) {
        *o = (l - top).exp();
        total += *o;
    }
    let mut check = 0.0;
    for o in out.iter_mut() {
        *o /= total;
        check += *o;
    }
    Ok((check - 1.0).abs())
}

fn resample<R: Rng + ?Sized>(weights: &[f64], scheme: Resampling, rng: &mut R, out: &mut [u32]) {
    let n = weights.len();
    let count = out.len();
    // pointers in [0, 1), increasing
    let pointers: Vec<f64> = match scheme {
        Resampling::Multinomial => {
            // sorted uniforms from normalized exponential spacings
            let mut acc = 0.0;
            let mut cum: Vec<f64> = (0..count)
                .map(|_| {
                    acc += -(1.0 - uniform(rng)).ln();
                    acc
                })
                .collect();
            let total = acc - (1.0 - uniform(rng)).ln();
            cum.iter_mut().for_each(|c| *c /= total);
            cum
        }
        Resampling::Systematic => {
            let u = uniform(rng);
            (0..count).map(|k| (k as f64 + u) / count as f64).collect()
        }
    };
    let mut j = 0;
    let mut edge = weights[0];
    for (slot, &p) in out.iter_mut().zip(&pointers) {
        while p >= edge && j + 1 < n {
            j += 1;
            edge += weights[j];
        }
        *slot = j as u32;
    }
}

/// Bootstrap filter with default options.
pub fn bootstrap_filter<R: Rng + ?Sized>(
    series: &ObservedSeries,
    params: &TassParams,
    particles: usize,
    rng: &mut R,
) -> Result<ParticleEnsemble> {
    bootstrap_filter_with(series, params, particles, rng, &FilterOptions::default())
}

/// Particle filter that proposes from the latent transition, weights by
/// the observation density and resamples every step. Each particle also
/// carries `a_t = a_{t-1} + ln p(y_t | y_{t-1}) + ln p(x_t | x_{t-1}, y_t)`.
pub fn bootstrap_filter_with<R: Rng + ?Sized>(
    series: &ObservedSeries,
    params: &TassParams,
    particles: usize,
    rng: &mut R,
    opts: &FilterOptions,
) -> Result<ParticleEnsemble> {
    params.validate()?;
    if particles < 2 {
        return Err(TassError::InvalidParams("particle count must be at least 2".into()));
    }
    let x = series.values();
    let n = x.len();
    let big_n = particles;
    let sampler = GammaSampler::new(&params.latent);
    let kernel = LatentKernel::new(&params.latent, opts.j_max);

    let mut states = Vec::with_capacity(n);
    let mut parents: Vec<Vec<u32>> = Vec::with_capacity(n);
    let mut picks: Vec<Vec<u32>> = Vec::with_capacity(n);
    let mut log_w = vec![0.0; big_n];
    let mut weights = vec![0.0; big_n];
    let mut max_err: f64 = 0.0;

    // t = 1
    let y1: Vec<f64> = (0..big_n).map(|_| uniform(rng)).collect();
    let mut scores: Vec<f64> = Vec::with_capacity(big_n);
    for (i, &y) in y1.iter().enumerate() {
        let lw = ln_stationary(x[0], params.regime_of_unchecked(y), params);
        log_w[i] = lw;
        scores.push(match opts.score_init {
            ScoreInit::WithObservation => lw,
            ScoreInit::LatentOnly => 0.0,
        });
    }
    max_err = max_err.max(normalize(&log_w, &mut weights, 1)?);
    let mut pick = vec![0u32; big_n];
    resample(&weights, opts.resampling, rng, &mut pick);
    let mut carried: Vec<f64> = pick.iter().map(|&i| scores[i as usize]).collect();
    states.push(y1);
    parents.push(Vec::new());
    picks.push(pick.clone());

    for t in 1..n {
        let prev = &states[t - 1];
        let mut next = Vec::with_capacity(big_n);
        let mut new_scores = Vec::with_capacity(big_n);
        for k in 0..big_n {
            let y_prev = prev[pick[k] as usize];
            let (y, _) = latent_step(y_prev, sampler.sample(rng));
            let lw = ln_one_step(x[t], x[t - 1], params.regime_of_unchecked(y), params);
            log_w[k] = lw;
            new_scores.push(carried[k] + kernel.ln_density(y_prev, y) + lw);
            next.push(y);
        }
        max_err = max_err.max(normalize(&log_w, &mut weights, t + 1)?);
        let parent_idx = pick.clone();
        resample(&weights, opts.resampling, rng, &mut pick);
        carried = pick.iter().map(|&i| new_scores[i as usize]).collect();
        states.push(next);
        parents.push(parent_idx);
        picks.push(pick.clone());
    }

    Ok(ParticleEnsemble {
        n,
        particles: big_n,
        states,
        parents,
        picks,
        scores: carried,
        final_weights: weights,
        max_weight_error: max_err,
    })
}

/// Runs the filter and returns the highest-scoring particle path.
pub fn map_decode<R: Rng + ?Sized>(
    series: &ObservedSeries,
    params: &TassParams,
    particles: usize,
    rng: &mut R,
) -> Result<MapDecoding> {
    bootstrap_filter(series, params, particles, rng)?.map_decoding(params)
}

/// 1-based times `t >= 2` at which the path crosses a threshold or wraps
/// past 1. A decrease counts as one wrap.
pub fn extract_change_points(path: &LatentPath, params: &TassParams) -> Result<Vec<usize>> {
    let edges = params.edges();
    let y = path.values();
    let mut out = Vec::new();
    for t in 1..y.len() {
        let mut inc = y[t] - y[t - 1];
        if inc < 0.0 {
            inc += 1.0;
        }
        if barriers_crossed(&edges, y[t - 1], inc) > 0 {
            out.push(t + 1);
        }
    }
    Ok(out)
}
