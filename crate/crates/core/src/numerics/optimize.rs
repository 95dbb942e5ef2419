//! Derivative-free maximization: Nelder-Mead simplex search with jittered
//! restarts, run on an unconstrained reparameterization of the problem.

use serde::{Deserialize, Serialize};

use super::random::{standard_normal, stream_rng};

/// Settings for [`maximize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Simplex iterations allowed per run.
    pub max_iterations: usize,
    /// Relative spread of objective values across the simplex at convergence.
    pub tolerance: f64,
    /// Total number of simplex runs (the first starts at the given point).
    pub restarts: usize,
    pub seed: u64,
    /// Edge length of the initial simplex in unconstrained coordinates.
    pub initial_step: f64,
    /// Standard deviation of the perturbation applied to restart points.
    pub restart_jitter: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iterations: 4000,
            tolerance: 1e-9,
            restarts: 5,
            seed: 0,
            initial_step: 0.5,
            restart_jitter: 0.3,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.tolerance > 0.0) || self.restarts == 0 || self.max_iterations == 0 {
            return Err(crate::TassError::InvalidParams(
                "optimizer needs tolerance > 0, restarts >= 1 and max_iterations >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Map between an unconstrained search space and the natural parameters.
pub trait Reparameterization {
    fn to_natural(&self, unconstrained: &[f64]) -> Vec<f64>;
    fn to_unconstrained(&self, natural: &[f64]) -> Vec<f64>;
}

/// No constraints.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Reparameterization for Identity {
    fn to_natural(&self, u: &[f64]) -> Vec<f64> {
        u.to_vec()
    }
    fn to_unconstrained(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    /// Maximizer in natural coordinates.
    pub argmax: Vec<f64>,
    /// Maximizer in unconstrained coordinates.
    pub unconstrained: Vec<f64>,
    pub value: f64,
    pub converged: bool,
    pub evaluations: usize,
    pub restarts_used: usize,
    /// Best negated objective after every iteration, across all runs.
    pub trace: Vec<f64>,
}

struct RunOutcome {
    best: Vec<f64>,
    best_cost: f64,
    converged: bool,
}

/// A restart that improves the best value by no more than this relative
/// amount ends the search.
const STALL: f64 = 1e-8;

/// Maximizes `objective` (defined on natural coordinates) starting from
/// `start`. Non-finite objective values count as rejections. The result is
/// the best point over all restarts; restart `r > 0` begins from the best
/// point so far perturbed by seeded Gaussian jitter.
pub fn maximize<O, T>(objective: O, start: &[f64], transform: &T, cfg: &OptimizerConfig) -> OptimResult
where
    O: Fn(&[f64]) -> f64,
    T: Reparameterization + ?Sized,
{
    let mut evaluations = 0usize;
    let mut trace = Vec::new();
    let mut cost = |u: &[f64]| -> f64 {
        evaluations += 1;
        let v = objective(&transform.to_natural(u));
        if v.is_finite() {
            -v
        } else {
            f64::INFINITY
        }
    };

    let u0 = transform.to_unconstrained(start);
    let mut best_u = u0.clone();
    let mut best_cost = f64::INFINITY;
    let mut best_converged = false;
    let runs = cfg.restarts.max(1);
    let mut runs_done = 0;
    for run in 0..runs {
        let origin = if run == 0 {
            u0.clone()
        } else {
            let mut rng = stream_rng(cfg.seed, &[0x0A11_0C47, run as u64]);
            best_u
                .iter()
                .map(|v| v + cfg.restart_jitter * standard_normal(&mut rng))
                .collect()
        };
        let outcome = nelder_mead(&mut cost, &origin, cfg, best_cost, &mut trace);
        let stalled = run > 0 && best_cost - outcome.best_cost <= STALL * (1.0 + best_cost.abs());
        if outcome.best_cost <= best_cost {
            best_u = outcome.best;
            best_cost = outcome.best_cost;
            best_converged = outcome.converged;
        }
        runs_done = run + 1;
        if stalled {
            break;
        }
    }
    let argmax = transform.to_natural(&best_u);
    OptimResult {
        argmax,
        unconstrained: best_u,
        value: -best_cost,
        converged: best_converged && best_cost.is_finite(),
        evaluations,
        restarts_used: runs_done,
        trace,
    }
}

fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    cost: &mut F,
    origin: &[f64],
    cfg: &OptimizerConfig,
    incumbent: f64,
    trace: &mut Vec<f64>,
) -> RunOutcome {
    let dim = origin.len();
    if dim == 0 {
        let c = cost(origin);
        return RunOutcome { best: vec![], best_cost: c, converged: true };
    }
    let d = dim as f64;
    // Dimension-adapted coefficients (Gao & Han).
    let (reflect, expand, contract, shrink) = if dim > 2 {
        (1.0, 1.0 + 2.0 / d, 0.75 - 1.0 / (2.0 * d), 1.0 - 1.0 / d)
    } else {
        (1.0, 2.0, 0.5, 0.5)
    };

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(origin.to_vec());
    for i in 0..dim {
        let mut p = origin.to_vec();
        p[i] += cfg.initial_step;
        simplex.push(p);
    }
    let mut costs: Vec<f64> = simplex.iter().map(|p| cost(p)).collect();
    let mut order: Vec<usize> = (0..=dim).collect();
    let mut converged = false;
    let mut centroid = vec![0.0; dim];
    let mut trial = vec![0.0; dim];
    let mut trial2 = vec![0.0; dim];

    for _ in 0..cfg.max_iterations {
        order.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]));
        let best = order[0];
        let worst = order[dim];
        let second = order[dim - 1];
        trace.push(costs[best].min(incumbent).min(*trace.last().unwrap_or(&f64::INFINITY)));

        let spread = costs[worst] - costs[best];
        let scale = costs[best].abs().max(1.0);
        let diameter = simplex
            .iter()
            .map(|p| {
                p.iter()
                    .zip(&simplex[best])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if spread.is_finite() && spread <= cfg.tolerance * scale && diameter <= cfg.tolerance.sqrt() {
            converged = true;
            break;
        }

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &idx in &order[..dim] {
            for (c, v) in centroid.iter_mut().zip(&simplex[idx]) {
                *c += v / d;
            }
        }
        for k in 0..dim {
            trial[k] = centroid[k] + reflect * (centroid[k] - simplex[worst][k]);
        }
        let fr = cost(&trial);
        if fr < costs[best] {
            for k in 0..dim {
                trial2[k] = centroid[k] + expand * (trial[k] - centroid[k]);
            }
            let fe = cost(&trial2);
            if fe < fr {
                simplex[worst].copy_from_slice(&trial2);
                costs[worst] = fe;
            } else {
                simplex[worst].copy_from_slice(&trial);
                costs[worst] = fr;
            }
            continue;
        }
        if fr < costs[second] {
            simplex[worst].copy_from_slice(&trial);
            costs[worst] = fr;
            continue;
        }
        // contraction, outside when the reflection improved on the worst point
        let outside = fr < costs[worst];
        for k in 0..dim {
            trial2[k] = if outside {
                centroid[k] + contract * (trial[k] - centroid[k])
            } else {
                centroid[k] - contract * (centroid[k] - simplex[worst][k])
            };
        }
        let fc = cost(&trial2);
        let accept = if outside { fc <= fr } else { fc < costs[worst] };
        if accept {
            simplex[worst].copy_from_slice(&trial2);
            costs[worst] = fc;
            continue;
        }
        let anchor = simplex[best].clone();
        for &idx in &order[1..] {
            for k in 0..dim {
                simplex[idx][k] = anchor[k] + shrink * (simplex[idx][k] - anchor[k]);
            }
            costs[idx] = cost(&simplex[idx]);
        }
    }
    let best = (0..=dim).min_by(|&a, &b| costs[a].total_cmp(&costs[b])).unwrap();
    RunOutcome {
        best: simplex[best].clone(),
        best_cost: costs[best],
        converged,
    }
}
