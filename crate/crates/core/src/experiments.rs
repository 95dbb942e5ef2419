//! Simulation designs and replication harnesses for the estimation,
//! prediction, diagnostic and model-selection studies, with the published
//! reference numbers alongside.

use rand::Rng;
use rand_distr::{Distribution, StudentT};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{diagnose, residuals_from_path, DiagnosticSummary, DEFAULT_LAG};
use crate::error::{Result, TassError};
use crate::estimation::{fit_with, select_model_with, FitOptions};
use crate::inference::bootstrap_filter;
use crate::model::{simulate, ObservedSeries, TassParams};
use crate::numerics::random::{standard_normal, stream_rng, TassRng};
use crate::prediction::{hitting_distribution, predict_change_point, DEFAULT_TAIL_EPS};

// stream labels, one per study
const LABEL_ESTIMATION: u64 = 1;
const LABEL_PREDICTION: u64 = 2;
const LABEL_SIZE: u64 = 3;
const LABEL_POWER: u64 = 4;
const LABEL_SELECTION_TASS: u64 = 5;
const LABEL_SELECTION_AR: u64 = 6;

/// Two-regime design used throughout the simulation studies.
pub fn model21() -> TassParams {
    TassParams::two_regime_benchmark()
}

/// AR(1) null design for the model-selection study.
pub fn ar1_null() -> TassParams {
    TassParams::ar1(0.5, 0.0, 1.0).expect("valid AR(1)")
}

/// Segment boundaries of the misspecified design: `I_1 = [1, 12]` and
/// `|I_i| = 10 + 2i`. Returned as 1-based inclusive `(start, end)` pairs.
pub fn model23_segments(m: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(m);
    let mut end = 0;
    for i in 1..=m {
        let len = if i == 1 { 12 } else { 10 + 2 * i };
        out.push((end + 1, end + len));
        end += len;
    }
    out
}

/// Series from the misspecified design with `m` segments: odd segments
/// follow `3 + 0.3 (x - 3) + e`, even ones `0.3 x + e`, with t(5) noise.
pub fn simulate_model23<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<ObservedSeries> {
    if m == 0 {
        return Err(TassError::Domain("model 23 needs at least one segment".into()));
    }
    let noise = StudentT::new(5.0).expect("t(5)");
    let mut x = 3.0;
    let mut out = Vec::new();
    for (j, (s, e)) in model23_segments(m).into_iter().enumerate() {
        let level = if j % 2 == 0 { 3.0 } else { 0.0 };
        for _ in s..=e {
            x = level + 0.3 * (x - level) + noise.sample(rng);
            out.push(x);
        }
    }
    ObservedSeries::new(out)
}

/// Settings shared by the replication harnesses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub reps: usize,
    pub n: usize,
    pub seed: u64,
    pub particles: usize,
    pub fit: FitOptions,
}

impl StudyConfig {
    pub fn new(reps: usize, n: usize, seed: u64) -> Self {
        Self {
            reps,
            n,
            seed,
            particles: 500,
            fit: FitOptions::default(),
        }
    }

    fn rng(&self, label: u64, rep: usize) -> TassRng {
        stream_rng(self.seed, &[label, rep as u64])
    }

    fn fit_options(&self, label: u64, rep: usize) -> FitOptions {
        let mut fit = self.fit.clone();
        fit.optimizer.seed = crate::numerics::random::derive_seed(self.seed, &[label, rep as u64, 0xF17]);
        fit
    }
}

/// Mean and RMSE of one parameter across replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSummary {
    pub name: String,
    pub truth: f64,
    pub mean: f64,
    pub rmse: f64,
    /// Published mean and RMSE at the same sample size, when available.
    pub reference: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationStudy {
    pub n: usize,
    pub reps: usize,
    pub parameters: Vec<ParameterSummary>,
    pub converged: usize,
    pub estimates: Vec<Vec<f64>>,
}

/// Published means and RMSEs for the two-regime design, keyed by sample
/// size, in the order of [`TassParams::vector_names`].
pub fn table1_reference(n: usize) -> Option<[(f64, f64); 9]> {
    // (phi_1, a_1, sigma_1, phi_2, a_2, sigma_2, r_1, alpha, beta)
    match n {
        1000 => Some([
            (-0.303, 0.035),
            (-3.003, 0.032),
            (1.005, 0.032),
            (0.593, 0.046),
            (1.885, 0.297),
            (1.994, 0.075),
            (0.602, 0.026),
            (0.611, 0.273),
            (58.84, 23.21),
        ]),
        2000 => Some([
            (-0.304, 0.024),
            (-3.004, 0.022),
            (1.005, 0.022),
            (0.599, 0.033),
            (1.880, 0.228),
            (2.002, 0.052),
            (0.602, 0.017),
            (0.563, 0.166),
            (54.02, 14.74),
        ]),
        3000 => Some([
            (-0.304, 0.019),
            (-3.003, 0.019),
            (1.005, 0.019),
            (0.601, 0.026),
            (1.885, 0.196),
            (2.006, 0.043),
            (0.601, 0.014),
            (0.517, 0.124),
            (49.35, 10.08),
        ]),
        _ => None,
    }
}

/// Repeated CTL2 fits of the two-regime design.
pub fn estimation_study(cfg: &StudyConfig) -> Result<EstimationStudy> {
    let truth = model21();
    let fits = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let sim = simulate(&truth, cfg.n, &mut cfg.rng(LABEL_ESTIMATION, rep))?;
            fit_with(&sim.series, 2, &cfg.fit_options(LABEL_ESTIMATION, rep))
        })
        .collect::<Result<Vec<_>>>()?;
    let names = TassParams::vector_names(2);
    let tv = truth.to_vector();
    let reference = table1_reference(cfg.n);
    let estimates: Vec<Vec<f64>> = fits.iter().map(|f| f.params.to_vector()).collect();
    let reps = estimates.len() as f64;
    let parameters = names
        .into_iter()
        .enumerate()
        .map(|(i, name)| {
            let mean = estimates.iter().map(|e| e[i]).sum::<f64>() / reps;
            let rmse = (estimates.iter().map(|e| (e[i] - tv[i]).powi(2)).sum::<f64>() / reps).sqrt();
            ParameterSummary {
                name,
                truth: tv[i],
                mean,
                rmse,
                reference: reference.map(|r| r[i]),
            }
        })
        .collect();
    Ok(EstimationStudy {
        n: cfg.n,
        reps: cfg.reps,
        parameters,
        converged: fits.iter().filter(|f| f.converged).count(),
        estimates,
    })
}

/// Where the prediction and diagnostic studies take their parameters from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ParamSource {
    /// A fresh CTL2 fit on each simulated series.
    #[default]
    Fitted,
    /// The simulation parameters.
    Truth,
}

pub const COVERAGE_LEVELS: [f64; 3] = [0.8, 0.9, 0.95];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionStudy {
    pub n: usize,
    pub reps: usize,
    /// Root mean squared error of the predicted next change-point.
    pub prediction_error: f64,
    /// Fraction of replications whose interval at each of
    /// [`COVERAGE_LEVELS`] contained the change-point.
    pub coverage: [f64; 3],
    /// Published `(PE, [80%, 90%, 95%])`.
    pub reference: Option<(f64, [f64; 3])>,
    /// `(predicted, realized)` per replication.
    pub outcomes: Vec<(f64, usize)>,
}

pub fn table2_reference(n: usize) -> Option<(f64, [f64; 3])> {
    match n {
        1000 => Some((10.97, [0.782, 0.868, 0.934])),
        2000 => Some((10.49, [0.792, 0.896, 0.942])),
        3000 => Some((10.23, [0.796, 0.898, 0.950])),
        _ => None,
    }
}

/// Predicts the first change-point after `n` for each replication and
/// scores it against the simulated continuation.
pub fn prediction_study(cfg: &StudyConfig, source: ParamSource) -> Result<PredictionStudy> {
    let truth = model21();
    // the continuation is long enough that a change-point always follows
    let extra = 5000;
    let rows = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| -> Result<(f64, usize, [bool; 3])> {
            let mut rng = cfg.rng(LABEL_PREDICTION, rep);
            let sim = simulate(&truth, cfg.n + extra, &mut rng)?;
            let next = *sim
                .change_points
                .iter()
                .find(|&&t| t > cfg.n)
                .ok_or_else(|| TassError::Degenerate("no change-point in the continuation".into()))?;
            let observed = sim.series.prefix(cfg.n)?;
            let params = match source {
                ParamSource::Truth => truth.clone(),
                ParamSource::Fitted => fit_with(&observed, 2, &cfg.fit_options(LABEL_PREDICTION, rep))?.params,
            };
            let ens = bootstrap_filter(&observed, &params, cfg.particles, &mut rng)?;
            let dist = hitting_distribution(&ens, &params, 1, DEFAULT_TAIL_EPS)?;
            let f = predict_change_point(&dist, cfg.n, &COVERAGE_LEVELS)?;
            let t = next as f64;
            let covered = [0, 1, 2].map(|i| f.intervals[i].lower <= t && t <= f.intervals[i].upper);
            Ok((f.point, next, covered))
        })
        .collect::<Result<Vec<_>>>()?;
    let reps = rows.len() as f64;
    let pe = (rows.iter().map(|(p, t, _)| (p - *t as f64).powi(2)).sum::<f64>() / reps).sqrt();
    let coverage = [0, 1, 2].map(|i| rows.iter().filter(|r| r.2[i]).count() as f64 / reps);
    Ok(PredictionStudy {
        n: cfg.n,
        reps: cfg.reps,
        prediction_error: pe,
        coverage,
        reference: table2_reference(cfg.n),
        outcomes: rows.iter().map(|r| (r.0, r.1)).collect(),
    })
}

/// Rejection rates of the four residual checks at the 5% level, in the
/// order LB(e), LB(eps), AD(e), AD(eps).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionStudy {
    pub label: String,
    pub n: usize,
    pub reps: usize,
    pub rates: [f64; 4],
    pub reference: Option<[f64; 4]>,
}

pub fn table3_reference(n: usize) -> Option<[f64; 4]> {
    match n {
        1000 => Some([0.064, 0.038, 0.070, 0.042]),
        2000 => Some([0.042, 0.042, 0.060, 0.054]),
        3000 => Some([0.046, 0.048, 0.052, 0.044]),
        _ => None,
    }
}

pub fn table4_reference(m: usize) -> Option<[f64; 4]> {
    match m {
        30 => Some([0.444, 0.056, 0.996, 0.85]),
        40 => Some([0.512, 0.078, 1.0, 0.96]),
        50 => Some([0.614, 0.102, 1.0, 0.986]),
        _ => None,
    }
}

const NOMINAL: f64 = 0.05;

/// Fit (or take the truth), decode the MAP path and run the checks.
fn check_series(
    series: &ObservedSeries,
    truth: Option<&TassParams>,
    cfg: &StudyConfig,
    label: u64,
    rep: usize,
    rng: &mut TassRng,
) -> Result<DiagnosticSummary> {
    let params = match truth {
        Some(p) => p.clone(),
        None => fit_with(series, 2, &cfg.fit_options(label, rep))?.params,
    };
    let ens = bootstrap_filter(series, &params, cfg.particles, rng)?;
    let map = ens.map_decoding(&params)?;
    let res = residuals_from_path(series, &map.path, &params)?;
    diagnose(&res, &params, DEFAULT_LAG)
}

fn rejection_rates(summaries: &[DiagnosticSummary]) -> [f64; 4] {
    let reps = summaries.len() as f64;
    [0, 1, 2, 3].map(|i| summaries.iter().filter(|s| s.reports()[i].rejects(NOMINAL)).count() as f64 / reps)
}

/// Empirical sizes of the residual checks on the two-regime design.
pub fn size_study(cfg: &StudyConfig, source: ParamSource) -> Result<RejectionStudy> {
    let truth = model21();
    let summaries = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = cfg.rng(LABEL_SIZE, rep);
            let sim = simulate(&truth, cfg.n, &mut rng)?;
            let given = (source == ParamSource::Truth).then_some(&truth);
            check_series(&sim.series, given, cfg, LABEL_SIZE, rep, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RejectionStudy {
        label: format!("size, n = {}", cfg.n),
        n: cfg.n,
        reps: cfg.reps,
        rates: rejection_rates(&summaries),
        reference: table3_reference(cfg.n),
    })
}

/// Empirical powers of the residual checks when a two-regime model is
/// fitted to the misspecified design with `segments` segments. The
/// sample size is fixed by the design, so `cfg.n` is ignored.
pub fn power_study(cfg: &StudyConfig, segments: usize) -> Result<RejectionStudy> {
    let summaries = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(cfg.seed, &[LABEL_POWER, segments as u64, rep as u64]);
            let series = simulate_model23(segments, &mut rng)?;
            check_series(&series, None, cfg, LABEL_POWER, rep, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let n = model23_segments(segments).last().map(|s| s.1).unwrap_or(0);
    Ok(RejectionStudy {
        label: format!("power, m = {segments}"),
        n,
        reps: cfg.reps,
        rates: rejection_rates(&summaries),
        reference: table4_reference(segments),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelectionDesign {
    TwoRegime,
    Ar1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionStudy {
    pub design: SelectionDesign,
    pub n: usize,
    pub reps: usize,
    pub m_max: usize,
    /// `counts[m - 1]` replications chose `m`.
    pub counts: Vec<usize>,
}

impl SelectionStudy {
    pub fn correct(&self) -> usize {
        let target = match self.design {
            SelectionDesign::TwoRegime => 2,
            SelectionDesign::Ar1 => 1,
        };
        self.counts[target - 1]
    }
}

/// How often BIC picks each regime count.
pub fn selection_study(cfg: &StudyConfig, design: SelectionDesign, m_max: usize) -> Result<SelectionStudy> {
    let (truth, label) = match design {
        SelectionDesign::TwoRegime => (model21(), LABEL_SELECTION_TASS),
        SelectionDesign::Ar1 => (ar1_null(), LABEL_SELECTION_AR),
    };
    let chosen = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let sim = simulate(&truth, cfg.n, &mut cfg.rng(label, rep))?;
            Ok(select_model_with(&sim.series, m_max, &cfg.fit_options(label, rep))?.chosen_m)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut counts = vec![0; m_max];
    for m in chosen {
        counts[m - 1] += 1;
    }
    Ok(SelectionStudy {
        design,
        n: cfg.n,
        reps: cfg.reps,
        m_max,
        counts,
    })
}

/// Published two-regime estimates on the weekly PJM series, in the order
/// of [`TassParams::vector_names`]: `(training, full data)`.
pub const PJM_ESTIMATES: [(f64, f64); 9] = [
    (0.324, 0.328),
    (9.272, 9.276),
    (0.351, 0.350),
    (0.628, 0.617),
    (11.60, 11.60),
    (0.990, 1.045),
    (0.298, 0.279),
    (0.211, 0.223),
    (5.088, 4.910),
];

/// Published `("true", predicted)` change-points after week 555.
pub const PJM_CHANGE_POINTS: [(f64, f64); 6] = [
    (567.0, 569.0),
    (578.0, 577.0),
    (596.0, 594.0),
    (603.0, 602.0),
    (621.0, 619.0),
    (629.0, 626.0),
];

/// Published change-point RMSE (weeks) and forecast RMSE, MAE and MAPE (%).
pub const PJM_ERRORS: (f64, f64, f64, f64) = (1.96, 1.17, 0.88, 7.78);

/// Outcome of the weekly-consumption workflow: selection on the training
/// part, fits on training and full data, change-points after the split
/// decoded from the full data, their predictions from the training data,
/// and forecasts of the held-out observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PjmReport {
    pub n: usize,
    pub split: usize,
    pub bic: Vec<f64>,
    pub chosen_m: usize,
    pub training: TassParams,
    pub full: TassParams,
    /// Change-points after the split decoded from the full data.
    pub realized: Vec<usize>,
    pub predicted: Vec<crate::prediction::ChangePointForecast>,
    pub change_point_rmse: f64,
    pub forecast: Vec<f64>,
    pub forecast_rmse: f64,
    pub forecast_mae: f64,
    pub forecast_mape: f64,
}

pub fn pjm_workflow(
    series: &ObservedSeries,
    split: usize,
    m_max: usize,
    particles: usize,
    seed: u64,
    fit: &FitOptions,
) -> Result<PjmReport> {
    let n = series.len();
    if split < 3 || split >= n {
        return Err(TassError::Domain(format!("split {split} must lie in 3..{n}")));
    }
    let train = series.prefix(split)?;
    let mut opts = fit.clone();
    opts.optimizer.seed = seed;
    let selection = select_model_with(&train, m_max, &opts)?;
    // the comparison with the published estimates is for two regimes
    let training = selection.fits.get(1).map(|f| f.params.clone()).unwrap_or(selection.chosen().params.clone());
    let full = fit_with(series, training.m(), &opts)?.params;

    let mut rng = stream_rng(seed, &[0x9A1, 1]);
    let full_map = bootstrap_filter(series, &full, particles, &mut rng)?.map_decoding(&full)?;
    let realized: Vec<usize> = full_map.change_points.iter().copied().filter(|&t| t > split).collect();
    let ens = bootstrap_filter(&train, &training, particles, &mut rng)?;
    let k_max = realized.len().max(1);
    let predicted = crate::prediction::forecast_change_points(&ens, &training, split, k_max, &COVERAGE_LEVELS, DEFAULT_TAIL_EPS)?;
    let change_point_rmse = if realized.is_empty() {
        f64::NAN
    } else {
        (realized.iter().zip(&predicted).map(|(t, f)| (f.point - *t as f64).powi(2)).sum::<f64>() / realized.len() as f64).sqrt()
    };
    let test = &series.values()[split..];
    let forecast = crate::prediction::forecast_series(&ens, &training, train.values()[split - 1], test.len(), &mut rng)?;
    let h = test.len() as f64;
    let forecast_rmse = (forecast.iter().zip(test).map(|(f, x)| (f - x).powi(2)).sum::<f64>() / h).sqrt();
    let forecast_mae = forecast.iter().zip(test).map(|(f, x)| (f - x).abs()).sum::<f64>() / h;
    let forecast_mape = 100.0 * forecast.iter().zip(test).map(|(f, x)| ((f - x) / x).abs()).sum::<f64>() / h;
    Ok(PjmReport {
        n,
        split,
        bic: selection.fits.iter().map(|f| f.bic).collect(),
        chosen_m: selection.chosen_m,
        training,
        full,
        realized,
        predicted,
        change_point_rmse,
        forecast,
        forecast_rmse,
        forecast_mae,
        forecast_mape,
    })
}

/// Draws an AR(1) path with standard normal noise; used by tests and
/// examples that need plain autoregressive data.
pub fn simulate_ar1<R: Rng + ?Sized>(phi: f64, a: f64, sigma: f64, n: usize, rng: &mut R) -> Vec<f64> {
    let mut x = a + sigma / (1.0 - phi * phi).sqrt() * standard_normal(rng);
    (0..n)
        .map(|_| {
            let v = x;
            x = a + phi * (x - a) + sigma * standard_normal(rng);
            v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model23_lengths() {
        for (m, n) in [(30, 1230), (40, 2040), (50, 3050)] {
            let s = model23_segments(m);
            assert_eq!(s[0], (1, 12));
            assert_eq!(s[1], (13, 26));
            assert_eq!(s.last().unwrap().1, n);
            let series = simulate_model23(m, &mut stream_rng(1, &[])).unwrap();
            assert_eq!(series.len(), n);
        }
    }

    #[test]
    fn reference_tables_line_up_with_names() {
        let r = table1_reference(1000).unwrap();
        let names = TassParams::vector_names(2);
        assert_eq!(names.len(), r.len());
        assert_eq!(names[8], "beta");
        assert_eq!(r[8].0, 58.84);
        assert!(table2_reference(1500).is_none());
    }
}
