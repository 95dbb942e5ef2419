//! Command-line front end: argument parsing, data loading and the
//! commands behind the `tass` binary.

pub mod data;
pub mod output;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use crate::diagnostics::{acf, diagnose, qq_band, residuals, TargetLaw};
use crate::error::{Result, TassError};
use crate::estimation::{fit_with, select_model_with, FitOptions};
use crate::experiments::{
    self, estimation_study, power_study, prediction_study, selection_study, size_study, ParamSource, SelectionDesign,
    StudyConfig,
};
use crate::inference::{bootstrap_filter, MapDecoding, ParticleEnsemble};
use crate::likelihood::{FactorForm, LikelihoodSettings};
use crate::model::{simulate, ObservedSeries, TassParams};
use crate::numerics::optimize::OptimizerConfig;
use crate::numerics::random::stream_rng;
use crate::prediction::{forecast_series, hitting_distribution, predict_change_point};

use data::{aggregate_weekly, ingest, DuplicatePolicy, Schema, WeeklyStat};
use output::{num, Artifacts};

/// Environment variable holding the worker-thread count.
pub const THREADS_ENV: &str = "TASS_THREADS";

/// Environment variable pointing at the hourly PJM consumption CSV.
pub const PJM_ENV: &str = "TASS_PJM_CSV";

#[derive(Debug, Parser, Serialize)]
#[command(name = "tass", version, about = "Threshold autoregressive state-space models: fit, decode and predict change-points")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GlobalArgs {
    /// Directory for result files.
    #[arg(long, global = true, default_value = "tass-out")]
    pub output_dir: PathBuf,
    /// Seed for every random stream the command uses.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
    /// Also print the JSON summary on stdout.
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// CSV file with a time column and a value column.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub time_column: Option<String>,
    #[arg(long)]
    pub value_column: Option<String>,
    #[arg(long, value_enum, default_value_t = DuplicatePolicy::Reject)]
    pub duplicates: DuplicatePolicy,
    /// Aggregate hourly input into weeks first.
    #[arg(long)]
    pub weekly: bool,
    #[arg(long, value_enum, default_value_t = WeeklyStat::Sum)]
    pub weekly_stat: WeeklyStat,
    /// Multiply every value by this factor after aggregation.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    /// Use only the first `split` observations.
    #[arg(long)]
    pub split: Option<usize>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct NumericArgs {
    /// Whole-cycle truncation of the latent transition density.
    #[arg(long, default_value_t = 100)]
    pub j_max: usize,
    /// Gauss-Legendre order for the regime weights.
    #[arg(long, default_value_t = 64)]
    pub quad_order: usize,
    #[arg(long, default_value_t = 5)]
    pub restarts: usize,
    #[arg(long, default_value_t = 4000)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
    /// Use the two-step marginal Gaussian factor instead of the chained one.
    #[arg(long)]
    pub two_step_factor: bool,
}

impl NumericArgs {
    fn fit_options(&self, seed: u64, covariance: bool) -> FitOptions {
        FitOptions {
            optimizer: OptimizerConfig {
                max_iterations: self.max_iter,
                tolerance: self.tolerance,
                restarts: self.restarts,
                seed,
                ..OptimizerConfig::default()
            },
            likelihood: LikelihoodSettings {
                j_max: self.j_max,
                quadrature_order: self.quad_order,
                form: if self.two_step_factor { FactorForm::TwoStepMarginal } else { FactorForm::Chained },
            },
            covariance,
            ..FitOptions::default()
        }
    }
}

/// Where a decoding command gets its parameters.
#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// Parameter file (a `params.json` or a fit summary).
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Fit this many regimes when no parameter file is given.
    #[arg(long, default_value_t = 2)]
    pub m: usize,
    #[arg(long, default_value_t = 500)]
    pub particles: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Preset {
    TwoRegime,
    Ar1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Study {
    Table1,
    Table2,
    Table3,
    Table4,
    Selection,
    Pjm,
}

fn parse_level(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("not a number: {s}"))?;
    let v = if v > 1.0 { v / 100.0 } else { v };
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("coverage level {s} outside (0, 100)"))
    }
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Simulate a series, its latent path and change-points.
    Simulate {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, value_enum, default_value_t = Preset::TwoRegime)]
        model: Preset,
        /// Parameter file overriding the preset.
        #[arg(long)]
        params: Option<PathBuf>,
    },
    /// Estimate an m-regime model by CTL2.
    Fit {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        numeric: NumericArgs,
        #[arg(long, default_value_t = 2)]
        m: usize,
        /// Also compute the sandwich covariance.
        #[arg(long)]
        covariance: bool,
    },
    /// Fit 1..=m-max regimes and pick the count by BIC.
    Select {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        numeric: NumericArgs,
        #[arg(long, default_value_t = 5)]
        m_max: usize,
    },
    /// MAP latent path and retrospective change-points.
    Decode {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        numeric: NumericArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Predict future change-points and observations.
    Predict {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        numeric: NumericArgs,
        #[command(flatten)]
        model: ModelArgs,
        /// Number of future change-points.
        #[arg(long, default_value_t = 6)]
        k: usize,
        #[arg(long, value_delimiter = ',', value_parser = parse_level, default_value = "80,90,95")]
        levels: Vec<f64>,
        #[arg(long, default_value_t = crate::prediction::DEFAULT_TAIL_EPS)]
        tail_eps: f64,
        /// Steps of future observations to forecast.
        #[arg(long, default_value_t = 0)]
        horizon: usize,
    },
    /// Residual checks, QQ bands and autocorrelations.
    Diagnose {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        numeric: NumericArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = crate::diagnostics::DEFAULT_LAG)]
        lag: usize,
        #[arg(long, value_parser = parse_level, default_value = "95")]
        qq_level: f64,
        #[arg(long, default_value_t = 24)]
        acf_lags: usize,
    },
    /// Rerun a simulation study or the PJM workflow next to the published numbers.
    Reproduce {
        #[arg(value_enum)]
        study: Study,
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        numeric: NumericArgs,
        #[arg(long, default_value_t = 20)]
        reps: usize,
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 500)]
        particles: usize,
        /// Use the simulation parameters instead of refitting (table2, table3).
        #[arg(long)]
        truth: bool,
        /// Segment counts for table4.
        #[arg(long, value_delimiter = ',', default_value = "30,40,50")]
        segments: Vec<usize>,
        #[arg(long, default_value_t = 3)]
        m_max: usize,
    },
}

/// Sets up the global worker pool from [`THREADS_ENV`].
pub fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let threads: usize = v
            .parse()
            .map_err(|_| TassError::Domain(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        // a pool may already exist when called twice in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    Ok(())
}

fn load_series(input: &InputArgs) -> Result<ObservedSeries> {
    let path = input
        .input
        .as_ref()
        .ok_or_else(|| TassError::Domain("--input is required for this command".into()))?;
    load_series_from(path, input)
}

fn load_series_from(path: &Path, input: &InputArgs) -> Result<ObservedSeries> {
    let schema = Schema {
        time_column: input.time_column.clone(),
        value_column: input.value_column.clone(),
        duplicates: input.duplicates,
    };
    let mut d = ingest(path, &schema)?;
    if input.weekly {
        d = aggregate_weekly(&d, input.weekly_stat)?;
    }
    let mut values: Vec<f64> = d.values.iter().map(|v| v * input.scale).collect();
    if let Some(s) = input.split {
        if s > values.len() {
            return Err(TassError::Domain(format!("split {s} exceeds the {} observations", values.len())));
        }
        values.truncate(s);
    }
    ObservedSeries::new(values)
}

/// Reads parameters from a bare parameter file or from a summary that
/// contains them.
pub fn load_params(path: &Path) -> Result<TassParams> {
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let candidates = [
        v.clone(),
        v["params"].clone(),
        v["result"]["params"].clone(),
        v["result"]["chosen"]["params"].clone(),
    ];
    for c in candidates {
        if c.get("phi").is_some() {
            let p: TassParams = serde_json::from_value(c)?;
            p.validate()?;
            return Ok(p);
        }
    }
    Err(TassError::Domain(format!("{} holds no model parameters", path.display())))
}

fn resolve_params(series: &ObservedSeries, model: &ModelArgs, numeric: &NumericArgs, seed: u64) -> Result<TassParams> {
    match &model.params {
        Some(p) => load_params(p),
        None => Ok(fit_with(series, model.m, &numeric.fit_options(seed, false))?.params),
    }
}

fn run_filter(series: &ObservedSeries, params: &TassParams, model: &ModelArgs, seed: u64) -> Result<(ParticleEnsemble, MapDecoding)> {
    let mut rng = stream_rng(seed, &[0xDEC0DE]);
    let ens = bootstrap_filter(series, params, model.particles, &mut rng)?;
    let map = ens.map_decoding(params)?;
    Ok((ens, map))
}

fn write_path(out: &mut Artifacts, map: &MapDecoding) -> Result<()> {
    out.table(
        "path.csv",
        &["t", "y", "regime"],
        map.path
            .values()
            .iter()
            .zip(&map.regimes)
            .enumerate()
            .map(|(i, (y, r))| vec![(i + 1).to_string(), num(*y), (r + 1).to_string()]),
    )?;
    out.table("change_points.csv", &["t"], map.change_points.iter().map(|t| vec![t.to_string()]))
}

fn params_table(out: &mut Artifacts, name: &str, p: &TassParams) -> Result<()> {
    let names = TassParams::vector_names(p.m());
    out.table(
        name,
        &["parameter", "value"],
        names.iter().zip(p.to_vector()).map(|(n, v)| vec![n.clone(), num(v)]),
    )
}

/// Runs the parsed command and returns its JSON summary.
pub fn run(cli: &Cli) -> Result<Value> {
    let g = &cli.global;
    let seed = g.seed;
    let mut out = Artifacts::new(&g.output_dir)?;
    let summary = match &cli.command {
        Command::Simulate { n, model, params } => {
            let p = match params {
                Some(path) => load_params(path)?,
                None => match model {
                    Preset::TwoRegime => experiments::model21(),
                    Preset::Ar1 => experiments::ar1_null(),
                },
            };
            let sim = simulate(&p, *n, &mut stream_rng(seed, &[0x51]))?;
            data::write_series(&out.path("series.csv"), sim.series.values())?;
            let eps = std::iter::once(String::new()).chain(sim.increments.iter().map(|e| num(*e)));
            out.table(
                "latent.csv",
                &["t", "y", "regime", "increment"],
                sim.latent
                    .values()
                    .iter()
                    .zip(&sim.regimes)
                    .zip(eps)
                    .enumerate()
                    .map(|(i, ((y, r), e))| vec![(i + 1).to_string(), num(*y), (r + 1).to_string(), e]),
            )?;
            out.table("change_points.csv", &["t"], sim.change_points.iter().map(|t| vec![t.to_string()]))?;
            out.json("params.json", &p)?;
            let result = serde_json::json!({
                "n": n,
                "m": p.m(),
                "params": p,
                "change_points": sim.change_points,
            });
            out.finish("simulate", seed, &cli.command, &result)?
        }
        Command::Fit { input, numeric, m, covariance } => {
            let series = load_series(input)?;
            let fit = fit_with(&series, *m, &numeric.fit_options(seed, *covariance))?;
            out.json("params.json", &fit.params)?;
            params_table(&mut out, "estimates.csv", &fit.params)?;
            if let Some(cov) = &fit.covariance {
                let mut header = vec!["parameter"];
                header.extend(fit.parameter_names.iter().map(|s| s.as_str()));
                out.table(
                    "covariance.csv",
                    &header,
                    fit.parameter_names.iter().zip(cov).map(|(n, row)| {
                        std::iter::once(n.clone()).chain(row.iter().map(|v| num(*v))).collect::<Vec<_>>()
                    }),
                )?;
            }
            out.finish("fit", seed, &cli.command, &fit)?
        }
        Command::Select { input, numeric, m_max } => {
            let series = load_series(input)?;
            let sel = select_model_with(&series, *m_max, &numeric.fit_options(seed, false))?;
            out.table(
                "selection.csv",
                &["m", "ctl2", "bic", "converged"],
                sel.fits
                    .iter()
                    .map(|f| vec![f.m.to_string(), num(f.ctl2_value), num(f.bic), f.converged.to_string()]),
            )?;
            out.json("params.json", &sel.chosen().params)?;
            let result = serde_json::json!({
                "chosen_m": sel.chosen_m,
                "bic": sel.fits.iter().map(|f| f.bic).collect::<Vec<_>>(),
                "chosen": sel.chosen(),
            });
            out.finish("select", seed, &cli.command, &result)?
        }
        Command::Decode { input, numeric, model } => {
            let series = load_series(input)?;
            let params = resolve_params(&series, model, numeric, seed)?;
            let (_, map) = run_filter(&series, &params, model, seed)?;
            write_path(&mut out, &map)?;
            let result = serde_json::json!({
                "params": params,
                "log_joint": map.log_joint,
                "change_points": map.change_points,
            });
            out.finish("decode", seed, &cli.command, &result)?
        }
        Command::Predict { input, numeric, model, k, levels, tail_eps, horizon } => {
            let series = load_series(input)?;
            let n = series.len();
            let params = resolve_params(&series, model, numeric, seed)?;
            let (ens, map) = run_filter(&series, &params, model, seed)?;
            write_path(&mut out, &map)?;
            let mut forecasts = Vec::with_capacity(*k);
            let mut survival_rows = Vec::new();
            for kk in 1..=*k {
                let dist = hitting_distribution(&ens, &params, kk, *tail_eps)?;
                survival_rows.extend(
                    dist.survival
                        .iter()
                        .enumerate()
                        .map(|(t, s)| vec![kk.to_string(), (n + t + 1).to_string(), num(*s)]),
                );
                forecasts.push(predict_change_point(&dist, n, levels)?);
            }
            let mut header = vec!["k".to_string(), "point".to_string()];
            for l in levels.iter() {
                let pct = (l * 100.0).round();
                header.push(format!("lower_{pct}"));
                header.push(format!("upper_{pct}"));
            }
            let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
            out.table(
                "change_point_forecasts.csv",
                &header_refs,
                forecasts.iter().map(|f| {
                    let mut row = vec![f.k.to_string(), num(f.point)];
                    for i in &f.intervals {
                        row.push(num(i.lower));
                        row.push(num(i.upper));
                    }
                    row
                }),
            )?;
            out.table("survival.csv", &["k", "t", "survival"], survival_rows)?;
            let mut forecast = Vec::new();
            if *horizon > 0 {
                let x_last = series.values()[n - 1];
                forecast = forecast_series(&ens, &params, x_last, *horizon, &mut stream_rng(seed, &[0xF0CA]))?;
                out.table(
                    "forecast.csv",
                    &["t", "x"],
                    forecast.iter().enumerate().map(|(h, v)| vec![(n + h + 1).to_string(), num(*v)]),
                )?;
            }
            let result = serde_json::json!({
                "n": n,
                "params": params,
                "change_points": map.change_points,
                "forecasts": forecasts,
                "series_forecast": forecast,
            });
            out.finish("predict", seed, &cli.command, &result)?
        }
        Command::Diagnose { input, numeric, model, lag, qq_level, acf_lags } => {
            let series = load_series(input)?;
            let params = resolve_params(&series, model, numeric, seed)?;
            let (_, map) = run_filter(&series, &params, model, seed)?;
            let res = residuals(&series, &map, &params)?;
            let tests = diagnose(&res, &params, *lag)?;
            out.table(
                "residuals.csv",
                &["t", "e_hat", "eps_hat"],
                res.e_hat
                    .iter()
                    .zip(&res.eps_hat)
                    .enumerate()
                    .map(|(i, (e, s))| vec![(i + 2).to_string(), num(*e), num(*s)]),
            )?;
            out.table(
                "tests.csv",
                &["residual", "test", "statistic", "p_value", "detail"],
                ["e_hat", "eps_hat", "e_hat", "eps_hat"].iter().zip(tests.reports()).map(|(r, t)| {
                    vec![r.to_string(), t.test_name.clone(), num(t.statistic), num(t.p_value), t.detail.clone()]
                }),
            )?;
            for (name, sample, law) in [
                ("qq_e_hat.csv", &res.e_hat, TargetLaw::StandardNormal),
                ("qq_eps_hat.csv", &res.eps_hat, TargetLaw::Gamma(params.latent)),
            ] {
                let band = qq_band(sample, law, *qq_level)?;
                out.table(
                    name,
                    &["theoretical", "sample", "lower", "upper"],
                    band.iter()
                        .map(|q| vec![num(q.theoretical), num(q.sample), num(q.lower), num(q.upper)]),
                )?;
            }
            let lags = (*acf_lags).min(res.e_hat.len() - 1);
            let ae = acf(&res.e_hat, lags)?;
            let ay = acf(&res.eps_hat, lags)?;
            out.table(
                "acf.csv",
                &["lag", "e_hat", "eps_hat", "bound"],
                (0..=lags).map(|h| vec![h.to_string(), num(ae.values[h]), num(ay.values[h]), num(ae.bound)]),
            )?;
            let result = serde_json::json!({ "params": params, "tests": tests });
            out.finish("diagnose", seed, &cli.command, &result)?
        }
        Command::Reproduce { study, input, numeric, reps, n, particles, truth, segments, m_max } => {
            let cfg = StudyConfig {
                reps: *reps,
                n: *n,
                seed,
                particles: *particles,
                fit: numeric.fit_options(seed, false),
            };
            let source = if *truth { ParamSource::Truth } else { ParamSource::Fitted };
            let result = reproduce(*study, &cfg, source, input, segments, *m_max, &mut out)?;
            out.finish("reproduce", seed, &cli.command, &result)?
        }
    };
    Ok(summary)
}

fn side_by_side(label: &str, ours: f64, paper: Option<f64>) -> String {
    match paper {
        Some(p) => format!("{label:<24} {ours:>10.4} {p:>10.4}"),
        None => format!("{label:<24} {ours:>10.4} {:>10}", "-"),
    }
}

fn reproduce(
    study: Study,
    cfg: &StudyConfig,
    source: ParamSource,
    input: &InputArgs,
    segments: &[usize],
    m_max: usize,
    out: &mut Artifacts,
) -> Result<Value> {
    let mut lines = vec![format!("{:<24} {:>10} {:>10}", "", "this run", "published")];
    let result = match study {
        Study::Table1 => {
            let s = estimation_study(cfg)?;
            for p in &s.parameters {
                lines.push(side_by_side(&format!("{} mean", p.name), p.mean, p.reference.map(|r| r.0)));
                lines.push(side_by_side(&format!("{} rmse", p.name), p.rmse, p.reference.map(|r| r.1)));
            }
            out.table(
                "table1.csv",
                &["parameter", "truth", "mean", "rmse", "paper_mean", "paper_rmse"],
                s.parameters.iter().map(|p| {
                    vec![
                        p.name.clone(),
                        num(p.truth),
                        num(p.mean),
                        num(p.rmse),
                        p.reference.map(|r| num(r.0)).unwrap_or_default(),
                        p.reference.map(|r| num(r.1)).unwrap_or_default(),
                    ]
                }),
            )?;
            serde_json::to_value(&s)?
        }
        Study::Table2 => {
            let s = prediction_study(cfg, source)?;
            let r = s.reference;
            lines.push(side_by_side("prediction error", s.prediction_error, r.map(|r| r.0)));
            for (i, l) in experiments::COVERAGE_LEVELS.iter().enumerate() {
                lines.push(side_by_side(&format!("coverage {:.0}%", l * 100.0), s.coverage[i], r.map(|r| r.1[i])));
            }
            out.table(
                "table2.csv",
                &["replication", "predicted", "realized"],
                s.outcomes
                    .iter()
                    .enumerate()
                    .map(|(i, (p, t))| vec![(i + 1).to_string(), num(*p), t.to_string()]),
            )?;
            serde_json::to_value(&s)?
        }
        Study::Table3 | Study::Table4 => {
            let studies = if study == Study::Table3 {
                vec![size_study(cfg, source)?]
            } else {
                segments.iter().map(|&m| power_study(cfg, m)).collect::<Result<Vec<_>>>()?
            };
            let names = ["LB e_hat", "LB eps_hat", "AD e_hat", "AD eps_hat"];
            for s in &studies {
                lines.push(s.label.clone());
                for (i, name) in names.iter().enumerate() {
                    lines.push(side_by_side(name, s.rates[i], s.reference.map(|r| r[i])));
                }
            }
            out.table(
                if study == Study::Table3 { "table3.csv" } else { "table4.csv" },
                &["design", "n", "lb_e", "lb_eps", "ad_e", "ad_eps"],
                studies.iter().map(|s| {
                    let mut row = vec![s.label.clone(), s.n.to_string()];
                    row.extend(s.rates.iter().map(|r| num(*r)));
                    row
                }),
            )?;
            serde_json::to_value(&studies)?
        }
        Study::Selection => {
            let runs = [SelectionDesign::TwoRegime, SelectionDesign::Ar1]
                .into_iter()
                .map(|d| selection_study(cfg, d, m_max))
                .collect::<Result<Vec<_>>>()?;
            for s in &runs {
                lines.push(format!("{:?}: chosen m counts {:?} (correct {}/{})", s.design, s.counts, s.correct(), s.reps));
            }
            out.table(
                "selection.csv",
                &["design", "m", "count"],
                runs.iter().flat_map(|s| {
                    s.counts
                        .iter()
                        .enumerate()
                        .map(move |(i, c)| vec![format!("{:?}", s.design), (i + 1).to_string(), c.to_string()])
                }),
            )?;
            serde_json::to_value(&runs)?
        }
        Study::Pjm => {
            let path = input
                .input
                .clone()
                .or_else(|| std::env::var_os(PJM_ENV).map(PathBuf::from))
                .ok_or_else(|| {
                    TassError::Domain(format!(
                        "the PJM workflow needs the hourly consumption CSV via --input or {PJM_ENV}"
                    ))
                })?;
            let series = load_series_from(&path, &pjm_input(input))?;
            let split = input.split.unwrap_or(555);
            let report = experiments::pjm_workflow(&series, split, m_max, cfg.particles, cfg.seed, &cfg.fit)?;
            lines.push(format!("weekly observations {}, split {}", report.n, report.split));
            lines.push(format!("chosen m {} (published 2)", report.chosen_m));
            let names = TassParams::vector_names(report.training.m());
            for (i, v) in report.training.to_vector().iter().enumerate() {
                let paper = experiments::PJM_ESTIMATES.get(i).filter(|_| report.training.m() == 2).map(|r| r.0);
                lines.push(side_by_side(&format!("{} (training)", names[i]), *v, paper));
            }
            let (cp, rmse, mae, mape) = experiments::PJM_ERRORS;
            lines.push(side_by_side("change-point rmse", report.change_point_rmse, Some(cp)));
            lines.push(side_by_side("forecast rmse", report.forecast_rmse, Some(rmse)));
            lines.push(side_by_side("forecast mae", report.forecast_mae, Some(mae)));
            lines.push(side_by_side("forecast mape %", report.forecast_mape, Some(mape)));
            out.table(
                "pjm_change_points.csv",
                &["k", "realized", "predicted", "lower_80", "upper_80", "lower_95", "upper_95"],
                report.predicted.iter().enumerate().map(|(i, f)| {
                    vec![
                        f.k.to_string(),
                        report.realized.get(i).map(|t| t.to_string()).unwrap_or_default(),
                        num(f.point),
                        num(f.intervals[0].lower),
                        num(f.intervals[0].upper),
                        num(f.intervals[2].lower),
                        num(f.intervals[2].upper),
                    ]
                }),
            )?;
            out.table(
                "pjm_forecast.csv",
                &["t", "forecast", "observed"],
                report.forecast.iter().enumerate().map(|(h, f)| {
                    let t = report.split + h;
                    vec![(t + 1).to_string(), num(*f), num(series.values()[t])]
                }),
            )?;
            serde_json::to_value(&report)?
        }
    };
    let text = lines.join("\n");
    println!("{text}");
    std::fs::write(out.path("comparison.txt"), text + "\n")?;
    Ok(result)
}

/// Input handling for the PJM workflow: weekly means of hourly megawatts
/// in thousands, with repeated clock hours averaged, unless the caller
/// overrides them.
fn pjm_input(input: &InputArgs) -> InputArgs {
    let mut i = input.clone();
    i.split = None;
    if !input.weekly {
        i.weekly = true;
        i.weekly_stat = WeeklyStat::Mean;
        i.duplicates = DuplicatePolicy::Mean;
        if input.scale == 1.0 {
            i.scale = 1e-3;
        }
    }
    i
}
