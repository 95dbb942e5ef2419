//! Acceptance harness: one PASS/FAIL line per criterion.
//!
//! Environment:
//! - `TASS_ACCEPTANCE_FULL=1` runs the model-selection and diagnostics
//!   studies at their full replication counts instead of the smoke scale.
//! - `TASS_ACCEPTANCE_ONLY=1,5,8` restricts the run to some criteria.
//! - `TASS_ACCEPTANCE_STRICT=1` makes any FAIL exit non-zero. Without it
//!   only the exact numerical checks (1-4, 8, 11) decide the exit status;
//!   the replication studies report their verdicts but are not gating.
//! - `TASS_PJM_CSV` points at the hourly PJM consumption file.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use tass::experiments::{
    estimation_study, model21, power_study, prediction_study, selection_study, size_study, table1_reference,
    table2_reference, table3_reference, ParamSource, SelectionDesign, StudyConfig,
};
use tass::inference::bootstrap_filter;
use tass::likelihood::{regime_weights, triple_density, LikelihoodSettings, TripleDensityCache};
use tass::model::{latent_step, simulate, transition_density, TassParams, DEFAULT_JMAX};
use tass::numerics::random::{stream_rng, uniform, GammaSampler};
use tass::numerics::special::GammaLaw;
use tass::numerics::QuadratureRule;

const SEED: u64 = 20240611;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Option<Verdict> {
    Some(Verdict { pass, detail: detail.into() })
}

fn env_flag(name: &str) -> bool {
    std::env::var(name).is_ok_and(|v| !v.is_empty() && v != "0")
}

// 1
fn transition_normalization() -> Option<Verdict> {
    // substitute d = s^2 for the offset so the d^(alpha - 1) corner is smooth
    let rule = QuadratureRule::gauss_legendre(32);
    let nodes = rule.composite(0.0, 1.0, 200);
    let mut worst: f64 = 0.0;
    for (alpha, beta) in [(0.5, 50.0), (1.0, 10.0), (2.0, 100.0)] {
        let law = GammaLaw::new(alpha, beta).unwrap();
        for y_prev in [0.0, 0.25, 0.5, 0.75, 0.99] {
            let total: f64 = nodes
                .iter()
                .map(|&(s, w)| {
                    let (y, _) = latent_step(y_prev, s * s);
                    w * 2.0 * s * transition_density(y_prev, y, &law, DEFAULT_JMAX).unwrap()
                })
                .sum();
            worst = worst.max((total - 1.0).abs());
        }
    }
    verdict(worst <= 1e-8, format!("worst |integral - 1| = {worst:.2e} over 15 cases (tol 1e-8)"))
}

// 2
fn stationary_uniformity() -> Option<Verdict> {
    // consecutive states are strongly dependent, so keep every `gap`-th
    // state; the gap makes the wrapped sum of increments spread far past
    // one bin width
    let bins = 20;
    let mut lines = Vec::new();
    let mut pass = true;
    for (alpha, beta, gap) in [(0.5, 50.0, 2000usize), (1.0, 10.0, 200)] {
        let law = GammaLaw::new(alpha, beta).unwrap();
        let sampler = GammaSampler::new(&law);
        let mut rng = stream_rng(SEED, &[2, gap as u64]);
        let mut y = uniform(&mut rng);
        let mut counts = vec![0usize; bins];
        let draws = 100_000;
        for _ in 0..draws {
            for _ in 0..gap {
                y = latent_step(y, sampler.sample(&mut rng)).0;
            }
            counts[((y * bins as f64) as usize).min(bins - 1)] += 1;
        }
        let expected = draws as f64 / bins as f64;
        let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        let p = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(stat);
        pass &= p > 0.01;
        lines.push(format!("Gamma({alpha}, {beta}) every {gap}th step: chi2 {stat:.1}, p {p:.3}"));
    }
    verdict(pass, format!("{} (10^5 draws each, 1% level)", lines.join("; ")))
}

// 3
fn weight_oracle() -> Option<Verdict> {
    let rule = QuadratureRule::gauss_legendre(64);
    let grid = [
        (0.5, 50.0, 0.6),
        (1.0, 10.0, 0.3),
        (2.0, 100.0, 0.5),
        (0.3, 20.0, 0.8),
        (5.0, 400.0, 0.45),
        (0.8, 3.0, 0.2),
        (0.211, 5.088, 0.298),
        (1.5, 30.0, 0.7),
        (0.6, 1.0, 0.5),
        (10.0, 200.0, 0.1),
    ];
    let mut worst: f64 = 0.0;
    let mut worst_total: f64 = 0.0;
    for (alpha, beta, r) in grid {
        let mut p = model21();
        p.latent = GammaLaw::new(alpha, beta).unwrap();
        p.thresholds = vec![r];
        let w = regime_weights(&p, DEFAULT_JMAX, &rule);
        let oracle = common::appendix_weights(alpha, beta, r);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    worst = worst.max((w.get(i, j, k) - oracle[i][j][k]).abs());
                }
            }
        }
        worst_total = worst_total.max((w.total() - 1.0).abs());
    }

    // empirical triple frequencies: independent triples started from the
    // stationary Uniform law, 10^7 latent steps in all
    let p = model21();
    let w = regime_weights(&p, DEFAULT_JMAX, &rule);
    let sampler = GammaSampler::new(&p.latent);
    let mut rng = stream_rng(SEED, &[3]);
    let triples = 5_000_000;
    let mut counts = [0usize; 8];
    for _ in 0..triples {
        let y0 = uniform(&mut rng);
        let y1 = latent_step(y0, sampler.sample(&mut rng)).0;
        let y2 = latent_step(y1, sampler.sample(&mut rng)).0;
        let r = |y: f64| usize::from(y >= p.thresholds[0]);
        counts[4 * r(y0) + 2 * r(y1) + r(y2)] += 1;
    }
    let mut worst_z: f64 = 0.0;
    for (c, &count) in counts.iter().enumerate() {
        let wv = w.get(c / 4, (c / 2) % 2, c % 2);
        let freq = count as f64 / triples as f64;
        let se = (wv * (1.0 - wv) / triples as f64).sqrt();
        worst_z = worst_z.max((freq - wv).abs() / se);
    }
    verdict(
        worst <= 1e-8 && worst_total <= 1e-6 && worst_z <= 3.0,
        format!(
            "max |w - closed form| {worst:.2e} (tol 1e-8) on 10 points, max |sum w - 1| {worst_total:.2e} (tol 1e-6), \
             worst empirical deviation {worst_z:.2} SE (tol 3) from 5e6 triples"
        ),
    )
}

// 4
fn triple_density_oracle() -> Option<Verdict> {
    let p = model21();
    let cache = TripleDensityCache::new(&p, LikelihoodSettings::default());
    let sim = simulate(&p, 2000, &mut stream_rng(SEED, &[4])).unwrap();
    let x = sim.series.values();
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let t = (97 * k + 13) % (x.len() - 2);
        let pt = [x[t], x[t + 1], x[t + 2]];
        let v = triple_density(pt, &p, &cache).unwrap();
        let b = common::brute_force_triple(pt, &p);
        worst = worst.max((v - b).abs() / b);
    }
    let ar = TassParams::ar1(0.7, 1.5, 0.8).unwrap();
    let ar_cache = TripleDensityCache::new(&ar, LikelihoodSettings::default());
    let mut rng = stream_rng(SEED, &[4, 1]);
    let mut worst_ar: f64 = 0.0;
    for _ in 0..20 {
        let pt = [0, 1, 2].map(|_| 1.5 + 4.0 * (uniform(&mut rng) - 0.5));
        let v = triple_density(pt, &ar, &ar_cache).unwrap();
        let o = common::ar1_triple_density(pt, 0.7, 1.5, 0.8);
        worst_ar = worst_ar.max((v - o).abs() / o);
    }
    verdict(
        worst <= 1e-5 && worst_ar <= 1e-10,
        format!(
            "two-regime vs latent-cube quadrature: max rel {worst:.2e} (tol 1e-5) at 20 points; \
             m = 1 vs trivariate normal: max rel {worst_ar:.2e} (tol 1e-10)"
        ),
    )
}

// 5
fn table1() -> Option<Verdict> {
    let study = estimation_study(&StudyConfig::new(50, 1000, SEED)).unwrap();
    let reference = table1_reference(1000).unwrap();
    let mut pass = true;
    let mut bad = Vec::new();
    for (s, (_, paper_rmse)) in study.parameters.iter().zip(reference) {
        let bias_ok = (s.mean - s.truth).abs() <= 2.0 * paper_rmse;
        let ratio = s.rmse / paper_rmse;
        let rmse_ok = (0.5..=2.0).contains(&ratio);
        if !(bias_ok && rmse_ok) {
            pass = false;
            bad.push(format!("{} mean {:.4} rmse {:.4} (paper rmse {paper_rmse})", s.name, s.mean, s.rmse));
        }
    }
    let summary: Vec<String> =
        study.parameters.iter().map(|s| format!("{} {:.3}/{:.3}", s.name, s.mean, s.rmse)).collect();
    verdict(
        pass,
        format!(
            "50 reps, n = 1000, {} converged; mean/rmse {}{}",
            study.converged,
            summary.join(", "),
            if bad.is_empty() { String::new() } else { format!("; out of band: {}", bad.join("; ")) }
        ),
    )
}

// 6
fn table2() -> Option<Verdict> {
    let reps = 100;
    let study = prediction_study(&StudyConfig::new(reps, 2000, SEED), ParamSource::Fitted).unwrap();
    let (pe, cov) = table2_reference(2000).unwrap();
    let pe_ok = (study.prediction_error - pe).abs() <= 1.5;
    let cov_ok = study.coverage.iter().zip(cov).all(|(c, r)| (c - r).abs() <= 0.05);
    verdict(
        pe_ok && cov_ok,
        format!(
            "{reps} reps, n = 2000: PE {:.2} (target {pe} +- 1.5), coverage {:.1}/{:.1}/{:.1}% (target {:.1}/{:.1}/{:.1} +- 5pp)",
            study.prediction_error,
            100.0 * study.coverage[0],
            100.0 * study.coverage[1],
            100.0 * study.coverage[2],
            100.0 * cov[0],
            100.0 * cov[1],
            100.0 * cov[2],
        ),
    )
}

// 7
fn selection(full: bool) -> Option<Verdict> {
    let reps: usize = if full { 100 } else { 20 };
    let need = (reps * 9).div_ceil(10);
    let cfg = StudyConfig::new(reps, 2000, SEED);
    let tass = selection_study(&cfg, SelectionDesign::TwoRegime, 3).unwrap();
    let ar = selection_study(&cfg, SelectionDesign::Ar1, 3).unwrap();
    verdict(
        tass.correct() >= need && ar.correct() >= need,
        format!(
            "{} scale, {reps} reps per design, n = 2000, m <= 3: two-regime picks m = 2 in {}/{reps} (counts {:?}), \
             AR(1) picks m = 1 in {}/{reps} (counts {:?}); need {need}",
            if full { "full" } else { "smoke" },
            tass.correct(),
            tass.counts,
            ar.correct(),
            ar.counts
        ),
    )
}

// 8
fn score_identity() -> Option<Verdict> {
    let p = model21();
    let mut worst: f64 = 0.0;
    for run in 0..10 {
        let sim = simulate(&p, 400, &mut stream_rng(SEED, &[8, run])).unwrap();
        let ens = bootstrap_filter(&sim.series, &p, 200, &mut stream_rng(SEED, &[8, run, 1])).unwrap();
        for k in 0..ens.particles() {
            let direct = common::direct_log_joint(sim.series.values(), &ens.path(k), &p);
            worst = worst.max((ens.scores()[k] - direct).abs());
        }
    }
    verdict(worst <= 1e-8, format!("max |a_n - log joint| = {worst:.2e} over 10 runs x 200 particles (tol 1e-8)"))
}

// 9
fn diagnostics_sizes_and_powers(full: bool) -> Option<Verdict> {
    let reps = if full { 100 } else { 40 };
    let sizes = size_study(&StudyConfig::new(reps, 2000, SEED), ParamSource::Fitted).unwrap();
    let size_ok = sizes.rates.iter().all(|r| (r - 0.05).abs() <= 0.03);
    let powers: Vec<[f64; 4]> = [30, 40, 50]
        .iter()
        .map(|&m| power_study(&StudyConfig::new(reps, 0, SEED), m).unwrap().rates)
        .collect();
    let ad_e_ok = powers[2][2] > 0.95;
    let monotone = [2, 3].iter().all(|&i| powers.windows(2).all(|w| w[1][i] >= w[0][i]));
    let pct = |v: &[f64; 4]| v.iter().map(|r| format!("{:.0}", 100.0 * r)).collect::<Vec<_>>().join("/");
    verdict(
        size_ok && ad_e_ok && monotone,
        format!(
            "{} scale, {reps} reps: sizes LB(e)/LB(eps)/AD(e)/AD(eps) {}% (target 5 +- 3, paper {}%); \
             powers m = 30/40/50: {} | {} | {}% (AD(e) at 50 > 95%, AD powers nondecreasing)",
            if full { "full" } else { "smoke" },
            pct(&sizes.rates),
            pct(&table3_reference(2000).unwrap()),
            pct(&powers[0]),
            pct(&powers[1]),
            pct(&powers[2]),
        ),
    )
}

// 10
fn pjm() -> Option<Verdict> {
    let Ok(path) = std::env::var("TASS_PJM_CSV") else {
        println!("SKIP  [10] PJM workflow: set TASS_PJM_CSV to the hourly PJM consumption CSV to run it");
        return None;
    };
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_tass"))
        .arg("--output-dir")
        .arg(dir.path())
        .args(["reproduce", "pjm", "--input", &path])
        .output()
        .unwrap();
    if !out.status.success() {
        return verdict(false, format!("workflow failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    let text = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
    let summary: serde_json::Value = serde_json::from_str(&text).unwrap();
    let r = &summary["result"];
    let chosen = r["chosen_m"].as_u64().unwrap_or(0);
    let training: TassParams = serde_json::from_value(r["training"].clone()).unwrap();
    let mut par_ok = training.m() == 2;
    let mut off = Vec::new();
    if par_ok {
        for ((name, v), (paper, _)) in
            TassParams::vector_names(2).iter().zip(training.to_vector()).zip(tass::experiments::PJM_ESTIMATES)
        {
            if (v - paper).abs() > 0.1 * paper.abs() {
                par_ok = false;
                off.push(format!("{name} {v:.3} vs {paper}"));
            }
        }
    }
    let (cp, rmse, mae, mape) = tass::experiments::PJM_ERRORS;
    let get = |k: &str| r[k].as_f64().unwrap_or(f64::NAN);
    let cp_ok = (get("change_point_rmse") - cp).abs() <= 0.5;
    let fc_ok = [(get("forecast_rmse"), rmse), (get("forecast_mae"), mae), (get("forecast_mape"), mape)]
        .iter()
        .all(|(v, p)| (v - p).abs() <= 0.15 * p);
    verdict(
        chosen == 2 && par_ok && cp_ok && fc_ok,
        format!(
            "chosen m {chosen} (want 2); parameters within 10%: {}{}; change-point RMSE {:.2} (target {cp} +- 0.5); \
             forecast RMSE/MAE/MAPE {:.3}/{:.3}/{:.2}% (targets {rmse}/{mae}/{mape} +- 15%)",
            par_ok,
            if off.is_empty() { String::new() } else { format!(" ({})", off.join(", ")) },
            get("change_point_rmse"),
            get("forecast_rmse"),
            get("forecast_mae"),
            get("forecast_mape"),
        ),
    )
}

// 11
fn determinism() -> Option<Verdict> {
    let bin = env!("CARGO_BIN_EXE_tass");
    let run = |root: &Path, threads: &str| -> BTreeMap<String, Vec<u8>> {
        let series = root.join("sim/series.csv");
        let params = root.join("fit/params.json");
        let steps: Vec<(&str, Vec<&str>)> = vec![
            ("sim", vec!["--seed", "11", "simulate", "--n", "500"]),
            ("fit", vec!["fit", "--input", series.to_str().unwrap(), "--m", "2", "--max-iter", "400"]),
            ("select", vec!["select", "--input", series.to_str().unwrap(), "--m-max", "2", "--max-iter", "300"]),
            ("predict", vec!["predict", "--input", series.to_str().unwrap(), "--params", params.to_str().unwrap(), "--particles", "200"]),
            ("diagnose", vec!["diagnose", "--input", series.to_str().unwrap(), "--params", params.to_str().unwrap(), "--particles", "200"]),
            ("table2", vec!["reproduce", "table2", "--reps", "4", "--n", "600", "--particles", "100", "--truth"]),
        ];
        let mut files = BTreeMap::new();
        for (name, args) in steps {
            let dir = root.join(name);
            let out = Command::new(bin).env("TASS_THREADS", threads).arg("--output-dir").arg(&dir).args(&args).output().unwrap();
            assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
            files.insert(format!("{name}/stdout"), out.stdout);
            for e in std::fs::read_dir(&dir).unwrap() {
                let e = e.unwrap();
                files.insert(format!("{name}/{}", e.file_name().to_string_lossy()), std::fs::read(e.path()).unwrap());
            }
        }
        files
    };
    let tmp = tempfile::tempdir().unwrap();
    let work = tmp.path().join("w");
    let a = run(&work, "1");
    std::fs::remove_dir_all(&work).unwrap();
    let b = run(&work, "1");
    std::fs::remove_dir_all(&work).unwrap();
    let c = run(&work, "4");
    let differing: Vec<&String> = a.keys().filter(|k| b.get(*k) != a.get(*k) || c.get(*k) != a.get(*k)).collect();

    // the library studies under explicit pools
    let study = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| serde_json::to_string(&estimation_study(&StudyConfig::new(3, 500, SEED)).unwrap()).unwrap())
    };
    let lib_same = study(1) == study(3);
    verdict(
        differing.is_empty() && a.len() == c.len() && lib_same,
        format!(
            "{} files from 6 commands compared over 2 runs x 1 thread and 1 run x 4 threads: {} differ; \
             estimation study on 1 vs 3 worker threads identical: {lib_same}",
            a.len(),
            differing.len()
        ),
    )
}

fn main() {
    let full = env_flag("TASS_ACCEPTANCE_FULL");
    let strict = env_flag("TASS_ACCEPTANCE_STRICT");
    let only: Option<Vec<u32>> = std::env::var("TASS_ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|v| v.trim().parse().ok()).collect());
    // criterion number, title, gating without strict mode, check
    type Check = Box<dyn Fn() -> Option<Verdict>>;
    let criteria: Vec<(u32, &str, bool, Check)> = vec![
        (1, "transition density normalization", true, Box::new(transition_normalization)),
        (2, "stationary uniformity of the latent walk", true, Box::new(stationary_uniformity)),
        (3, "regime weight oracle", true, Box::new(weight_oracle)),
        (4, "triple density oracle", true, Box::new(triple_density_oracle)),
        (5, "estimation study (Table 1 design)", false, Box::new(table1)),
        (6, "change-point prediction study (Table 2 design)", false, Box::new(table2)),
        (7, "model selection consistency", false, Box::new(move || selection(full))),
        (8, "MAP score identity", true, Box::new(score_identity)),
        (9, "diagnostic sizes and powers", false, Box::new(move || diagnostics_sizes_and_powers(full))),
        (10, "PJM workflow", false, Box::new(pjm)),
        (11, "determinism", true, Box::new(determinism)),
    ];
    let mut failed_gating = 0;
    let mut failed = 0;
    for (id, title, gating, check) in &criteria {
        if only.as_ref().is_some_and(|o| !o.contains(id)) {
            continue;
        }
        let start = Instant::now();
        let Some(v) = check() else { continue };
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("{tag}  [{id}] {title}: {} ({:.1?})", v.detail, start.elapsed());
        if !v.pass {
            failed += 1;
            if *gating {
                failed_gating += 1;
            }
        }
    }
    if failed_gating > 0 || (strict && failed > 0) {
        std::process::exit(1);
    }
}
