//! Simulates the two-regime benchmark and estimates it by CTL2.

use tass::estimation::{fit_with, FitOptions};
use tass::model::{simulate, TassParams};
use tass::numerics::random::stream_rng;

fn main() -> tass::Result<()> {
    let truth = TassParams::two_regime_benchmark();
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let sim = simulate(&truth, n, &mut stream_rng(7, &[]))?;
    let t0 = std::time::Instant::now();
    let fit = fit_with(&sim.series, 2, &FitOptions { covariance: true, ..Default::default() })?;
    let se = fit.standard_errors().unwrap_or_default();
    println!("n = {n}, CTL2 = {:.3}, BIC = {:.3}, {} evaluations in {:.1?}", fit.ctl2_value, fit.bic, fit.evaluations, t0.elapsed());
    let est = fit.params.to_vector();
    let tru = truth.to_vector();
    for (i, name) in fit.parameter_names.iter().enumerate() {
        println!("{name:>8} true {:>8.4} est {:>8.4} se {:>8.4}", tru[i], est[i], se.get(i).copied().unwrap_or(f64::NAN));
    }
    Ok(())
}
