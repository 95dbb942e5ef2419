//! Regime-count selection by BIC on a simulated two-regime series.

use tass::estimation::{fit_with, FitOptions};
use tass::model::{simulate, TassParams};
use tass::numerics::random::stream_rng;

fn main() -> tass::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let sim = simulate(&TassParams::two_regime_benchmark(), n, &mut stream_rng(11, &[]))?;
    for m in 1..=3 {
        let t = std::time::Instant::now();
        let fit = fit_with(&sim.series, m, &FitOptions::default())?;
        println!(
            "m = {m}: CTL2 {:.2} BIC {:.2} ({} evaluations, converged {}, {:.1?})",
            fit.ctl2_value,
            fit.bic,
            fit.evaluations,
            fit.converged,
            t.elapsed()
        );
    }
    Ok(())
}
