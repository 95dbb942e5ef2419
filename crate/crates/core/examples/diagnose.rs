//! Residual checks after MAP decoding: Ljung-Box and Anderson-Darling on
//! the observation residuals and on the decoded latent increments.

use tass::diagnostics::{diagnose, residuals};
use tass::inference::map_decode;
use tass::model::{simulate, TassParams};
use tass::numerics::random::stream_rng;

fn main() -> tass::Result<()> {
    let p = TassParams::two_regime_benchmark();
    let sim = simulate(&p, 2000, &mut stream_rng(13, &[]))?;
    let map = map_decode(&sim.series, &p, 500, &mut stream_rng(13, &[1]))?;
    let summary = diagnose(&residuals(&sim.series, &map, &p)?, &p, 20)?;
    for (which, r) in ["e", "eps", "e", "eps"].iter().zip(summary.reports()) {
        println!("{:<17} on {which:<3} {:<16} statistic {:>7.3} p {:.3}", r.test_name, r.detail, r.statistic, r.p_value);
    }
    Ok(())
}
