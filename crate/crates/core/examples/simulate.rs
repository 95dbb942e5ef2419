//! Simulates the two-regime benchmark and prints the first change-points.

use tass::model::{simulate, TassParams};
use tass::numerics::random::stream_rng;

fn main() -> tass::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(500);
    let sim = simulate(&TassParams::two_regime_benchmark(), n, &mut stream_rng(3, &[]))?;
    let x = sim.series.values();
    let y = sim.latent.values();
    let mean = x.iter().sum::<f64>() / n as f64;
    println!("n = {n}, mean x = {mean:.3}, {} change-points", sim.change_points.len());
    for &t in sim.change_points.iter().take(10) {
        println!("t = {t:>4}: y {:.3} -> {:.3}, regime {} -> {}", y[t - 2], y[t - 1], sim.regimes[t - 2], sim.regimes[t - 1]);
    }
    Ok(())
}
