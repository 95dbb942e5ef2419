//! MAP decoding of the latent path by the bootstrap particle filter,
//! compared against the simulated truth.

use tass::inference::map_decode;
use tass::model::{simulate, TassParams};
use tass::numerics::random::stream_rng;

fn main() -> tass::Result<()> {
    let particles: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(500);
    let p = TassParams::two_regime_benchmark();
    let sim = simulate(&p, 1000, &mut stream_rng(5, &[]))?;
    let map = map_decode(&sim.series, &p, particles, &mut stream_rng(5, &[1]))?;
    let agree = map.regimes.iter().zip(&sim.regimes).filter(|(a, b)| a == b).count();
    println!("{particles} particles: log joint {:.2}", map.log_joint);
    println!("regimes agree on {agree} of {} points", sim.regimes.len());
    println!("change-points: {} decoded, {} true", map.change_points.len(), sim.change_points.len());
    println!("first decoded: {:?}", &map.change_points[..map.change_points.len().min(8)]);
    println!("first true:    {:?}", &sim.change_points[..sim.change_points.len().min(8)]);
    Ok(())
}
