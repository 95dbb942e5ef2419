//! Forecasts of the next change-points and of the series itself from the
//! filter's terminal states.

use tass::inference::bootstrap_filter;
use tass::model::{simulate, TassParams};
use tass::numerics::random::stream_rng;
use tass::prediction::{forecast_change_points, forecast_series};

fn main() -> tass::Result<()> {
    let p = TassParams::two_regime_benchmark();
    let n = 1000;
    let sim = simulate(&p, n, &mut stream_rng(9, &[]))?;
    let ens = bootstrap_filter(&sim.series, &p, 1000, &mut stream_rng(9, &[1]))?;
    for f in forecast_change_points(&ens, &p, n, 3, &[0.8, 0.95], 1e-10)? {
        let i95 = f.interval(0.95).expect("requested level");
        println!("change-point {}: point {:.1}, 95% interval [{:.1}, {:.1}]", f.k, f.point, i95.lower, i95.upper);
    }
    let x_last = *sim.series.values().last().expect("non-empty");
    let path = forecast_series(&ens, &p, x_last, 10, &mut stream_rng(9, &[2]))?;
    let shown: Vec<String> = path.iter().map(|v| format!("{v:.2}")).collect();
    println!("mean forecast, next 10 steps: {}", shown.join(" "));
    Ok(())
}
