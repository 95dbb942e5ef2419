//! Small replication runs of the simulation studies. Pass the number of
//! replications as the first argument.

use tass::experiments::{
    estimation_study, power_study, prediction_study, selection_study, size_study, ParamSource, SelectionDesign,
    StudyConfig,
};

fn main() -> tass::Result<()> {
    let reps: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let t = std::time::Instant::now();
    let est = estimation_study(&StudyConfig::new(reps, 1000, 1))?;
    println!("estimation n=1000: {:.1?}", t.elapsed());
    for p in &est.parameters {
        println!("  {:>8} truth {:>7.3} mean {:>7.3} rmse {:>7.3} paper {:?}", p.name, p.truth, p.mean, p.rmse, p.reference);
    }
    let t = std::time::Instant::now();
    let pred = prediction_study(&StudyConfig::new(reps, 2000, 1), ParamSource::Fitted)?;
    println!("prediction n=2000: PE {:.2} coverage {:?} in {:.1?}", pred.prediction_error, pred.coverage, t.elapsed());
    let t = std::time::Instant::now();
    let size = size_study(&StudyConfig::new(reps, 2000, 1), ParamSource::Fitted)?;
    println!("size n=2000: {:?} in {:.1?}", size.rates, t.elapsed());
    let t = std::time::Instant::now();
    let power = power_study(&StudyConfig::new(reps, 0, 1), 50)?;
    println!("power m=50: {:?} in {:.1?}", power.rates, t.elapsed());
    for design in [SelectionDesign::TwoRegime, SelectionDesign::Ar1] {
        let t = std::time::Instant::now();
        let sel = selection_study(&StudyConfig::new(reps, 2000, 1), design, 3)?;
        println!("selection {design:?}: {:?} in {:.1?}", sel.counts, t.elapsed());
    }
    Ok(())
}
