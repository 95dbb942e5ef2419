//! Ingests an hourly CSV and aggregates it into weekly means, the way the
//! PJM workflow prepares its data.

use chrono::{NaiveDate, TimeDelta};
use tass::cli::data::{aggregate_weekly, ingest, DuplicatePolicy, Schema, WeeklyStat};

fn main() -> tass::Result<()> {
    let path = std::env::temp_dir().join("tass_weekly_example.csv");
    let start = NaiveDate::from_ymd_opt(2020, 1, 6).expect("valid date").and_hms_opt(0, 0, 0).expect("midnight");
    let mut csv = String::from("Datetime,MW\n");
    for h in 0..24 * 7 * 8 {
        let (day, hour) = (h / 24, h % 24);
        let load = 30_000.0 + 5_000.0 * ((hour as f64 - 6.0) * std::f64::consts::PI / 12.0).sin() + 100.0 * day as f64;
        let stamp = start + TimeDelta::hours(h);
        csv.push_str(&format!("{},{load:.1}\n", stamp.format("%Y-%m-%d %H:%M:%S")));
    }
    std::fs::write(&path, csv)?;
    let schema = Schema { duplicates: DuplicatePolicy::Mean, ..Default::default() };
    let hourly = ingest(&path, &schema)?;
    let weekly = aggregate_weekly(&hourly, WeeklyStat::Mean)?;
    println!("{} hourly rows -> {} weeks", hourly.len(), weekly.len());
    for v in &weekly.values {
        println!("{v:.1}");
    }
    std::fs::remove_file(&path)?;
    Ok(())
}
