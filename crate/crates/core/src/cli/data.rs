//! CSV ingestion of `(timestamp, value)` series and weekly aggregation.

use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TassError};
use crate::model::ObservedSeries;

const HOUR: i64 = 3600;
const WEEK: i64 = 7 * 24 * HOUR;
const HOURS_PER_WEEK: f64 = 168.0;

/// How the time column is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimeAxis {
    /// Plain integer positions such as `1, 2, 3`.
    Index,
    /// Calendar instants, stored as seconds since the Unix epoch.
    Clock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub timestamps: Vec<i64>,
    pub values: Vec<f64>,
    pub axis: TimeAxis,
    /// Typical spacing between consecutive timestamps (median), in axis units.
    pub spacing: Option<i64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn series(&self) -> Result<ObservedSeries> {
        ObservedSeries::new(self.values.clone())
    }

    fn with_spacing(mut self) -> Self {
        let mut gaps: Vec<i64> = self.timestamps.windows(2).map(|w| w[1] - w[0]).collect();
        gaps.sort_unstable();
        self.spacing = gaps.get(gaps.len() / 2).copied();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
pub enum DuplicatePolicy {
    /// Duplicate timestamps are an error.
    #[default]
    Reject,
    /// Keep the first row for each timestamp.
    First,
    /// Average the rows sharing a timestamp.
    Mean,
}

/// Which columns to read; by default the first holds time and the second
/// the values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub time_column: Option<String>,
    pub value_column: Option<String>,
    pub duplicates: DuplicatePolicy,
}

fn parse_time(s: &str) -> Option<(i64, TimeAxis)> {
    let s = s.trim();
    if let Ok(i) = s.parse::<i64>() {
        return Some((i, TimeAxis::Index));
    }
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some((t.timestamp(), TimeAxis::Clock));
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M", "%m/%d/%Y %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some((t.and_utc().timestamp(), TimeAxis::Clock));
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .map(|d| (d.and_hms_opt(0, 0, 0).expect("midnight").and_utc().timestamp(), TimeAxis::Clock))
}

fn column(headers: &csv::StringRecord, name: &Option<String>, default: usize) -> Result<usize> {
    match name {
        None if default < headers.len() => Ok(default),
        None => Err(TassError::Parse {
            line: 1,
            message: format!("expected at least {} columns", default + 1),
        }),
        Some(n) => headers.iter().position(|h| h.trim() == n).ok_or_else(|| TassError::Parse {
            line: 1,
            message: format!("no column named {n:?}"),
        }),
    }
}

/// Reads a headed CSV of `(timestamp, value)` rows. Rows are sorted by
/// time (with a warning when they were not in order); duplicates follow
/// `schema.duplicates`.
pub fn ingest(path: &Path, schema: &Schema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let tc = column(&headers, &schema.time_column, 0)?;
    let vc = column(&headers, &schema.value_column, 1)?;
    let mut rows: Vec<(i64, f64, usize)> = Vec::new();
    let mut axis = None;
    for (i, rec) in reader.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        let raw_t = rec.get(tc).unwrap_or("");
        let raw_v = rec.get(vc).unwrap_or("");
        let (t, ax) = parse_time(raw_t).ok_or_else(|| TassError::Parse {
            line,
            message: format!("unreadable timestamp {raw_t:?}"),
        })?;
        match axis {
            None => axis = Some(ax),
            Some(a) if a != ax => {
                return Err(TassError::Parse {
                    line,
                    message: "mixes integer positions and calendar times".into(),
                })
            }
            _ => {}
        }
        let v: f64 = raw_v.parse().map_err(|_| TassError::Parse {
            line,
            message: format!("unreadable value {raw_v:?}"),
        })?;
        if !v.is_finite() {
            return Err(TassError::Parse { line, message: format!("value {v} is not finite") });
        }
        rows.push((t, v, line));
    }
    if rows.is_empty() {
        return Err(TassError::Parse { line: 1, message: "no data rows".into() });
    }
    if rows.windows(2).any(|w| w[1].0 < w[0].0) {
        warn!("{}: rows were out of time order and have been sorted", path.display());
        rows.sort_by_key(|r| r.0);
    }
    let mut timestamps = Vec::with_capacity(rows.len());
    let mut values: Vec<f64> = Vec::with_capacity(rows.len());
    let mut counts: Vec<usize> = Vec::with_capacity(rows.len());
    let mut duplicates = 0usize;
    for (t, v, line) in rows {
        if timestamps.last() == Some(&t) {
            duplicates += 1;
            let last = values.len() - 1;
            match schema.duplicates {
                DuplicatePolicy::Reject => {
                    return Err(TassError::DuplicateTimestamp { line, timestamp: format_time(t, axis) })
                }
                DuplicatePolicy::First => {}
                DuplicatePolicy::Mean => {
                    values[last] += v;
                    counts[last] += 1;
                }
            }
        } else {
            timestamps.push(t);
            values.push(v);
            counts.push(1);
        }
    }
    if duplicates > 0 {
        warn!("{}: merged {duplicates} rows with repeated timestamps", path.display());
    }
    for (v, c) in values.iter_mut().zip(&counts) {
        *v /= *c as f64;
    }
    Ok(Dataset {
        timestamps,
        values,
        axis: axis.unwrap_or(TimeAxis::Index),
        spacing: None,
    }
    .with_spacing())
}

fn format_time(t: i64, axis: Option<TimeAxis>) -> String {
    match axis {
        Some(TimeAxis::Clock) => DateTime::from_timestamp(t, 0).map(|d| d.to_rfc3339()).unwrap_or_else(|| t.to_string()),
        _ => t.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
pub enum WeeklyStat {
    /// Total over the week's 168 hours.
    #[default]
    Sum,
    /// Average hourly value.
    Mean,
}

/// Collapses an hourly (or finer) calendar series into consecutive
/// seven-day blocks starting at the first observation. Hours with several
/// readings are averaged first. A block with missing hours takes the mean
/// of the hours present, scaled to 168 hours for [`WeeklyStat::Sum`].
pub fn aggregate_weekly(d: &Dataset, stat: WeeklyStat) -> Result<Dataset> {
    if d.axis != TimeAxis::Clock {
        return Err(TassError::Domain("weekly aggregation needs calendar timestamps".into()));
    }
    if d.is_empty() {
        return Err(TassError::Domain("empty dataset".into()));
    }
    if d.spacing.is_some_and(|s| s > HOUR) {
        return Err(TassError::Domain("weekly aggregation needs hourly or finer data".into()));
    }
    let start = d.timestamps[0];
    let last = *d.timestamps.last().expect("non-empty");
    let weeks = ((last - start) / WEEK + 1) as usize;
    // per week: hour slot -> (sum, count)
    let mut sums = vec![0.0; weeks];
    let mut hours = vec![0usize; weeks];
    let mut i = 0;
    while i < d.len() {
        let slot = (d.timestamps[i] - start) / HOUR;
        let (mut s, mut c) = (0.0, 0usize);
        while i < d.len() && (d.timestamps[i] - start) / HOUR == slot {
            s += d.values[i];
            c += 1;
            i += 1;
        }
        let w = (slot * HOUR / WEEK) as usize;
        sums[w] += s / c as f64;
        hours[w] += 1;
    }
    let mut values = Vec::with_capacity(weeks);
    let mut partial = 0;
    for (w, (&s, &h)) in sums.iter().zip(&hours).enumerate() {
        if h == 0 {
            return Err(TassError::EmptyWeek(format_time(start + w as i64 * WEEK, Some(TimeAxis::Clock))));
        }
        if (h as f64) < HOURS_PER_WEEK {
            partial += 1;
        }
        let mean = s / h as f64;
        values.push(match stat {
            WeeklyStat::Sum => mean * HOURS_PER_WEEK,
            WeeklyStat::Mean => mean,
        });
    }
    if partial > 0 {
        warn!("{partial} week(s) had missing hours and were filled with the mean of the hours present");
    }
    Ok(Dataset {
        timestamps: (0..weeks as i64).map(|w| start + w * WEEK).collect(),
        values,
        axis: TimeAxis::Clock,
        spacing: Some(WEEK),
    })
}

/// Writes `t,x` rows with 1-based positions.
pub fn write_series(path: &Path, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["t", "x"])?;
    for (i, v) in values.iter().enumerate() {
        w.write_record([(i + 1).to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
