//! Reading event files and turning return series into events.

use std::path::Path;

use endo_core::stats::{quantile_sorted, sorted_finite};
use endo_core::EventSeries;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EventFormat {
    Csv,
    Json,
}

impl EventFormat {
    /// `.json` is JSON, anything else CSV.
    pub fn infer(path: &Path) -> EventFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => EventFormat::Json,
            _ => EventFormat::Csv,
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))
}

/// Reads and validates an event file. CSV files hold one timestamp per line
/// (or the `index,time` layout) with an optional header; JSON files hold
/// `{"horizon": T, "times": [...]}`.
pub fn ingest_events(path: &Path, format: Option<EventFormat>) -> Result<EventSeries> {
    let text = read(path)?;
    let parsed = match format.unwrap_or_else(|| EventFormat::infer(path)) {
        EventFormat::Csv => EventSeries::from_csv(&text),
        EventFormat::Json => EventSeries::from_json(&text),
    };
    parsed.map_err(|e| HarnessError::Data(format!("{}: {e}", path.display())))
}

/// Reads a single column of numbers (the last field of each line), skipping
/// a non-numeric header, blank lines and `#` comments.
pub fn read_values(path: &Path) -> Result<Vec<f64>> {
    let text = read(path)?;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let field = line.rsplit(',').next().unwrap_or(line).trim();
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(v) => {
                return Err(HarnessError::Data(format!("{}:{}: non-finite value {v}", path.display(), lineno + 1)))
            }
            Err(_) if values.is_empty() => continue,
            Err(e) => {
                return Err(HarnessError::Data(format!("{}:{}: cannot parse {field:?}: {e}", path.display(), lineno + 1)))
            }
        }
    }
    Ok(values)
}

pub const POT_MIN_LENGTH: usize = 100;

/// Peak-over-threshold events: observation `i` (counted from 1) is an event
/// when its value lies strictly below the `lower` or strictly above the
/// `upper` empirical quantile of the whole series. Event times are the
/// observation indices, so the horizon is the series length.
pub fn extract_pot_events(values: &[f64], lower: f64, upper: f64) -> Result<EventSeries> {
    if values.len() < POT_MIN_LENGTH {
        return Err(HarnessError::Data(format!(
            "peak-over-threshold needs at least {POT_MIN_LENGTH} observations, got {}",
            values.len()
        )));
    }
    if !(0.0 < lower && lower < upper && upper < 1.0) {
        return Err(HarnessError::Config(format!("quantiles must satisfy 0 < lower < upper < 1, got ({lower}, {upper})")));
    }
    let sorted = sorted_finite(values);
    if sorted.len() != values.len() {
        return Err(HarnessError::Data("series contains non-finite values".into()));
    }
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(HarnessError::Data("series is constant".into()));
    }
    let lo = quantile_sorted(&sorted, lower);
    let hi = quantile_sorted(&sorted, upper);
    let times: Vec<f64> =
        values.iter().enumerate().filter(|(_, &v)| v < lo || v > hi).map(|(i, _)| (i + 1) as f64).collect();
    if times.is_empty() {
        return Err(HarnessError::Data("no observation falls outside the quantile band".into()));
    }
    Ok(EventSeries::new(times, values.len() as f64)?)
}
