//! Event and duration series, the common currency of every module.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing event times observed on `[0, horizon]`.
///
/// Ties are rejected rather than perturbed: all intensity-based formulas in
/// this crate assume a simple point process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSeries")]
pub struct EventSeries {
    horizon: f64,
    times: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSeries {
    horizon: f64,
    times: Vec<f64>,
}

impl TryFrom<RawSeries> for EventSeries {
    type Error = Error;

    fn try_from(raw: RawSeries) -> Result<Self> {
        EventSeries::new(raw.times, raw.horizon)
    }
}

impl EventSeries {
    pub fn new(times: Vec<f64>, horizon: f64) -> Result<Self> {
        validate_times(&times)?;
        let last = times.last().copied().unwrap_or(0.0);
        if !horizon.is_finite() || horizon < last {
            return Err(Error::InvalidHorizon { horizon, last });
        }
        Ok(Self { horizon, times })
    }

    /// Series whose horizon is its last event time.
    pub fn from_times(times: Vec<f64>) -> Result<Self> {
        let horizon = times.last().copied().unwrap_or(0.0);
        Self::new(times, horizon)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn into_times(self) -> Vec<f64> {
        self.times
    }

    /// Empirical rate `N / T`.
    pub fn rate(&self) -> f64 {
        self.times.len() as f64 / self.horizon
    }

    /// Drops the first `burn_in` events and moves the time origin to the last
    /// dropped event, so the first retained duration is a genuine inter-event
    /// time.
    pub fn discard_burn_in(&self, burn_in: usize) -> Result<EventSeries> {
        if burn_in >= self.times.len() {
            return Err(Error::param(format!(
                "burn-in {burn_in} leaves no events out of {}",
                self.times.len()
            )));
        }
        let origin = if burn_in == 0 { 0.0 } else { self.times[burn_in - 1] };
        let times: Vec<f64> = self.times[burn_in..].iter().map(|t| t - origin).collect();
        EventSeries::new(times, self.horizon - origin)
    }

    /// Shifts every time (and the horizon) by `offset`.
    pub fn shifted(&self, offset: f64) -> Result<EventSeries> {
        let times = self.times.iter().map(|t| t + offset).collect();
        EventSeries::new(times, self.horizon + offset)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Two-column `index,time` CSV with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(24 * (self.times.len() + 1));
        out.push_str("index,time\n");
        for (i, t) in self.times.iter().enumerate() {
            // `{}` on f64 prints the shortest representation that round-trips.
            let _ = writeln!(out, "{i},{t}");
        }
        out
    }

    /// Parses either the `index,time` layout written by [`Self::to_csv`] or a
    /// single column of timestamps. A non-numeric first line is treated as a
    /// header. The horizon is the last event time.
    pub fn from_csv(s: &str) -> Result<Self> {
        let mut times = Vec::new();
        for (lineno, line) in s.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let field = line.rsplit(',').next().unwrap_or(line).trim();
            match field.parse::<f64>() {
                Ok(t) => {
                    if let Some(&prev) = times.last() {
                        if t <= prev {
                            return Err(Error::Parse {
                                line: lineno + 1,
                                message: if t == prev {
                                    format!("duplicate timestamp {t}")
                                } else {
                                    format!("timestamp {t} precedes previous {prev}")
                                },
                            });
                        }
                    }
                    if !t.is_finite() || t < 0.0 {
                        return Err(Error::Parse {
                            line: lineno + 1,
                            message: format!("invalid timestamp {t}"),
                        });
                    }
                    times.push(t);
                }
                Err(_) if times.is_empty() => continue, // header
                Err(e) => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        message: format!("cannot parse {field:?}: {e}"),
                    })
                }
            }
        }
        if times.is_empty() {
            return Err(Error::EmptySeries);
        }
        EventSeries::from_times(times)
    }
}

fn validate_times(times: &[f64]) -> Result<()> {
    let mut prev = None;
    for (index, &time) in times.iter().enumerate() {
        if !time.is_finite() || time < 0.0 {
            return Err(Error::InvalidTime { index, time });
        }
        if let Some(previous) = prev {
            if time <= previous {
                return Err(Error::NotIncreasing { index, time, previous });
            }
        }
        prev = Some(time);
    }
    Ok(())
}

/// Strictly positive inter-event times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DurationSeries {
    durations: Vec<f64>,
}

impl DurationSeries {
    pub fn new(durations: Vec<f64>) -> Result<Self> {
        if durations.is_empty() {
            return Err(Error::EmptySeries);
        }
        for (index, &value) in durations.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidDuration { index, value });
            }
        }
        Ok(Self { durations })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.durations
    }

    pub fn len(&self) -> usize {
        self.durations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.durations.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.durations.iter().sum::<f64>() / self.durations.len() as f64
    }
}

/// `δt_1 = t_1 − 0`, `δt_i = t_i − t_{i−1}`.
pub fn events_to_durations(events: &EventSeries) -> Result<DurationSeries> {
    if events.is_empty() {
        return Err(Error::EmptySeries);
    }
    let mut prev = 0.0;
    let durations = events
        .times()
        .iter()
        .map(|&t| {
            let d = t - prev;
            prev = t;
            d
        })
        .collect();
    DurationSeries::new(durations)
}

/// Cumulative sums offset by `start`; the horizon is the last time.
pub fn durations_to_events(durations: &DurationSeries, start: f64) -> Result<EventSeries> {
    if !start.is_finite() || start < 0.0 {
        return Err(Error::param(format!("start time must be finite and >= 0, got {start}")));
    }
    let mut t = start;
    let times = durations
        .as_slice()
        .iter()
        .map(|d| {
            t += d;
            t
        })
        .collect();
    EventSeries::from_times(times)
}
