use thiserror::Error;

use crate::events::EventSeries;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("event series is empty")]
    EmptySeries,

    #[error("event time at index {index} is not finite or negative: {time}")]
    InvalidTime { index: usize, time: f64 },

    #[error("event times must be strictly increasing: t[{index}] = {time} does not exceed t[{}] = {previous}", .index - 1)]
    NotIncreasing { index: usize, time: f64, previous: f64 },

    #[error("horizon {horizon} is invalid for last event time {last}")]
    InvalidHorizon { horizon: f64, last: f64 },

    #[error("duration at index {index} must be finite and positive, got {value}")]
    InvalidDuration { index: usize, value: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("simulation aborted after {} events: {reason}", .partial.len())]
    SimulationAborted {
        reason: String,
        partial: Box<EventSeries>,
    },

    #[error("too few events for calibration: {got} < {min}")]
    TooFewEvents { got: usize, min: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
