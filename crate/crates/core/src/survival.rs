//! Discrete-time survival curves.
//!
//! Time is measured in abstract units `0..=T`. A [`SurvivalCurve`] holds the
//! survival probabilities for units `1..=T` (index 0 is unit 1); a
//! [`PopulationEstimate`] additionally carries `S[0] = 1`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SurvivalError {
    #[error("empty cohort")]
    EmptyCohort,
    #[error("event time {time} exceeds horizon {horizon}")]
    TimeBeyondHorizon { time: usize, horizon: usize },
    #[error("event recorded at time 0")]
    EventAtZero,
    #[error("curve length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("no curves to average")]
    NoCurves,
    #[error("invalid survival curve: {0}")]
    InvalidCurve(String),
    #[error("censored at t={0} but population survival S[{prev}] is zero", prev = .0 - 1)]
    UndefinedConditional(usize),
}

pub type Result<T> = std::result::Result<T, SurvivalError>;

/// Event indicator and time of event (or of last observation when censored).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    event: bool,
    time: usize,
}

impl EventRecord {
    pub fn new(event: bool, time: usize, horizon: usize) -> Result<Self> {
        if time > horizon {
            return Err(SurvivalError::TimeBeyondHorizon { time, horizon });
        }
        if event && time == 0 {
            return Err(SurvivalError::EventAtZero);
        }
        Ok(Self { event, time })
    }

    pub fn event(&self) -> bool {
        self.event
    }

    pub fn time(&self) -> usize {
        self.time
    }
}

/// Non-increasing probabilities for time units `1..=T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SurvivalCurve(Vec<f64>);

impl SurvivalCurve {
    /// Validates range `[0, 1]` and non-increase.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(x) = values.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(SurvivalError::InvalidCurve(format!("value {x} outside [0, 1]")));
        }
        if let Some(w) = values.windows(2).find(|w| w[1] > w[0]) {
            return Err(SurvivalError::InvalidCurve(format!(
                "increase from {} to {}",
                w[0], w[1]
            )));
        }
        Ok(Self(values))
    }

    pub(crate) fn new_unchecked(values: Vec<f64>) -> Self {
        debug_assert!(Self::new(values.clone()).is_ok(), "{values:?}");
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }
}

/// Product-limit survival estimate `S[0..=T]` of a cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationEstimate {
    survival: Vec<f64>,
    at_risk: Vec<usize>,
    events: Vec<usize>,
}

impl PopulationEstimate {
    pub fn horizon(&self) -> usize {
        self.survival.len() - 1
    }

    /// `S[t]` for `t` in `0..=T`.
    pub fn survival(&self) -> &[f64] {
        &self.survival
    }

    /// Number at risk at each `t` (index 0 unused).
    pub fn at_risk(&self) -> &[usize] {
        &self.at_risk
    }

    pub fn events(&self) -> &[usize] {
        &self.events
    }
}

/// Kaplan-Meier product-limit estimator over `0..=horizon`.
///
/// A record censored at `t` is still at risk at `t`. Steps with nobody at risk
/// carry the previous value forward.
pub fn km_estimator(cohort: &[EventRecord], horizon: usize) -> Result<PopulationEstimate> {
    if cohort.is_empty() {
        return Err(SurvivalError::EmptyCohort);
    }
    // exits[t] = records whose last time is t; deaths[t] = events at t
    let mut exits = vec![0usize; horizon + 1];
    let mut deaths = vec![0usize; horizon + 1];
    for r in cohort {
        if r.time > horizon {
            return Err(SurvivalError::TimeBeyondHorizon {
                time: r.time,
                horizon,
            });
        }
        exits[r.time] += 1;
        if r.event {
            deaths[r.time] += 1;
        }
    }
    let mut survival = vec![1.0; horizon + 1];
    let mut at_risk = vec![0usize; horizon + 1];
    let mut remaining = cohort.len() - exits[0];
    for t in 1..=horizon {
        at_risk[t] = remaining;
        survival[t] = if remaining > 0 {
            survival[t - 1] * (1.0 - deaths[t] as f64 / remaining as f64)
        } else {
            survival[t - 1]
        };
        remaining -= exits[t];
    }
    at_risk[0] = cohort.len();
    Ok(PopulationEstimate {
        survival,
        at_risk,
        events: deaths,
    })
}

/// Per-instance survival curve from an event record.
///
/// Units before the record's time survive with certainty; an observed event
/// zeroes everything from its time on; a censored record continues with the
/// population's conditional survival `S[u] / S[t - 1]`.
pub fn rerepresent(record: &EventRecord, population: &PopulationEstimate) -> Result<SurvivalCurve> {
    let horizon = population.horizon();
    let t = record.time;
    if t > horizon {
        return Err(SurvivalError::TimeBeyondHorizon { time: t, horizon });
    }
    let s = &population.survival;
    let base = if t <= 1 { 1.0 } else { s[t - 1] };
    if !record.event && base == 0.0 {
        return Err(SurvivalError::UndefinedConditional(t));
    }
    let mut y = Vec::with_capacity(horizon);
    let mut prev = 1.0_f64;
    for u in 1..=horizon {
        let value = if u < t {
            1.0
        } else if record.event {
            0.0
        } else {
            (s[u] / base).clamp(0.0, 1.0)
        };
        // ratios of a non-increasing sequence; min() only absorbs rounding
        prev = prev.min(value);
        y.push(prev);
    }
    Ok(SurvivalCurve::new_unchecked(y))
}

/// Elementwise mean of equal-length curves.
pub fn mean_curve(curves: &[SurvivalCurve]) -> Result<SurvivalCurve> {
    let first = curves.first().ok_or(SurvivalError::NoCurves)?;
    let len = first.len();
    let mut sum = vec![0.0; len];
    for c in curves {
        if c.len() != len {
            return Err(SurvivalError::LengthMismatch(len, c.len()));
        }
        for (s, x) in sum.iter_mut().zip(&c.0) {
            *s += x;
        }
    }
    let n = curves.len() as f64;
    let mut prev = 1.0_f64;
    let mean = sum
        .into_iter()
        .map(|s| {
            prev = prev.min((s / n).clamp(0.0, 1.0));
            prev
        })
        .collect();
    Ok(SurvivalCurve::new_unchecked(mean))
}

/// Area between two curves with unit-width rectangles: `sum |a - b|`.
pub fn abc(actual: &SurvivalCurve, predicted: &SurvivalCurve) -> Result<f64> {
    abc_values(actual.values(), predicted.values())
}

/// [`abc`] over raw slices.
pub fn abc_values(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.len() != predicted.len() {
        return Err(SurvivalError::LengthMismatch(actual.len(), predicted.len()));
    }
    Ok(actual.iter().zip(predicted).map(|(a, p)| (a - p).abs()).sum())
}
