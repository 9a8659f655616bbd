//! Time-indexed signal records and timed input schedules.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::BehaviorModel;
use crate::network::ModelError;

/// Modeling depth of whatever produced a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Depth {
    Mdt1,
    Mdt2,
    Mdt3,
    Mdt4,
}

impl Depth {
    pub fn as_str(self) -> &'static str {
        match self {
            Depth::Mdt1 => "mdt1",
            Depth::Mdt2 => "mdt2",
            Depth::Mdt3 => "mdt3",
            Depth::Mdt4 => "mdt4",
        }
    }

    pub fn parse(s: &str) -> Option<Depth> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mdt1" | "1" => Some(Depth::Mdt1),
            "mdt2" | "2" => Some(Depth::Mdt2),
            "mdt3" | "3" => Some(Depth::Mdt3),
            "mdt4" | "4" => Some(Depth::Mdt4),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TraceError {
    #[error("row {row}: time {time} does not increase")]
    NonMonotone { row: usize, time: f64 },
    #[error("row {row}: expected {expected} values, got {got}")]
    Ragged { row: usize, expected: usize, got: usize },
    #[error("invalid script: {0}")]
    Script(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub source: Option<Depth>,
    pub warnings: Vec<String>,
}

/// Sampled signals; row `k` holds the values of `names` at `times[k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub sample_period: f64,
    pub names: Vec<String>,
    pub times: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub meta: TraceMeta,
}

impl Trace {
    pub fn new(sample_period: f64, names: Vec<String>) -> Self {
        Trace {
            sample_period,
            names,
            times: Vec::new(),
            rows: Vec::new(),
            meta: TraceMeta::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, time: f64, row: Vec<f64>) -> Result<(), TraceError> {
        let index = self.times.len();
        if row.len() != self.names.len() {
            return Err(TraceError::Ragged {
                row: index,
                expected: self.names.len(),
                got: row.len(),
            });
        }
        if let Some(&last) = self.times.last() {
            if !(time > last) {
                return Err(TraceError::NonMonotone { row: index, time });
            }
        }
        self.times.push(time);
        self.rows.push(row);
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Linear interpolation of column `j` at `t`; `None` outside the record.
    pub fn interpolate(&self, j: usize, t: f64) -> Option<f64> {
        let first = *self.times.first()?;
        let last = *self.times.last()?;
        if t < first || t > last {
            return None;
        }
        let i = self.times.partition_point(|&x| x <= t);
        if i == 0 {
            return Some(self.rows[0][j]);
        }
        let lo = i - 1;
        if lo + 1 >= self.times.len() || self.times[lo] == t {
            return Some(self.rows[lo][j]);
        }
        let (t0, t1) = (self.times[lo], self.times[lo + 1]);
        let (y0, y1) = (self.rows[lo][j], self.rows[lo + 1][j]);
        Some(y0 + (y1 - y0) * (t - t0) / (t1 - t0))
    }

    /// Check the structural invariants after construction by other means
    /// than [`Trace::push`].
    pub fn validate(&self) -> Result<(), TraceError> {
        for (k, row) in self.rows.iter().enumerate() {
            if row.len() != self.names.len() {
                return Err(TraceError::Ragged {
                    row: k,
                    expected: self.names.len(),
                    got: row.len(),
                });
            }
        }
        for k in 1..self.times.len() {
            if !(self.times[k] > self.times[k - 1]) {
                return Err(TraceError::NonMonotone { row: k, time: self.times[k] });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptStep {
    /// s
    pub time: f64,
    pub values: Vec<f64>,
}

/// Piecewise-constant input schedule: each step holds until the next.
/// Before the first step all inputs are 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputScript {
    pub steps: Vec<ScriptStep>,
    /// s
    pub duration: f64,
}

impl InputScript {
    pub fn new(steps: Vec<(f64, Vec<f64>)>, duration: f64) -> Self {
        InputScript {
            steps: steps
                .into_iter()
                .map(|(time, values)| ScriptStep { time, values })
                .collect(),
            duration,
        }
    }

    pub fn validate(&self, width: usize) -> Result<(), TraceError> {
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(TraceError::Script(format!("duration {} is not a finite non-negative time", self.duration)));
        }
        for (i, s) in self.steps.iter().enumerate() {
            if s.values.len() != width {
                return Err(TraceError::Script(format!(
                    "step {i} has {} values, the model has {width} inputs",
                    s.values.len()
                )));
            }
            if !s.time.is_finite() || s.time < 0.0 {
                return Err(TraceError::Script(format!("step {i} has invalid time {}", s.time)));
            }
            if i > 0 && s.time < self.steps[i - 1].time {
                return Err(TraceError::Script(format!("step {i} starts before step {}", i - 1)));
            }
        }
        Ok(())
    }

    /// Inputs in force at `t`, written into `buf`. Steps starting within a
    /// nanosecond of `t` already count, so grid times `k·dt` hit them.
    pub fn inputs_at(&self, t: f64, width: usize, buf: &mut Vec<f64>) {
        buf.clear();
        match self.steps.partition_point(|s| s.time <= t + 1e-9) {
            0 => buf.resize(width, 0.0),
            i => buf.extend_from_slice(&self.steps[i - 1].values),
        }
    }

    /// Number of `dt` intervals covering the duration.
    pub fn sample_count(&self, dt: f64) -> usize {
        (self.duration / dt - 1e-9).ceil().max(0.0) as usize
    }
}

/// Drive a model with a script from reset and record inputs and outputs
/// every `dt`. Row `k` holds the inputs applied from `t_k` on and the
/// outputs reached at `t_k`.
pub fn simulate<M: BehaviorModel>(
    model: &mut M,
    script: &InputScript,
    dt: f64,
) -> Result<Trace, SimulationError> {
    let n_in = model.inputs().len();
    script.validate(n_in)?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(ModelError::InvalidStep(dt).into());
    }
    let names = model
        .inputs()
        .iter()
        .chain(model.outputs())
        .map(|s| s.name.clone())
        .collect();
    let mut trace = Trace::new(dt, names);
    trace.meta.source = Some(Depth::Mdt4);
    let steps = script.sample_count(dt);
    trace.times.reserve(steps + 1);
    trace.rows.reserve(steps + 1);
    model.reset();
    let mut out = Vec::with_capacity(model.outputs().len());
    let mut u = Vec::with_capacity(n_in);
    for k in 0..=steps {
        let t = k as f64 * dt;
        script.inputs_at(t, n_in, &mut u);
        model.read_outputs(&mut out);
        let mut row = Vec::with_capacity(n_in + out.len());
        row.extend_from_slice(&u);
        row.extend_from_slice(&out);
        trace.times.push(t);
        trace.rows.push(row);
        if k < steps {
            model.step(&u, dt)?;
        }
    }
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Trace(#[from] TraceError),
}
