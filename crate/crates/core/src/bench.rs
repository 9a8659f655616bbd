//! Trace deviation metrics and repeated-execution timing across modeling
//! depths.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assembly::build_from_document;
use crate::io::load_machine;
use crate::machine::run_machine;
use crate::model::{BehaviorModel, SolverConfig};
use crate::trace::{simulate, Depth, InputScript, Trace};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("the traces share no signal")]
    NoSharedSignals,
    #[error("the traces do not overlap in time")]
    EmptyOverlap,
    #[error("{depth}: {message}")]
    Subject { depth: &'static str, message: String },
    #[error("invalid benchmark: {0}")]
    Invalid(String),
}

/// A labeled time interval `[start, end)`, s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub label: String,
    pub start: f64,
    pub end: f64,
}

impl Phase {
    pub fn new(label: impl Into<String>, start: f64, end: f64) -> Self {
        Phase { label: label.into(), start, end }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalDeviation {
    pub name: String,
    pub max_abs: f64,
    pub mean_abs: f64,
    /// Maximum per phase; `None` when no sample falls inside.
    pub phases: BTreeMap<String, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub samples: usize,
    pub signals: Vec<SignalDeviation>,
}

impl DeviationReport {
    pub fn signal(&self, name: &str) -> Option<&SignalDeviation> {
        self.signals.iter().find(|s| s.name == name)
    }

    pub fn to_table(&self) -> String {
        let mut labels: Vec<&String> = Vec::new();
        for s in &self.signals {
            for l in s.phases.keys() {
                if !labels.contains(&l) {
                    labels.push(l);
                }
            }
        }
        let mut out = format!("{:<14} {:>12} {:>12}", "signal", "max_abs", "mean_abs");
        for l in &labels {
            write!(out, " {:>12}", l).unwrap();
        }
        out.push('\n');
        for s in &self.signals {
            write!(out, "{:<14} {:>12.4} {:>12.4}", s.name, s.max_abs, s.mean_abs).unwrap();
            for l in &labels {
                match s.phases.get(*l).copied().flatten() {
                    Some(v) => write!(out, " {:>12.4}", v).unwrap(),
                    None => write!(out, " {:>12}", "-").unwrap(),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Resample `b` onto `a`'s time grid by linear interpolation and report
/// absolute deviations of every signal present in both.
pub fn compare_traces(a: &Trace, b: &Trace, phases: &[Phase]) -> Result<DeviationReport, BenchError> {
    let shared: Vec<(usize, usize, &String)> = a
        .names
        .iter()
        .enumerate()
        .filter_map(|(i, n)| b.column_index(n).map(|j| (i, j, n)))
        .collect();
    if shared.is_empty() {
        return Err(BenchError::NoSharedSignals);
    }
    let grid: Vec<usize> = (0..a.len())
        .filter(|&k| b.interpolate(0, a.times[k]).is_some())
        .collect();
    if grid.is_empty() {
        return Err(BenchError::EmptyOverlap);
    }
    let mut signals = Vec::with_capacity(shared.len());
    for (i, j, name) in shared {
        let mut max_abs = 0.0f64;
        let mut sum = 0.0;
        let mut per_phase: BTreeMap<String, Option<f64>> =
            phases.iter().map(|p| (p.label.clone(), None)).collect();
        for &k in &grid {
            let t = a.times[k];
            let dev = (a.rows[k][i] - b.interpolate(j, t).expect("inside overlap")).abs();
            max_abs = max_abs.max(dev);
            sum += dev;
            for p in phases.iter().filter(|p| t >= p.start && t < p.end) {
                let slot = per_phase.get_mut(&p.label).expect("phase registered");
                *slot = Some(slot.map_or(dev, |m: f64| m.max(dev)));
            }
        }
        signals.push(SignalDeviation {
            name: name.clone(),
            max_abs,
            mean_abs: sum / grid.len() as f64,
            phases: per_phase,
        });
    }
    Ok(DeviationReport { samples: grid.len(), signals })
}

/// A model in its stored form; construction turns it into something
/// executable.
#[derive(Debug, Clone)]
pub enum Subject {
    Detailed { document: String, solver: SolverConfig },
    Machine(Vec<u8>),
}

impl Subject {
    fn depth(&self) -> Result<Depth, BenchError> {
        match self {
            Subject::Detailed { .. } => Ok(Depth::Mdt4),
            Subject::Machine(bytes) => load_machine(bytes)
                .map(|m| m.level.depth())
                .map_err(|e| BenchError::Invalid(e.to_string())),
        }
    }

    /// Construct and run once; returns (construction s, execution s).
    fn once(&self, script: &InputScript, dt: f64, depth: Depth) -> Result<(f64, f64, Trace), BenchError> {
        let fail = |message: String| BenchError::Subject { depth: depth.as_str(), message };
        let t0 = Instant::now();
        match self {
            Subject::Detailed { document, solver } => {
                let mut model = build_from_document(document, solver.clone()).map_err(|e| fail(e.to_string()))?;
                let t1 = Instant::now();
                let trace = simulate(&mut model, script, dt).map_err(|e| fail(e.to_string()))?;
                let t2 = Instant::now();
                Ok(((t1 - t0).as_secs_f64(), (t2 - t1).as_secs_f64(), trace))
            }
            Subject::Machine(bytes) => {
                let machine = load_machine(bytes).map_err(|e| fail(e.to_string()))?;
                let t1 = Instant::now();
                let trace = run_machine(&machine, script, dt).map_err(|e| fail(e.to_string()))?;
                let t2 = Instant::now();
                Ok(((t1 - t0).as_secs_f64(), (t2 - t1).as_secs_f64(), trace))
            }
        }
    }

    /// Bytes of the stored artifact: the machine document, or the detailed
    /// model's bundle.
    pub fn artifact_bytes(&self) -> Result<usize, BenchError> {
        match self {
            Subject::Detailed { document, solver } => build_from_document(document, solver.clone())
                .map(|m| m.bundle_bytes().len())
                .map_err(|e| BenchError::Subject { depth: "mdt4", message: e.to_string() }),
            Subject::Machine(bytes) => Ok(bytes.len()),
        }
    }

    fn input_width(&self) -> Result<usize, BenchError> {
        match self {
            Subject::Detailed { document, solver } => build_from_document(document, solver.clone())
                .map(|m| m.inputs().len())
                .map_err(|e| BenchError::Subject { depth: "mdt4", message: e.to_string() }),
            Subject::Machine(bytes) => load_machine(bytes)
                .map(|m| m.inputs.len())
                .map_err(|e| BenchError::Invalid(e.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(xs: &[f64]) -> Stats {
        let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = (xs.iter().sum::<f64>() / xs.len() as f64).clamp(min, max);
        Stats { mean, min, max }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelTiming {
    pub depth: Depth,
    /// s, model pre-built
    pub execution: Stats,
    /// s, construction plus execution
    pub with_construction: Stats,
    /// Mean fraction of the combined time spent constructing.
    pub construction_share: f64,
    pub artifact_bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub repetitions: usize,
    pub dt: f64,
    pub duration: f64,
    pub parallel: bool,
    pub levels: Vec<LevelTiming>,
}

impl TimingReport {
    pub fn level(&self, depth: Depth) -> Option<&LevelTiming> {
        self.levels.iter().find(|l| l.depth == depth)
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<6} {:>12} {:>12} {:>12} {:>14} {:>8} {:>10}\n",
            "depth", "exec_mean_s", "exec_min_s", "exec_max_s", "total_mean_s", "constr", "bytes"
        );
        for l in &self.levels {
            writeln!(
                out,
                "{:<6} {:>12.6} {:>12.6} {:>12.6} {:>14.6} {:>7.1}% {:>10}",
                l.depth.as_str(),
                l.execution.mean,
                l.execution.min,
                l.execution.max,
                l.with_construction.mean,
                100.0 * l.construction_share,
                l.artifact_bytes
            )
            .unwrap();
        }
        out
    }
}

/// Time each subject `repetitions` times under the script: once from its
/// stored form (construction plus run) with the run also timed alone.
pub fn run_benchmark(
    subjects: &[Subject],
    script: &InputScript,
    dt: f64,
    repetitions: usize,
    parallel: bool,
) -> Result<TimingReport, BenchError> {
    if repetitions == 0 {
        return Err(BenchError::Invalid("repetitions must be at least 1".into()));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(BenchError::Invalid(format!("dt must be positive, got {dt}")));
    }
    let mut levels = Vec::with_capacity(subjects.len());
    for subject in subjects {
        let depth = subject.depth()?;
        let width = subject.input_width()?;
        script.validate(width).map_err(|e| BenchError::Subject {
            depth: depth.as_str(),
            message: e.to_string(),
        })?;
        let runs: Vec<(f64, f64)> = if parallel {
            (0..repetitions)
                .into_par_iter()
                .map(|_| subject.once(script, dt, depth).map(|(c, e, _)| (c, e)))
                .collect::<Result<_, _>>()?
        } else {
            (0..repetitions)
                .map(|_| subject.once(script, dt, depth).map(|(c, e, _)| (c, e)))
                .collect::<Result<_, _>>()?
        };
        let exec: Vec<f64> = runs.iter().map(|r| r.1).collect();
        let total: Vec<f64> = runs.iter().map(|r| r.0 + r.1).collect();
        let share = runs.iter().map(|r| r.0 / (r.0 + r.1)).sum::<f64>() / runs.len() as f64;
        levels.push(LevelTiming {
            depth,
            execution: Stats::of(&exec),
            with_construction: Stats::of(&total),
            construction_share: share,
            artifact_bytes: subject.artifact_bytes()?,
        });
    }
    Ok(TimingReport {
        repetitions,
        dt,
        duration: script.duration,
        parallel,
        levels,
    })
}

/// Run every subject once and return its trace.
pub fn traces(subjects: &[Subject], script: &InputScript, dt: f64) -> Result<Vec<Trace>, BenchError> {
    subjects
        .iter()
        .map(|s| {
            let depth = s.depth()?;
            s.once(script, dt, depth).map(|(_, _, t)| t)
        })
        .collect()
}
