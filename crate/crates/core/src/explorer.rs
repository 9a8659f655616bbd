//! Black-box discovery of stable states and the transitions between them.
//!
//! The model is driven from reset: every discovered state remembers the
//! input sequence that reaches it, each combination held for the settle
//! time. States are processed first-in first-out and every input
//! combination is tried on each of them. A combination that moves the
//! outputs to a new stable vector yields a transition; one that leaves
//! them in place yields nothing.

use std::collections::{BTreeMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::model::{hex, BehaviorModel, Signal};
use crate::network::ModelError;
use crate::trace::{Depth, Trace};
use crate::units::{values_match, SignalKind, SignalValue};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplorationConfig {
    /// Values to try per input name. An input given a single value is held
    /// at it and left out of the abstraction.
    pub values: BTreeMap<String, Vec<f64>>,
    /// s
    pub settle_time: f64,
    /// s
    pub sample_cycle: f64,
    /// s
    pub stability_window: f64,
    /// Absolute tolerance for continuous outputs.
    pub continuous_tolerance: f64,
    /// Per-output overrides of `continuous_tolerance`.
    pub output_tolerances: BTreeMap<String, f64>,
    pub max_states: usize,
    pub parallel: bool,
    pub use_snapshots: bool,
}

impl Default for ExplorationConfig {
    fn default() -> Self {
        ExplorationConfig {
            values: BTreeMap::new(),
            settle_time: 3.0,
            sample_cycle: 1e-3,
            stability_window: 0.5,
            continuous_tolerance: 1.0,
            output_tolerances: BTreeMap::new(),
            max_states: 256,
            parallel: false,
            use_snapshots: true,
        }
    }
}

impl ExplorationConfig {
    /// Default timing with the same value set for every listed input.
    pub fn binary(inputs: &[&str], values: &[f64]) -> Self {
        ExplorationConfig {
            values: inputs
                .iter()
                .map(|n| (n.to_string(), values.to_vec()))
                .collect(),
            ..Default::default()
        }
    }

    /// Digest of the canonical JSON form.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex(&Sha256::digest(bytes))
    }

    /// Check the configuration against a model signature and derive the
    /// sampled plan.
    pub fn plan(&self, inputs: &[Signal], outputs: &[Signal]) -> Result<Plan, ExploreError> {
        let bad = |msg: String| Err(ExploreError::Config(msg));
        let finite_pos = |x: f64| x.is_finite() && x > 0.0;
        if !finite_pos(self.sample_cycle) {
            return bad(format!("sample_cycle must be positive, got {}", self.sample_cycle));
        }
        if !finite_pos(self.stability_window) {
            return bad(format!("stability_window must be positive, got {}", self.stability_window));
        }
        if !(self.settle_time.is_finite() && self.settle_time > self.stability_window) {
            return bad(format!(
                "settle_time ({}) must exceed stability_window ({})",
                self.settle_time, self.stability_window
            ));
        }
        if self.max_states == 0 {
            return bad("max_states must be at least 1".into());
        }
        if !(self.continuous_tolerance.is_finite() && self.continuous_tolerance >= 0.0) {
            return bad(format!("continuous_tolerance must be non-negative, got {}", self.continuous_tolerance));
        }
        for name in self.values.keys() {
            if !inputs.iter().any(|s| &s.name == name) {
                return bad(format!("value set given for unknown input `{name}`"));
            }
        }
        for name in self.output_tolerances.keys() {
            if !outputs.iter().any(|s| &s.name == name) {
                return bad(format!("tolerance given for unknown output `{name}`"));
            }
        }
        let mut alphabet = Vec::with_capacity(inputs.len());
        for s in inputs {
            let Some(set) = self.values.get(&s.name) else {
                return bad(format!("no value set for input `{}`", s.name));
            };
            if set.is_empty() {
                return bad(format!("value set for `{}` is empty", s.name));
            }
            if set.iter().any(|v| !v.is_finite()) {
                return bad(format!("value set for `{}` contains a non-finite value", s.name));
            }
            let mut set = set.clone();
            set.sort_by(f64::total_cmp);
            set.dedup();
            alphabet.push(set);
        }
        let mut tolerances = Vec::with_capacity(outputs.len());
        for s in outputs {
            let tol = self
                .output_tolerances
                .get(&s.name)
                .copied()
                .unwrap_or(self.continuous_tolerance);
            if !(tol.is_finite() && tol >= 0.0) {
                return bad(format!("tolerance for `{}` must be non-negative", s.name));
            }
            tolerances.push(tol);
        }
        let settle_samples = (self.settle_time / self.sample_cycle).round() as usize;
        let window_samples = (self.stability_window / self.sample_cycle - 1e-9).ceil() as usize;
        if settle_samples == 0 || window_samples > settle_samples {
            return bad("settle_time is too short for the sample cycle".into());
        }
        Ok(Plan {
            combinations: combinations(&alphabet),
            relevant: alphabet.iter().map(|s| s.len() > 1).collect(),
            alphabet,
            kinds: outputs.iter().map(|s| s.kind).collect(),
            tolerances,
            settle_samples,
            window_samples,
            cycle: self.sample_cycle,
        })
    }
}

/// A validated configuration resolved against one model signature.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    /// Sorted, deduplicated value set per input.
    pub alphabet: Vec<Vec<f64>>,
    pub relevant: Vec<bool>,
    /// Every input combination; the first input varies fastest.
    pub combinations: Vec<Vec<f64>>,
    pub kinds: Vec<SignalKind>,
    pub tolerances: Vec<f64>,
    pub settle_samples: usize,
    pub window_samples: usize,
    pub cycle: f64,
}

/// Cartesian product with the first coordinate varying fastest.
pub fn combinations(alphabet: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let total: usize = alphabet.iter().map(Vec::len).product();
    let mut out = Vec::with_capacity(total);
    let mut digits = vec![0usize; alphabet.len()];
    for _ in 0..total {
        out.push(digits.iter().zip(alphabet).map(|(&d, set)| set[d]).collect());
        for (d, set) in digits.iter_mut().zip(alphabet) {
            *d += 1;
            if *d < set.len() {
                break;
            }
            *d = 0;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRecord {
    pub number: u32,
    pub stable_outputs: Vec<f64>,
    pub reach_sequence: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    /// 0 for the transition out of reset.
    pub start_state: u32,
    pub input_values: Vec<f64>,
    pub target_state: u32,
    pub settle_ms: Vec<f64>,
    /// Samples one cycle apart, starting one cycle after the inputs change.
    pub trajectories: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryResult {
    pub inputs: Vec<Signal>,
    pub outputs: Vec<Signal>,
    pub alphabet: Vec<Vec<f64>>,
    pub relevant_inputs: Vec<bool>,
    pub tolerances: Vec<f64>,
    pub config: ExplorationConfig,
    pub model_fingerprint: String,
    pub note: Option<String>,
    pub evaluations: usize,
    pub states: Vec<StateRecord>,
    pub transitions: Vec<TransitionRecord>,
}

impl DiscoveryResult {
    pub fn state(&self, number: u32) -> Option<&StateRecord> {
        number
            .checked_sub(1)
            .and_then(|i| self.states.get(i as usize))
            .filter(|s| s.number == number)
    }

    pub fn stable_values(&self, number: u32) -> Option<Vec<SignalValue>> {
        let s = self.state(number)?;
        Some(
            self.outputs
                .iter()
                .zip(&s.stable_outputs)
                .map(|(sig, &v)| SignalValue::new(sig.kind, v))
                .collect(),
        )
    }

    /// Whether two input vectors agree on every relevant input.
    pub fn same_guard(&self, a: &[f64], b: &[f64]) -> bool {
        guard_eq(&self.relevant_inputs, a, b)
    }

    pub fn transition(&self, start: u32, inputs: &[f64]) -> Option<&TransitionRecord> {
        self.transitions
            .iter()
            .find(|t| t.start_state == start && self.same_guard(&t.input_values, inputs))
    }

    pub fn sample_cycle(&self) -> f64 {
        self.config.sample_cycle
    }

    /// Structural invariants; each violation is described in one line.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let n_out = self.outputs.len();
        let n_in = self.inputs.len();
        if self.relevant_inputs.len() != n_in || self.alphabet.len() != n_in {
            v.push("input alphabet does not match the input signature".into());
        }
        if self.tolerances.len() != n_out {
            v.push("tolerance count does not match the output signature".into());
        }
        for (i, s) in self.states.iter().enumerate() {
            if s.number as usize != i + 1 {
                v.push(format!("state at position {} is numbered {}", i + 1, s.number));
            }
            if s.stable_outputs.len() != n_out {
                v.push(format!("state {} has {} outputs", s.number, s.stable_outputs.len()));
            }
        }
        if self.tolerances.len() == n_out {
            for a in 0..self.states.len() {
                for b in a + 1..self.states.len() {
                    if self.outputs_match(&self.states[a].stable_outputs, &self.states[b].stable_outputs) {
                        v.push(format!(
                            "states {} and {} are indistinguishable",
                            self.states[a].number, self.states[b].number
                        ));
                    }
                }
            }
        }
        let known = |n: u32| n >= 1 && n as usize <= self.states.len();
        let cycle_ms = self.sample_cycle() * 1e3;
        for (i, t) in self.transitions.iter().enumerate() {
            if !(t.start_state == 0 || known(t.start_state)) || !known(t.target_state) {
                v.push(format!("transition {i} refers to an unknown state"));
                continue;
            }
            if t.input_values.len() != n_in {
                v.push(format!("transition {i} guard has {} values", t.input_values.len()));
            }
            if t.settle_ms.len() != n_out || t.trajectories.len() != n_out {
                v.push(format!("transition {i} timing does not cover every output"));
                continue;
            }
            for j in 0..n_out {
                let expect = trajectory_len(t.settle_ms[j], cycle_ms);
                if t.trajectories[j].len() != expect {
                    v.push(format!(
                        "transition {i} output {j}: {} samples for {} ms",
                        t.trajectories[j].len(),
                        t.settle_ms[j]
                    ));
                }
            }
            for other in &self.transitions[..i] {
                if other.start_state == t.start_state
                    && self.same_guard(&other.input_values, &t.input_values)
                {
                    v.push(format!(
                        "state {} has two transitions for inputs {:?}",
                        t.start_state, t.input_values
                    ));
                }
            }
        }
        if self.transitions.iter().filter(|t| t.start_state == 0).count() != 1 && !self.states.is_empty() {
            v.push("expected exactly one transition out of reset".into());
        }
        v
    }

    /// Transitions `(s,u)→s′` for which `(s′,u)` is also recorded.
    pub fn absorption_violations(&self) -> Vec<(u32, Vec<f64>)> {
        self.transitions
            .iter()
            .filter(|t| t.start_state != 0)
            .filter(|t| self.transition(t.target_state, &t.input_values).is_some())
            .map(|t| (t.start_state, t.input_values.clone()))
            .collect()
    }

    fn outputs_match(&self, a: &[f64], b: &[f64]) -> bool {
        outputs_match(&self.kind_vec(), &self.tolerances, a, b)
    }

    fn kind_vec(&self) -> Vec<SignalKind> {
        self.outputs.iter().map(|s| s.kind).collect()
    }
}

pub(crate) fn guard_eq(relevant: &[bool], a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && relevant
            .iter()
            .zip(a.iter().zip(b))
            .all(|(&r, (x, y))| !r || x == y)
}

/// Number of samples a trajectory of `settle_ms` holds at `cycle_ms`.
pub fn trajectory_len(settle_ms: f64, cycle_ms: f64) -> usize {
    let x = settle_ms / cycle_ms;
    let r = x.round();
    if (x - r).abs() <= 1e-6 {
        r as usize
    } else {
        x.ceil() as usize
    }
}

fn outputs_match(kinds: &[SignalKind], tol: &[f64], a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && kinds
            .iter()
            .zip(tol)
            .zip(a.iter().zip(b))
            .all(|((&k, &t), (&x, &y))| values_match(k, x, y, t))
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExploreError {
    #[error("invalid exploration config: {0}")]
    Config(String),
    #[error(
        "outputs did not settle after applying {inputs:?} in state {state}; \
         increase settle_time (currently {settle_time} s)"
    )]
    Unstable {
        state: u32,
        inputs: Vec<f64>,
        settle_time: f64,
    },
    #[error("more than {max_states} states discovered")]
    BudgetExceeded {
        max_states: usize,
        partial: Box<DiscoveryResult>,
    },
    #[error("outputs {outputs:?} match states {first} and {second}; tolerance too loose")]
    AmbiguousMatch {
        outputs: Vec<f64>,
        first: u32,
        second: u32,
    },
    #[error("output {output} does not end inside its tolerance band")]
    NotSettled { output: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Outcome of [`detect_stable`].
#[derive(Debug, Clone, PartialEq)]
pub enum Stability {
    Stable(Vec<f64>),
    Unstable,
}

/// Decide whether per-output sample columns have settled over their
/// trailing `window_samples` intervals. Continuous outputs may wander
/// within `tol`; discrete outputs must be constant.
pub fn detect_stable(
    columns: &[Vec<f64>],
    kinds: &[SignalKind],
    tol: &[f64],
    window_samples: usize,
) -> Stability {
    let mut last = Vec::with_capacity(columns.len());
    for ((col, &kind), &tol) in columns.iter().zip(kinds).zip(tol) {
        if col.len() <= window_samples {
            return Stability::Unstable;
        }
        let tail = &col[col.len() - 1 - window_samples..];
        let settled = match kind {
            SignalKind::Discrete => tail.iter().all(|&v| v == tail[0]),
            SignalKind::Continuous => {
                let (lo, hi) = tail
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
                hi - lo <= tol
            }
        };
        if !settled {
            return Stability::Unstable;
        }
        last.push(*col.last().expect("non-empty"));
    }
    Stability::Stable(last)
}

/// First known state whose outputs match; two matches mean the tolerance
/// cannot separate the states.
pub fn match_state(
    outputs: &[f64],
    known: &[StateRecord],
    kinds: &[SignalKind],
    tol: &[f64],
) -> Result<Option<u32>, ExploreError> {
    let mut hits = known
        .iter()
        .filter(|s| outputs_match(kinds, tol, outputs, &s.stable_outputs));
    let Some(first) = hits.next() else {
        return Ok(None);
    };
    if let Some(second) = hits.next() {
        return Err(ExploreError::AmbiguousMatch {
            outputs: outputs.to_vec(),
            first: first.number,
            second: second.number,
        });
    }
    Ok(Some(first.number))
}

/// Index of the first sample from which each column stays within its
/// tolerance band around `final_values`.
pub fn settle_indices(
    columns: &[Vec<f64>],
    final_values: &[f64],
    kinds: &[SignalKind],
    tol: &[f64],
) -> Result<Vec<usize>, ExploreError> {
    let mut out = Vec::with_capacity(columns.len());
    for (j, col) in columns.iter().enumerate() {
        let inside = |v: f64| values_match(kinds[j], v, final_values[j], tol[j]);
        match col.iter().rposition(|&v| !inside(v)) {
            Some(k) if k + 1 == col.len() => return Err(ExploreError::NotSettled { output: j }),
            Some(k) => out.push(k + 1),
            None => out.push(0),
        }
    }
    Ok(out)
}

/// Settle time per output in ms, on the `cycle` grid; sample 0 is the
/// instant the inputs change.
pub fn settle_times(
    columns: &[Vec<f64>],
    final_values: &[f64],
    kinds: &[SignalKind],
    tol: &[f64],
    cycle: f64,
) -> Result<Vec<f64>, ExploreError> {
    Ok(settle_indices(columns, final_values, kinds, tol)?
        .into_iter()
        .map(|k| k as f64 * cycle * 1e3)
        .collect())
}

/// Hold `u` for `steps` cycles. With `record`, per-output columns of
/// `steps + 1` samples are filled, starting at the current instant.
fn hold<M: BehaviorModel>(
    model: &mut M,
    u: &[f64],
    steps: usize,
    cycle: f64,
    mut record: Option<&mut Vec<Vec<f64>>>,
) -> Result<(), ModelError> {
    let mut out = Vec::with_capacity(model.outputs().len());
    if let Some(cols) = record.as_deref_mut() {
        model.read_outputs(&mut out);
        *cols = out.iter().map(|&v| {
            let mut c = Vec::with_capacity(steps + 1);
            c.push(v);
            c
        }).collect();
    }
    for _ in 0..steps {
        model.step(u, cycle)?;
        if let Some(cols) = record.as_deref_mut() {
            model.read_outputs(&mut out);
            for (c, &v) in cols.iter_mut().zip(&out) {
                c.push(v);
            }
        }
    }
    Ok(())
}

fn replay_quiet<M: BehaviorModel>(model: &mut M, sequence: &[Vec<f64>], plan: &Plan) -> Result<(), ModelError> {
    model.reset();
    for u in sequence {
        hold(model, u, plan.settle_samples, plan.cycle, None)?;
    }
    Ok(())
}

/// Reset the model and apply each combination for the settle time,
/// recording inputs and outputs every sample cycle.
pub fn replay<M: BehaviorModel>(
    model: &mut M,
    sequence: &[Vec<f64>],
    cfg: &ExplorationConfig,
) -> Result<Trace, ExploreError> {
    let plan = cfg.plan(model.inputs(), model.outputs())?;
    for u in sequence {
        let known = u.len() == plan.alphabet.len()
            && u.iter().zip(&plan.alphabet).all(|(v, set)| set.contains(v));
        if !known {
            return Err(ExploreError::Config(format!("{u:?} is outside the configured value sets")));
        }
    }
    let names = model
        .inputs()
        .iter()
        .chain(model.outputs())
        .map(|s| s.name.clone())
        .collect();
    let mut trace = Trace::new(plan.cycle, names);
    trace.meta.source = Some(Depth::Mdt4);
    model.reset();
    let mut out = Vec::new();
    let mut k = 0usize;
    let mut push = |model: &M, u: &[f64], k: &mut usize, trace: &mut Trace| {
        model.read_outputs(&mut out);
        trace.times.push(*k as f64 * plan.cycle);
        trace.rows.push(u.iter().chain(&out).copied().collect());
        *k += 1;
    };
    for u in sequence {
        for _ in 0..plan.settle_samples {
            push(model, u, &mut k, &mut trace);
            model.step(u, plan.cycle)?;
        }
    }
    let tail = sequence.last().cloned().unwrap_or_else(|| vec![0.0; plan.alphabet.len()]);
    push(model, &tail, &mut k, &mut trace);
    Ok(trace)
}

struct Evaluation {
    columns: Vec<Vec<f64>>,
    stable: Vec<f64>,
}

fn evaluate<M: BehaviorModel>(start: &M, u: &[f64], plan: &Plan) -> Result<Option<Evaluation>, ModelError> {
    let mut model = start.clone();
    let mut columns = Vec::new();
    hold(&mut model, u, plan.settle_samples, plan.cycle, Some(&mut columns))?;
    Ok(match detect_stable(&columns, &plan.kinds, &plan.tolerances, plan.window_samples) {
        Stability::Stable(stable) => Some(Evaluation { columns, stable }),
        Stability::Unstable => None,
    })
}

struct Explorer<'a, M> {
    base: &'a M,
    plan: Plan,
    cfg: &'a ExplorationConfig,
    result: DiscoveryResult,
}

impl<'a, M: BehaviorModel> Explorer<'a, M> {
    /// Add a state or find the matching one; returns its number and
    /// whether it is new.
    fn commit(&mut self, from: u32, u: &[f64], eval: Evaluation) -> Result<(u32, bool), ExploreError> {
        let plan = &self.plan;
        let found = match_state(&eval.stable, &self.result.states, &plan.kinds, &plan.tolerances)?;
        let (target, new) = match found {
            Some(n) => (n, false),
            None => {
                if self.result.states.len() >= self.cfg.max_states {
                    return Err(ExploreError::BudgetExceeded {
                        max_states: self.cfg.max_states,
                        partial: Box::new(self.result.clone()),
                    });
                }
                let mut reach = match self.result.state(from) {
                    Some(s) => s.reach_sequence.clone(),
                    None => Vec::new(),
                };
                reach.push(u.to_vec());
                let number = self.result.states.len() as u32 + 1;
                self.result.states.push(StateRecord {
                    number,
                    stable_outputs: eval.stable.clone(),
                    reach_sequence: reach,
                });
                (number, true)
            }
        };
        let idx = settle_indices(&eval.columns, &eval.stable, &plan.kinds, &plan.tolerances)?;
        let cycle_ms = plan.cycle * 1e3;
        self.result.transitions.push(TransitionRecord {
            start_state: from,
            input_values: u.to_vec(),
            target_state: target,
            settle_ms: idx.iter().map(|&k| k as f64 * cycle_ms).collect(),
            trajectories: eval
                .columns
                .iter()
                .zip(&idx)
                .map(|(c, &k)| c[1..=k].to_vec())
                .collect(),
        });
        Ok((target, new))
    }

    fn start_of(&self, number: u32) -> Result<M, ModelError> {
        let reach = &self.result.state(number).expect("known state").reach_sequence;
        let mut m = self.base.clone();
        replay_quiet(&mut m, reach, &self.plan)?;
        Ok(m)
    }

    fn evaluate_state(&self, number: u32) -> Result<Vec<Option<Evaluation>>, ModelError> {
        let combos = &self.plan.combinations;
        let run = |u: &Vec<f64>, snapshot: Option<&M>| -> Result<Option<Evaluation>, ModelError> {
            match snapshot {
                Some(m) => evaluate(m, u, &self.plan),
                None => evaluate(&self.start_of(number)?, u, &self.plan),
            }
        };
        let snapshot = if self.cfg.use_snapshots {
            Some(self.start_of(number)?)
        } else {
            None
        };
        if self.cfg.parallel {
            combos.par_iter().map(|u| run(u, snapshot.as_ref())).collect()
        } else {
            combos.iter().map(|u| run(u, snapshot.as_ref())).collect()
        }
    }
}

/// Discover the state and transition memories of a black-box model.
pub fn explore<M: BehaviorModel>(model: &M, cfg: &ExplorationConfig) -> Result<DiscoveryResult, ExploreError> {
    let plan = cfg.plan(model.inputs(), model.outputs())?;
    let mut ex = Explorer {
        base: model,
        cfg,
        result: DiscoveryResult {
            inputs: model.inputs().to_vec(),
            outputs: model.outputs().to_vec(),
            alphabet: plan.alphabet.clone(),
            relevant_inputs: plan.relevant.clone(),
            tolerances: plan.tolerances.clone(),
            config: cfg.clone(),
            model_fingerprint: model.fingerprint(),
            note: None,
            evaluations: 0,
            states: Vec::new(),
            transitions: Vec::new(),
        },
        plan,
    };

    let initial = ex.plan.combinations[0].clone();
    let mut reset = model.clone();
    reset.reset();
    let first = evaluate(&reset, &initial, &ex.plan)?.ok_or_else(|| ExploreError::Unstable {
        state: 0,
        inputs: initial.clone(),
        settle_time: cfg.settle_time,
    })?;
    ex.commit(0, &initial, first)?;

    let mut queue = VecDeque::from([1u32]);
    while let Some(s) = queue.pop_front() {
        let evals = ex.evaluate_state(s)?;
        let combos = ex.plan.combinations.clone();
        for (u, eval) in combos.iter().zip(evals) {
            ex.result.evaluations += 1;
            let eval = eval.ok_or_else(|| ExploreError::Unstable {
                state: s,
                inputs: u.clone(),
                settle_time: cfg.settle_time,
            })?;
            let here = &ex.result.state(s).expect("queued state exists").stable_outputs;
            if outputs_match(&ex.plan.kinds, &ex.plan.tolerances, &eval.stable, here) {
                continue;
            }
            let (target, new) = ex.commit(s, u, eval)?;
            if new {
                queue.push_back(target);
            }
        }
    }
    Ok(ex.result)
}
