//! Executable state machines synthesized from a discovery.
//!
//! MDT1 machines jump straight to the target state when a guard holds.
//! MDT2 and MDT3 machines pass through one intermediate state per
//! transition: MDT2 switches each output to its target value once that
//! output's settle time has elapsed, MDT3 replays the recorded samples
//! with linear interpolation. Inputs are only looked at in plain states.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::explorer::{guard_eq, trajectory_len, DiscoveryResult};
use crate::model::Signal;
use crate::trace::{Depth, InputScript, Trace, TraceError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MdtLevel {
    Mdt1,
    Mdt2,
    Mdt3,
}

impl MdtLevel {
    pub const ALL: [MdtLevel; 3] = [MdtLevel::Mdt1, MdtLevel::Mdt2, MdtLevel::Mdt3];

    pub fn depth(self) -> Depth {
        match self {
            MdtLevel::Mdt1 => Depth::Mdt1,
            MdtLevel::Mdt2 => Depth::Mdt2,
            MdtLevel::Mdt3 => Depth::Mdt3,
        }
    }

    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    pub fn from_number(n: u8) -> Option<MdtLevel> {
        match n {
            1 => Some(MdtLevel::Mdt1),
            2 => Some(MdtLevel::Mdt2),
            3 => Some(MdtLevel::Mdt3),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        self.depth().as_str()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineState {
    pub id: u32,
    pub outputs: Vec<f64>,
}

/// Sampled output trajectories of one intermediate state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectories {
    /// s
    pub cycle: f64,
    /// Per output; sample `m` belongs to `(m + 1)·cycle` after entry.
    pub samples: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intermediate {
    pub delays_ms: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<Trajectories>,
}

impl Intermediate {
    pub fn duration_ms(&self) -> f64 {
        self.delays_ms.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineTransition {
    pub source: u32,
    pub guard: Vec<f64>,
    pub target: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intermediate: Option<Intermediate>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source_model: String,
    pub config: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbstractMachine {
    pub level: MdtLevel,
    pub inputs: Vec<Signal>,
    pub outputs: Vec<Signal>,
    /// Value set per input; inputs with one value are ignored by guards.
    pub alphabet: Vec<Vec<f64>>,
    pub initial_state: u32,
    /// The combination that leads from reset into the initial state.
    pub initial_guard: Vec<f64>,
    pub states: Vec<MachineState>,
    pub transitions: Vec<MachineTransition>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MachineError {
    #[error("cannot synthesize from an inconsistent discovery: {0}")]
    InvalidDiscovery(String),
    #[error("inputs {inputs:?} at t = {time} s are outside the discovered alphabet")]
    UnknownInput { time: f64, inputs: Vec<f64> },
    #[error("expected {expected} input values, got {got}")]
    InputArity { expected: usize, got: usize },
    #[error("step size must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error(transparent)]
    Trace(#[from] TraceError),
}

impl AbstractMachine {
    pub fn relevant_inputs(&self) -> Vec<bool> {
        self.alphabet.iter().map(|s| s.len() > 1).collect()
    }

    pub fn state_index(&self, id: u32) -> Option<usize> {
        self.states.iter().position(|s| s.id == id)
    }

    pub fn intermediate_count(&self) -> usize {
        self.transitions.iter().filter(|t| t.intermediate.is_some()).count()
    }

    /// Whether every relevant input value lies in its value set.
    pub fn in_alphabet(&self, inputs: &[f64]) -> bool {
        inputs.len() == self.alphabet.len()
            && inputs
                .iter()
                .zip(&self.alphabet)
                .all(|(v, set)| set.len() <= 1 || set.contains(v))
    }

    /// Check internal references; used after loading.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let n_in = self.inputs.len();
        let n_out = self.outputs.len();
        if self.alphabet.len() != n_in || self.initial_guard.len() != n_in {
            v.push("input alphabet does not match the input signature".into());
        }
        if self.state_index(self.initial_state).is_none() {
            v.push(format!("initial state {} does not exist", self.initial_state));
        }
        for s in &self.states {
            if s.outputs.len() != n_out {
                v.push(format!("state {} has {} outputs", s.id, s.outputs.len()));
            }
        }
        for (i, t) in self.transitions.iter().enumerate() {
            if self.state_index(t.source).is_none() || self.state_index(t.target).is_none() {
                v.push(format!("transition {i} refers to an unknown state"));
            }
            if t.guard.len() != n_in {
                v.push(format!("transition {i} guard has {} values", t.guard.len()));
            }
            match (&t.intermediate, self.level) {
                (Some(_), MdtLevel::Mdt1) => v.push(format!("transition {i}: MDT1 has no intermediates")),
                (None, MdtLevel::Mdt2 | MdtLevel::Mdt3) => {
                    v.push(format!("transition {i} lacks its intermediate"))
                }
                (Some(im), level) => {
                    if im.delays_ms.len() != n_out {
                        v.push(format!("transition {i}: {} delays", im.delays_ms.len()));
                    }
                    match (&im.trajectories, level) {
                        (Some(tr), MdtLevel::Mdt3) => {
                            if tr.samples.len() != n_out || !(tr.cycle > 0.0) {
                                v.push(format!("transition {i}: malformed trajectories"));
                            } else {
                                for (j, (s, d)) in tr.samples.iter().zip(&im.delays_ms).enumerate() {
                                    if s.len() != trajectory_len(*d, tr.cycle * 1e3) {
                                        v.push(format!("transition {i} output {j}: trajectory length"));
                                    }
                                }
                            }
                        }
                        (None, MdtLevel::Mdt3) => v.push(format!("transition {i} lacks trajectories")),
                        (Some(_), _) => v.push(format!("transition {i}: only MDT3 carries trajectories")),
                        _ => {}
                    }
                }
                (None, MdtLevel::Mdt1) => {}
            }
            let relevant = self.relevant_inputs();
            if self.transitions[..i]
                .iter()
                .any(|o| o.source == t.source && guard_eq(&relevant, &o.guard, &t.guard))
            {
                v.push(format!("state {} has two transitions for {:?}", t.source, t.guard));
            }
        }
        v
    }

    /// Same machine with every delay set to 0 and trajectories dropped.
    pub fn without_timing(&self) -> AbstractMachine {
        let mut m = self.clone();
        for t in &mut m.transitions {
            if let Some(im) = &mut t.intermediate {
                im.delays_ms.iter_mut().for_each(|d| *d = 0.0);
                if let Some(tr) = &mut im.trajectories {
                    tr.samples.iter_mut().for_each(Vec::clear);
                }
            }
        }
        m
    }
}

/// Build a machine of the requested depth from a discovery.
pub fn synthesize(d: &DiscoveryResult, level: MdtLevel) -> Result<AbstractMachine, MachineError> {
    let problems = d.violations();
    if !problems.is_empty() {
        return Err(MachineError::InvalidDiscovery(problems.join("; ")));
    }
    let init = d
        .transitions
        .iter()
        .find(|t| t.start_state == 0)
        .ok_or_else(|| MachineError::InvalidDiscovery("no transition out of reset".into()))?;
    let cycle = d.sample_cycle();
    let transitions = d
        .transitions
        .iter()
        .filter(|t| t.start_state != 0)
        .map(|t| MachineTransition {
            source: t.start_state,
            guard: t.input_values.clone(),
            target: t.target_state,
            intermediate: match level {
                MdtLevel::Mdt1 => None,
                MdtLevel::Mdt2 => Some(Intermediate {
                    delays_ms: t.settle_ms.clone(),
                    trajectories: None,
                }),
                MdtLevel::Mdt3 => Some(Intermediate {
                    delays_ms: t.settle_ms.clone(),
                    trajectories: Some(Trajectories {
                        cycle,
                        samples: t.trajectories.clone(),
                    }),
                }),
            },
        })
        .collect();
    Ok(AbstractMachine {
        level,
        inputs: d.inputs.clone(),
        outputs: d.outputs.clone(),
        alphabet: d.alphabet.clone(),
        initial_state: init.target_state,
        initial_guard: init.input_values.clone(),
        states: d
            .states
            .iter()
            .map(|s| MachineState {
                id: s.number,
                outputs: s.stable_outputs.clone(),
            })
            .collect(),
        transitions,
        provenance: Provenance {
            source_model: d.model_fingerprint.clone(),
            config: d.config.digest(),
            note: d.note.clone(),
        },
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownInputPolicy {
    /// Stay in the current state and record a warning.
    #[default]
    HoldAndWarn,
    Reject,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Warning {
    pub time: f64,
    pub inputs: Vec<f64>,
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "unknown_input t={} inputs={:?}", self.time, self.inputs)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Mode {
    Plain,
    Intermediate {
        transition: usize,
        /// s since entry
        elapsed: f64,
        latched: Vec<f64>,
    },
}

/// Mutable execution state of one machine.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineRuntime {
    state: usize,
    mode: Mode,
    clock: f64,
    outputs: Vec<f64>,
    policy: UnknownInputPolicy,
    warnings: Vec<Warning>,
    last_unknown: Option<Vec<f64>>,
    relevant: Vec<bool>,
    /// Transition indices leaving each state.
    outgoing: Vec<Vec<usize>>,
    targets: Vec<usize>,
}

impl MachineRuntime {
    pub fn new(m: &AbstractMachine) -> Self {
        Self::with_policy(m, UnknownInputPolicy::default())
    }

    pub fn with_policy(m: &AbstractMachine, policy: UnknownInputPolicy) -> Self {
        let mut outgoing = vec![Vec::new(); m.states.len()];
        let mut targets = Vec::with_capacity(m.transitions.len());
        for (i, t) in m.transitions.iter().enumerate() {
            let src = m.state_index(t.source).expect("validated machine");
            outgoing[src].push(i);
            targets.push(m.state_index(t.target).expect("validated machine"));
        }
        let state = m.state_index(m.initial_state).expect("validated machine");
        MachineRuntime {
            state,
            mode: Mode::Plain,
            clock: 0.0,
            outputs: m.states[state].outputs.clone(),
            policy,
            warnings: Vec::new(),
            last_unknown: None,
            relevant: m.relevant_inputs(),
            outgoing,
            targets,
        }
    }

    pub fn reset(&mut self, m: &AbstractMachine) {
        let policy = self.policy;
        *self = Self::with_policy(m, policy);
    }

    /// Id of the last plain state reached.
    pub fn state_id(&self, m: &AbstractMachine) -> u32 {
        m.states[self.state].id
    }

    pub fn in_intermediate(&self) -> bool {
        matches!(self.mode, Mode::Intermediate { .. })
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn warnings(&self) -> &[Warning] {
        &self.warnings
    }

    /// Put the runtime into a plain state, e.g. to replay one transition.
    pub fn force_state(&mut self, m: &AbstractMachine, id: u32) {
        let i = m.state_index(id).expect("state exists");
        self.state = i;
        self.mode = Mode::Plain;
        self.outputs.clone_from(&m.states[i].outputs);
    }

    /// Advance by `dt` with `inputs`; the outputs afterwards are in
    /// [`MachineRuntime::outputs`].
    pub fn step(&mut self, m: &AbstractMachine, inputs: &[f64], dt: f64) -> Result<(), MachineError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(MachineError::InvalidStep(dt));
        }
        if inputs.len() != m.inputs.len() {
            return Err(MachineError::InputArity {
                expected: m.inputs.len(),
                got: inputs.len(),
            });
        }
        if matches!(self.mode, Mode::Plain) {
            if !m.in_alphabet(inputs) {
                match self.policy {
                    UnknownInputPolicy::Reject => {
                        return Err(MachineError::UnknownInput {
                            time: self.clock,
                            inputs: inputs.to_vec(),
                        })
                    }
                    UnknownInputPolicy::HoldAndWarn => {
                        if self.last_unknown.as_deref() != Some(inputs) {
                            self.warnings.push(Warning {
                                time: self.clock,
                                inputs: inputs.to_vec(),
                            });
                            self.last_unknown = Some(inputs.to_vec());
                        }
                    }
                }
            } else {
                self.last_unknown = None;
                let hit = self.outgoing[self.state]
                    .iter()
                    .copied()
                    .find(|&i| guard_eq(&self.relevant, &m.transitions[i].guard, inputs));
                if let Some(i) = hit {
                    match m.transitions[i].intermediate {
                        None => self.enter(m, self.targets[i]),
                        Some(_) => {
                            self.mode = Mode::Intermediate {
                                transition: i,
                                elapsed: 0.0,
                                latched: m.states[self.state].outputs.clone(),
                            }
                        }
                    }
                }
            }
        }
        self.clock += dt;
        if matches!(self.mode, Mode::Plain) {
            // Arrival from an MDT3 intermediate leaves its last sample in
            // place for one step; afterwards the state's action holds.
            self.outputs.clone_from(&m.states[self.state].outputs);
        }
        if let Mode::Intermediate { transition, elapsed, latched } = &mut self.mode {
            *elapsed += dt;
            let t = &m.transitions[*transition];
            let im = t.intermediate.as_ref().expect("intermediate transition");
            let target = &m.states[self.targets[*transition]].outputs;
            let e_ms = *elapsed * 1e3;
            for j in 0..self.outputs.len() {
                self.outputs[j] = intermediate_output(im, j, e_ms, latched[j], target[j]);
            }
            if reached(e_ms, im.duration_ms()) {
                let next = self.targets[*transition];
                self.state = next;
                self.mode = Mode::Plain;
            }
        }
        Ok(())
    }

    fn enter(&mut self, m: &AbstractMachine, state: usize) {
        self.state = state;
        self.mode = Mode::Plain;
        self.outputs.clone_from(&m.states[state].outputs);
    }
}

/// `elapsed_ms ≥ delay_ms`, forgiving accumulated rounding of `k·dt`.
fn reached(elapsed_ms: f64, delay_ms: f64) -> bool {
    elapsed_ms >= delay_ms - 1e-6 * delay_ms.max(1.0)
}

/// `elapsed_ms > delay_ms` under the same forgiveness.
fn beyond(elapsed_ms: f64, delay_ms: f64) -> bool {
    elapsed_ms > delay_ms + 1e-6 * delay_ms.max(1.0)
}

fn intermediate_output(im: &Intermediate, j: usize, e_ms: f64, latched: f64, target: f64) -> f64 {
    let d = im.delays_ms[j];
    match &im.trajectories {
        None => {
            if reached(e_ms, d) {
                target
            } else {
                latched
            }
        }
        Some(tr) => {
            let samples = &tr.samples[j];
            if samples.is_empty() || beyond(e_ms, d) {
                return target;
            }
            let x = e_ms / (tr.cycle * 1e3);
            let r = x.round();
            if (x - r).abs() <= 1e-6 {
                let m = r as usize;
                return match m {
                    0 => latched,
                    _ => samples[(m - 1).min(samples.len() - 1)],
                };
            }
            let lo = x.floor() as usize;
            if lo >= samples.len() {
                return *samples.last().expect("non-empty");
            }
            let y0 = if lo == 0 { latched } else { samples[lo - 1] };
            let y1 = samples[lo];
            y0 + (y1 - y0) * (x - lo as f64)
        }
    }
}

/// Functional form of [`MachineRuntime::step`]; returns the new outputs.
pub fn machine_step<'a>(
    rt: &'a mut MachineRuntime,
    m: &AbstractMachine,
    inputs: &[f64],
    dt: f64,
) -> Result<&'a [f64], MachineError> {
    rt.step(m, inputs, dt)?;
    Ok(rt.outputs())
}

/// Run a machine under a script from its initial state. Columns are the
/// inputs, the outputs and `state`, the last plain state reached.
pub fn run_machine(m: &AbstractMachine, script: &InputScript, dt: f64) -> Result<Trace, MachineError> {
    run_machine_with(m, script, dt, UnknownInputPolicy::default())
}

pub fn run_machine_with(
    m: &AbstractMachine,
    script: &InputScript,
    dt: f64,
    policy: UnknownInputPolicy,
) -> Result<Trace, MachineError> {
    let n_in = m.inputs.len();
    script.validate(n_in)?;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(MachineError::InvalidStep(dt));
    }
    let names = m
        .inputs
        .iter()
        .chain(&m.outputs)
        .map(|s| s.name.clone())
        .chain(std::iter::once(STATE_COLUMN.to_string()))
        .collect();
    let mut trace = Trace::new(dt, names);
    trace.meta.source = Some(m.level.depth());
    let steps = script.sample_count(dt);
    trace.times.reserve(steps + 1);
    trace.rows.reserve(steps + 1);
    let mut rt = MachineRuntime::with_policy(m, policy);
    let mut u = Vec::with_capacity(n_in);
    for k in 0..=steps {
        let t = k as f64 * dt;
        script.inputs_at(t, n_in, &mut u);
        let mut row = Vec::with_capacity(n_in + m.outputs.len() + 1);
        row.extend_from_slice(&u);
        row.extend_from_slice(rt.outputs());
        row.push(rt.state_id(m) as f64);
        trace.times.push(t);
        trace.rows.push(row);
        if k < steps {
            rt.step(m, &u, dt)?;
        }
    }
    trace.meta.warnings = rt.warnings().iter().map(ToString::to_string).collect();
    Ok(trace)
}

/// Name of the state column in machine traces.
pub const STATE_COLUMN: &str = "state";

/// Distinct consecutive values of the state column.
pub fn state_sequence(trace: &Trace) -> Vec<u32> {
    let Some(j) = trace.column_index(STATE_COLUMN) else {
        return Vec::new();
    };
    let mut seq: Vec<u32> = Vec::new();
    for row in &trace.rows {
        let s = row[j] as u32;
        if seq.last() != Some(&s) {
            seq.push(s);
        }
    }
    seq
}
