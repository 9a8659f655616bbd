//! The black-box model interface and the detailed (ODE-based) model.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::graph::SystemGraph;
use crate::network::{integrate, Drive, ModelError, Network, Rk4};
use crate::pneumatics::{threshold_outputs, ThresholdConfig};
use crate::units::{pascal_to_vacuum, SignalKind, SignalValue, ATMOSPHERE_PA};

/// Name and kind of one input or output signal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signal {
    pub name: String,
    pub kind: SignalKind,
}

impl Signal {
    pub fn new(name: impl Into<String>, kind: SignalKind) -> Self {
        Signal { name: name.into(), kind }
    }
}

/// Anything that can be driven with inputs and observed at its outputs.
///
/// The explorer only ever talks to models through this trait. `Clone` is
/// the snapshot capability: a clone taken after replaying a prefix can be
/// resumed instead of replaying it again.
pub trait BehaviorModel: Clone + Send + Sync {
    fn inputs(&self) -> &[Signal];
    fn outputs(&self) -> &[Signal];
    /// Return to the initial condition.
    fn reset(&mut self);
    /// Advance by `dt` seconds with `inputs` held constant.
    fn step(&mut self, inputs: &[f64], dt: f64) -> Result<(), ModelError>;
    /// Current output values, in signature order.
    fn read_outputs(&self, out: &mut Vec<f64>);

    fn output_values(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.outputs().len());
        self.read_outputs(&mut v);
        v
    }

    /// Stable identifier of the model's structure and parameters.
    fn fingerprint(&self) -> String {
        String::new()
    }
}

/// Which ejector signal an external input drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputRole {
    Suction,
    BlowOff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    Vacuum,
    H2,
    PdiByte,
}

impl Quantity {
    pub fn kind(self) -> SignalKind {
        match self {
            Quantity::Vacuum => SignalKind::Continuous,
            Quantity::H2 | Quantity::PdiByte => SignalKind::Discrete,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sensor {
    pub id: String,
    pub node: usize,
    pub thresholds: ThresholdConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputBinding {
    pub sensor: usize,
    pub quantity: Quantity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Upper bound on the internal RK4 step, s.
    pub max_step: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { max_step: 1e-3 }
    }
}

/// Detailed lumped-parameter model assembled from a [`SystemGraph`].
#[derive(Debug, Clone)]
pub struct DetailedModel {
    pub(crate) graph: SystemGraph,
    pub(crate) network: Network,
    pub(crate) sensors: Vec<Sensor>,
    pub(crate) input_roles: Vec<InputRole>,
    pub(crate) output_bindings: Vec<OutputBinding>,
    pub(crate) inputs: Vec<Signal>,
    pub(crate) outputs: Vec<Signal>,
    pub(crate) solver: SolverConfig,
    pub(crate) internal_step: f64,
    pub(crate) pressures: Vec<f64>,
    pub(crate) time: f64,
    pub(crate) rk: Rk4,
}

/// Everything needed to rebuild a detailed model; its size is the
/// "artifact size" of the detailed level.
#[derive(Serialize)]
struct Bundle<'a> {
    graph: &'a str,
    solver: &'a SolverConfig,
    internal_step: f64,
    layout: Vec<(&'a str, f64)>,
}

impl DetailedModel {
    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn graph(&self) -> &SystemGraph {
        &self.graph
    }

    pub fn total_volume(&self) -> f64 {
        self.network.total_volume()
    }

    /// Internal RK4 step actually used, s.
    pub fn internal_step(&self) -> f64 {
        self.internal_step
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Absolute node pressures, Pa.
    pub fn pressures(&self) -> &[f64] {
        &self.pressures
    }

    pub fn set_pressures(&mut self, p: &[f64]) {
        assert_eq!(p.len(), self.pressures.len(), "state length mismatch");
        self.pressures.copy_from_slice(p);
    }

    /// Vacuum at a sensor, mbar,rel.
    pub fn sensor_vacuum(&self, sensor: usize) -> f64 {
        pascal_to_vacuum(self.pressures[self.sensors[sensor].node])
    }

    pub fn sensors(&self) -> &[Sensor] {
        &self.sensors
    }

    fn drive(&self, inputs: &[f64]) -> Drive {
        let mut drive = Drive::IDLE;
        for (role, &v) in self.input_roles.iter().zip(inputs) {
            match role {
                InputRole::Suction => drive.suction = SignalValue::Discrete(v),
                InputRole::BlowOff => drive.blow = SignalValue::Discrete(v),
            }
        }
        drive
    }

    /// Serialized graph, solver settings and state layout.
    pub fn bundle_bytes(&self) -> Vec<u8> {
        let doc = self.graph.to_toml();
        let bundle = Bundle {
            graph: &doc,
            solver: &self.solver,
            internal_step: self.internal_step,
            layout: self
                .network
                .nodes
                .iter()
                .map(|n| (n.label.as_str(), n.volume))
                .collect(),
        };
        serde_json::to_vec(&bundle).expect("bundle serializes")
    }
}

impl BehaviorModel for DetailedModel {
    fn inputs(&self) -> &[Signal] {
        &self.inputs
    }

    fn outputs(&self) -> &[Signal] {
        &self.outputs
    }

    fn reset(&mut self) {
        self.pressures.iter_mut().for_each(|p| *p = ATMOSPHERE_PA);
        self.time = 0.0;
    }

    fn step(&mut self, inputs: &[f64], dt: f64) -> Result<(), ModelError> {
        if inputs.len() != self.inputs.len() {
            return Err(ModelError::InputArity {
                expected: self.inputs.len(),
                got: inputs.len(),
            });
        }
        let drive = self.drive(inputs);
        integrate(
            &self.network,
            &mut self.rk,
            &mut self.pressures,
            drive,
            dt,
            self.internal_step,
            self.time,
        )?;
        self.time += dt;
        Ok(())
    }

    fn read_outputs(&self, out: &mut Vec<f64>) {
        out.clear();
        for b in &self.output_bindings {
            let sensor = &self.sensors[b.sensor];
            let vacuum = pascal_to_vacuum(self.pressures[sensor.node]);
            out.push(match b.quantity {
                Quantity::Vacuum => vacuum,
                Quantity::H2 => threshold_outputs(vacuum, &sensor.thresholds).0,
                Quantity::PdiByte => threshold_outputs(vacuum, &sensor.thresholds).1 as f64,
            });
        }
    }

    fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.bundle_bytes());
        hex(&h.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
