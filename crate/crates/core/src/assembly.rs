//! Turning a validated [`SystemGraph`] into an executable [`DetailedModel`].
//!
//! Ports joined by connections collapse into one volume node. Single-volume
//! components (ejector, reservoir, cup, distributor, sensor) contribute to
//! the node of all their ports. A hose of `N` segments contributes `N - 1`
//! interior nodes of `V/N` each, `V/(2N)` to each end node, and `N` series
//! resistances of `R/N`.

use std::collections::HashMap;

use thiserror::Error;

use crate::graph::{parse_graph, validate_graph, Component, ComponentKind, GraphError, SystemGraph, Violation};
use crate::model::{DetailedModel, InputRole, OutputBinding, Quantity, Sensor, Signal, SolverConfig};
use crate::network::{Leak, Link, Network, Node, Rk4};
use crate::pneumatics::{DomainError, EjectorParams, HoseParams, ThresholdConfig};
use crate::units::{SignalKind, ATMOSPHERE_PA};

/// Internal volume of an ejector when the graph does not give one, m³.
pub const DEFAULT_EJECTOR_VOLUME: f64 = 5e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssemblyError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("graph is invalid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("component `{component}`: {source}")]
    Parameter {
        component: String,
        #[source]
        source: DomainError,
    },
    #[error("node `{0}` has no volume; attach a volume-carrying component")]
    ZeroVolume(String),
}

fn param(c: &Component, name: &str, default: Option<f64>) -> Result<f64, AssemblyError> {
    match c.number(name)? {
        Some(v) => Ok(v),
        None => default.ok_or_else(|| {
            AssemblyError::Graph(GraphError::ParameterType {
                id: c.id.clone(),
                param: name.to_string(),
                expected: "present",
            })
        }),
    }
}

fn check(c: &Component, r: Result<(), DomainError>) -> Result<(), AssemblyError> {
    r.map_err(|source| AssemblyError::Parameter { component: c.id.clone(), source })
}

fn volume_param(c: &Component, name: &'static str, default: Option<f64>, allow_zero: bool) -> Result<f64, AssemblyError> {
    let v = param(c, name, default)?;
    let ok = v.is_finite() && (v > 0.0 || (allow_zero && v == 0.0));
    if !ok {
        return Err(AssemblyError::Parameter {
            component: c.id.clone(),
            source: DomainError::NonPositive { name, value: v },
        });
    }
    Ok(v)
}

pub fn ejector_params(c: &Component) -> Result<EjectorParams, AssemblyError> {
    let s_max = param(c, "s_max", None)?;
    let p = EjectorParams {
        s_max,
        pv_max: param(c, "pv_max", None)?,
        blow_flow: param(c, "blow_flow", Some(s_max))?,
        blow_overpressure: param(c, "blow_overpressure", Some(EjectorParams::DEFAULT_BLOW_OVERPRESSURE))?,
        has_check_valve: c.flag("has_check_valve")?.unwrap_or(true),
    };
    check(c, p.validate())?;
    Ok(p)
}

pub fn hose_params(c: &Component) -> Result<HoseParams, AssemblyError> {
    let segments = param(c, "segments", Some(HoseParams::DEFAULT_SEGMENTS as f64))?;
    if !(segments >= 1.0 && segments.fract() == 0.0 && segments <= 10_000.0) {
        return Err(AssemblyError::Parameter {
            component: c.id.clone(),
            source: DomainError::OutOfRange {
                name: "segments",
                value: segments,
                range: "positive integer",
            },
        });
    }
    let h = HoseParams {
        length: param(c, "length", None)?,
        inner_diameter: param(c, "inner_diameter", None)?,
        segments: segments as usize,
        viscosity: param(c, "viscosity", Some(HoseParams::AIR_VISCOSITY))?,
    };
    check(c, h.validate())?;
    Ok(h)
}

pub fn threshold_params(c: &Component) -> Result<ThresholdConfig, AssemblyError> {
    let d = ThresholdConfig::default();
    let t = ThresholdConfig {
        h2: param(c, "h2", Some(d.h2))?,
        h3: param(c, "h3", Some(d.h3))?,
        h4: param(c, "h4", Some(d.h4))?,
        h5: param(c, "h5", Some(d.h5))?,
    };
    check(c, t.validate())?;
    Ok(t)
}

/// Volume a component contributes to the system, m³.
pub fn component_volume(c: &Component) -> Result<f64, AssemblyError> {
    Ok(match c.kind {
        ComponentKind::Ejector => volume_param(c, "volume", Some(DEFAULT_EJECTOR_VOLUME), false)?,
        ComponentKind::Hose => hose_params(c)?.volume(),
        ComponentKind::Reservoir | ComponentKind::SuctionCup => volume_param(c, "volume", None, false)?,
        ComponentKind::Distributor => volume_param(c, "volume", Some(0.0), true)?,
        ComponentKind::Sensor => 0.0,
    })
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Keep the older key as root so node order follows the document.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

fn port_key(kind: ComponentKind, component: &str, port: &str) -> String {
    if kind == ComponentKind::Hose {
        format!("{component}.{port}")
    } else {
        component.to_string()
    }
}

/// Build an executable model with the default solver settings.
pub fn assemble(g: &SystemGraph) -> Result<DetailedModel, AssemblyError> {
    assemble_with(g, SolverConfig::default())
}

/// Parse, validate and assemble a graph document in one go.
pub fn build_from_document(document: &str, solver: SolverConfig) -> Result<DetailedModel, AssemblyError> {
    let g = parse_graph(document)?;
    assemble_with(&g, solver)
}

pub fn assemble_with(g: &SystemGraph, solver: SolverConfig) -> Result<DetailedModel, AssemblyError> {
    let violations = validate_graph(g);
    if !violations.is_empty() {
        return Err(AssemblyError::Invalid(violations));
    }
    if !(solver.max_step.is_finite() && solver.max_step > 0.0) {
        return Err(AssemblyError::Parameter {
            component: "solver".into(),
            source: DomainError::NonPositive { name: "max_step", value: solver.max_step },
        });
    }
    let kinds: HashMap<&str, ComponentKind> = g.components.iter().map(|c| (c.id.as_str(), c.kind)).collect();

    // Port keys in document order.
    let mut keys: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut key_of = |k: String, keys: &mut Vec<String>| -> usize {
        *index.entry(k.clone()).or_insert_with(|| {
            keys.push(k);
            keys.len() - 1
        })
    };
    for c in &g.components {
        if c.kind == ComponentKind::Hose {
            key_of(format!("{}.a", c.id), &mut keys);
            key_of(format!("{}.b", c.id), &mut keys);
        } else {
            key_of(c.id.clone(), &mut keys);
        }
    }
    let mut uf = UnionFind { parent: (0..keys.len()).collect() };
    for conn in &g.connections {
        let a = key_of(port_key(kinds[conn.from.component.as_str()], &conn.from.component, &conn.from.port), &mut keys);
        let b = key_of(port_key(kinds[conn.to.component.as_str()], &conn.to.component, &conn.to.port), &mut keys);
        uf.union(a, b);
    }

    let mut node_of_root: HashMap<usize, usize> = HashMap::new();
    let mut nodes: Vec<Node> = Vec::new();
    let mut node_for = |key: usize, uf: &mut UnionFind, nodes: &mut Vec<Node>| -> usize {
        let root = uf.find(key);
        *node_of_root.entry(root).or_insert_with(|| {
            nodes.push(Node { label: keys[root].clone(), volume: 0.0 });
            nodes.len() - 1
        })
    };

    let mut links = Vec::new();
    let mut leaks = Vec::new();
    let mut ejector = None;
    let mut sensors = Vec::new();
    let mut sensor_index: HashMap<&str, usize> = HashMap::new();

    for c in &g.components {
        match c.kind {
            ComponentKind::Hose => {
                let h = hose_params(c)?;
                let a = node_for(index[&format!("{}.a", c.id)], &mut uf, &mut nodes);
                let b = node_for(index[&format!("{}.b", c.id)], &mut uf, &mut nodes);
                let n = h.segments;
                let seg_volume = h.volume() / n as f64;
                let seg_resistance = h.resistance().map_err(|source| AssemblyError::Parameter {
                    component: c.id.clone(),
                    source,
                })? / n as f64;
                nodes[a].volume += seg_volume / 2.0;
                nodes[b].volume += seg_volume / 2.0;
                let mut prev = a;
                for k in 1..n {
                    nodes.push(Node { label: format!("{}#{k}", c.id), volume: seg_volume });
                    let cur = nodes.len() - 1;
                    links.push(Link { a: prev, b: cur, resistance: seg_resistance });
                    prev = cur;
                }
                links.push(Link { a: prev, b, resistance: seg_resistance });
            }
            kind => {
                let node = node_for(index[&c.id], &mut uf, &mut nodes);
                nodes[node].volume += component_volume(c)?;
                match kind {
                    ComponentKind::Ejector => {
                        ejector = Some((node, ejector_params(c)?));
                        sensor_index.insert(c.id.as_str(), sensors.len());
                        sensors.push(Sensor { id: c.id.clone(), node, thresholds: threshold_params(c)? });
                    }
                    ComponentKind::SuctionCup => {
                        let leak = param(c, "leak", Some(0.0))?;
                        if !(leak.is_finite() && leak >= 0.0) {
                            return Err(AssemblyError::Parameter {
                                component: c.id.clone(),
                                source: DomainError::OutOfRange { name: "leak", value: leak, range: "[0, inf) m3/s" },
                            });
                        }
                        if leak > 0.0 {
                            leaks.push(Leak { node, coefficient: leak });
                        }
                    }
                    ComponentKind::Sensor => {
                        sensor_index.insert(c.id.as_str(), sensors.len());
                        sensors.push(Sensor { id: c.id.clone(), node, thresholds: threshold_params(c)? });
                    }
                    _ => {}
                }
            }
        }
    }

    if let Some(n) = nodes.iter().find(|n| n.volume <= 0.0) {
        return Err(AssemblyError::ZeroVolume(n.label.clone()));
    }
    let (ejector_node, ejector) = ejector.expect("validated graph has an ejector");
    let network = Network { nodes, links, leaks, ejector_node, ejector };

    let mut inputs = Vec::new();
    let mut input_roles = Vec::new();
    for b in &g.io.inputs {
        inputs.push(Signal::new(b.name.clone(), SignalKind::Discrete));
        input_roles.push(if b.port.port == "suction" { InputRole::Suction } else { InputRole::BlowOff });
    }
    let mut outputs = Vec::new();
    let mut output_bindings = Vec::new();
    for b in &g.io.outputs {
        let quantity = match b.port.port.as_str() {
            "vacuum" => Quantity::Vacuum,
            "h2" => Quantity::H2,
            _ => Quantity::PdiByte,
        };
        outputs.push(Signal::new(b.name.clone(), quantity.kind()));
        output_bindings.push(OutputBinding { sensor: sensor_index[b.port.component.as_str()], quantity });
    }

    let internal_step = solver.max_step.min(network.stable_step());
    let n = network.nodes.len();
    Ok(DetailedModel {
        graph: g.clone(),
        network,
        sensors,
        input_roles,
        output_bindings,
        inputs,
        outputs,
        solver,
        internal_step,
        pressures: vec![ATMOSPHERE_PA; n],
        time: 0.0,
        rk: Rk4::new(n),
    })
}
