//! Declarative system graphs: components, pneumatic connections and the
//! external I/O bindings, stored as a TOML document.
//!
//! ```toml
//! format_version = 1
//! name = "minimal"
//!
//! [[components]]
//! id = "ejector"
//! kind = "ejector"
//! params = { s_max = 1.2e-3, pv_max = 750 }
//!
//! [[components]]
//! id = "sensor"
//! kind = "sensor"
//!
//! [[connections]]
//! from = "ejector.port"
//! to = "sensor.port"
//!
//! [io]
//! inputs = [{ name = "suction", port = "ejector.suction" }]
//! outputs = [{ name = "vacuum", port = "sensor.vacuum" }]
//! ```
//!
//! The full schema lives in `graphs/README.md`.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const GRAPH_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("component `{id}`: unknown kind `{kind}`")]
    UnknownKind { id: String, kind: String },
    #[error("component `{id}` ({kind}): missing required parameter `{param}`")]
    MissingParameter {
        id: String,
        kind: ComponentKind,
        param: &'static str,
    },
    #[error("component `{id}`: parameter `{param}` must be {expected}")]
    ParameterType {
        id: String,
        param: String,
        expected: &'static str,
    },
    #[error("malformed endpoint `{0}`, expected `component.port`")]
    Endpoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    Ejector,
    Hose,
    Reservoir,
    SuctionCup,
    Distributor,
    Sensor,
}

impl ComponentKind {
    pub const ALL: [ComponentKind; 6] = [
        ComponentKind::Ejector,
        ComponentKind::Hose,
        ComponentKind::Reservoir,
        ComponentKind::SuctionCup,
        ComponentKind::Distributor,
        ComponentKind::Sensor,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ComponentKind::Ejector => "ejector",
            ComponentKind::Hose => "hose",
            ComponentKind::Reservoir => "reservoir",
            ComponentKind::SuctionCup => "suction_cup",
            ComponentKind::Distributor => "distributor",
            ComponentKind::Sensor => "sensor",
        }
    }

    pub fn required_params(self) -> &'static [&'static str] {
        match self {
            ComponentKind::Ejector => &["s_max", "pv_max"],
            ComponentKind::Hose => &["length", "inner_diameter"],
            ComponentKind::Reservoir => &["volume"],
            ComponentKind::SuctionCup => &["volume"],
            ComponentKind::Distributor | ComponentKind::Sensor => &[],
        }
    }

    /// Whether `port` is a pneumatic attachment point of this kind.
    pub fn is_pneumatic_port(self, port: &str) -> bool {
        match self {
            ComponentKind::Ejector => port == "port",
            ComponentKind::Hose => port == "a" || port == "b",
            ComponentKind::Reservoir | ComponentKind::SuctionCup | ComponentKind::Sensor => {
                port == "port"
            }
            // A distributor is a junction; any port name lands on it.
            ComponentKind::Distributor => !port.is_empty(),
        }
    }

    pub fn input_ports(self) -> &'static [&'static str] {
        match self {
            ComponentKind::Ejector => &["suction", "blow_off"],
            _ => &[],
        }
    }

    pub fn output_ports(self) -> &'static [&'static str] {
        match self {
            // Ejectors carry an integrated sensor at their vacuum port.
            ComponentKind::Sensor | ComponentKind::Ejector => &["vacuum", "h2", "pdi_byte"],
            _ => &[],
        }
    }
}

impl fmt::Display for ComponentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ComponentKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        ComponentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub id: String,
    pub kind: ComponentKind,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, ParamValue>,
}

impl Component {
    pub fn number(&self, name: &str) -> Result<Option<f64>, GraphError> {
        match self.params.get(name) {
            None => Ok(None),
            Some(ParamValue::Number(v)) => Ok(Some(*v)),
            Some(_) => Err(GraphError::ParameterType {
                id: self.id.clone(),
                param: name.to_string(),
                expected: "a number",
            }),
        }
    }

    pub fn flag(&self, name: &str) -> Result<Option<bool>, GraphError> {
        match self.params.get(name) {
            None => Ok(None),
            Some(ParamValue::Bool(v)) => Ok(Some(*v)),
            Some(_) => Err(GraphError::ParameterType {
                id: self.id.clone(),
                param: name.to_string(),
                expected: "a boolean",
            }),
        }
    }
}

/// `component.port`
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Endpoint {
    pub component: String,
    pub port: String,
}

impl FromStr for Endpoint {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, GraphError> {
        match s.split_once('.') {
            Some((c, p)) if !c.is_empty() && !p.is_empty() && !p.contains('.') => Ok(Endpoint {
                component: c.to_string(),
                port: p.to_string(),
            }),
            _ => Err(GraphError::Endpoint(s.to_string())),
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.component, self.port)
    }
}

impl Serialize for Endpoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Endpoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Connection {
    pub from: Endpoint,
    pub to: Endpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Binding {
    pub name: String,
    pub port: Endpoint,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IoBindings {
    #[serde(default)]
    pub inputs: Vec<Binding>,
    #[serde(default)]
    pub outputs: Vec<Binding>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemGraph {
    pub format_version: u32,
    #[serde(default)]
    pub name: String,
    pub components: Vec<Component>,
    #[serde(default)]
    pub connections: Vec<Connection>,
    #[serde(default)]
    pub io: IoBindings,
}

// Components are read with a free-form kind first so an unknown kind
// yields a precise error instead of a generic enum mismatch.
#[derive(Deserialize)]
struct RawGraph {
    format_version: u32,
    #[serde(default)]
    name: String,
    #[serde(default)]
    components: Vec<RawComponent>,
    #[serde(default)]
    connections: Vec<Connection>,
    #[serde(default)]
    io: IoBindings,
}

#[derive(Deserialize)]
struct RawComponent {
    id: String,
    kind: String,
    #[serde(default)]
    params: BTreeMap<String, ParamValue>,
}

fn line_col(doc: &str, offset: usize) -> (usize, usize) {
    let before = &doc[..offset.min(doc.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, column)
}

/// Parse a graph document. Structural checks beyond syntax, kinds and
/// required parameters are left to [`validate_graph`].
pub fn parse_graph(document: &str) -> Result<SystemGraph, GraphError> {
    let raw: RawGraph = toml::from_str(document).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_col(document, s.start));
        GraphError::Syntax {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    let mut components = Vec::with_capacity(raw.components.len());
    for c in raw.components {
        let kind: ComponentKind = c.kind.parse().map_err(|_| GraphError::UnknownKind {
            id: c.id.clone(),
            kind: c.kind.clone(),
        })?;
        for &param in kind.required_params() {
            if !c.params.contains_key(param) {
                return Err(GraphError::MissingParameter { id: c.id, kind, param });
            }
        }
        components.push(Component {
            id: c.id,
            kind,
            params: c.params,
        });
    }
    Ok(SystemGraph {
        format_version: raw.format_version,
        name: raw.name,
        components,
        connections: raw.connections,
        io: raw.io,
    })
}

impl FromStr for SystemGraph {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, GraphError> {
        parse_graph(s)
    }
}

impl SystemGraph {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("graph serializes to TOML")
    }

    pub fn component(&self, id: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.id == id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    UnsupportedVersion,
    DuplicateId,
    UnknownComponent,
    UnknownPort,
    DisconnectedNode,
    NoVacuumGenerator,
    MultipleVacuumGenerators,
    DuplicateIoName,
    InvalidBinding,
    NoOutputs,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::UnsupportedVersion => "UNSUPPORTED_VERSION",
            ViolationCode::DuplicateId => "DUPLICATE_ID",
            ViolationCode::UnknownComponent => "UNKNOWN_COMPONENT",
            ViolationCode::UnknownPort => "UNKNOWN_PORT",
            ViolationCode::DisconnectedNode => "DISCONNECTED_NODE",
            ViolationCode::NoVacuumGenerator => "NO_VACUUM_GENERATOR",
            ViolationCode::MultipleVacuumGenerators => "MULTIPLE_VACUUM_GENERATORS",
            ViolationCode::DuplicateIoName => "DUPLICATE_IO_NAME",
            ViolationCode::InvalidBinding => "INVALID_BINDING",
            ViolationCode::NoOutputs => "NO_OUTPUTS",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

/// Check every structural invariant of a graph. An empty list means the
/// graph can be assembled.
pub fn validate_graph(g: &SystemGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |code, message: String| out.push(Violation { code, message });

    if g.format_version != GRAPH_FORMAT_VERSION {
        push(
            ViolationCode::UnsupportedVersion,
            format!(
                "format_version {} is not supported (expected {GRAPH_FORMAT_VERSION})",
                g.format_version
            ),
        );
    }

    let mut by_id: HashMap<&str, &Component> = HashMap::new();
    for c in &g.components {
        if by_id.insert(c.id.as_str(), c).is_some() {
            push(ViolationCode::DuplicateId, format!("component id `{}` is used more than once", c.id));
        }
    }

    let generators: Vec<&str> = g
        .components
        .iter()
        .filter(|c| c.kind == ComponentKind::Ejector)
        .map(|c| c.id.as_str())
        .collect();
    match generators.len() {
        0 => push(ViolationCode::NoVacuumGenerator, "the graph has no vacuum generator".into()),
        1 => {}
        _ => push(
            ViolationCode::MultipleVacuumGenerators,
            format!("only one vacuum generator is supported, found {}", generators.join(", ")),
        ),
    }

    let mut adjacency: HashMap<&str, BTreeSet<&str>> = HashMap::new();
    for conn in &g.connections {
        let mut ok = true;
        for end in [&conn.from, &conn.to] {
            match by_id.get(end.component.as_str()) {
                None => {
                    ok = false;
                    push(
                        ViolationCode::UnknownComponent,
                        format!("connection references undefined component `{}`", end.component),
                    );
                }
                Some(c) if !c.kind.is_pneumatic_port(&end.port) => {
                    ok = false;
                    push(
                        ViolationCode::UnknownPort,
                        format!("`{end}` is not a pneumatic port of a {}", c.kind),
                    );
                }
                Some(_) => {}
            }
        }
        if ok {
            adjacency
                .entry(conn.from.component.as_str())
                .or_default()
                .insert(conn.to.component.as_str());
            adjacency
                .entry(conn.to.component.as_str())
                .or_default()
                .insert(conn.from.component.as_str());
        }
    }

    // Everything must hang off the (first) vacuum generator.
    if let Some(root) = generators.first() {
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        let mut queue = VecDeque::from([*root]);
        seen.insert(root);
        while let Some(n) = queue.pop_front() {
            for m in adjacency.get(n).into_iter().flatten() {
                if seen.insert(m) {
                    queue.push_back(m);
                }
            }
        }
        for c in &g.components {
            if !seen.contains(c.id.as_str()) {
                push(
                    ViolationCode::DisconnectedNode,
                    format!("component `{}` is not pneumatically connected to `{root}`", c.id),
                );
            }
        }
    }

    let mut names = BTreeSet::new();
    for (binding, is_input) in g
        .io
        .inputs
        .iter()
        .map(|b| (b, true))
        .chain(g.io.outputs.iter().map(|b| (b, false)))
    {
        if !names.insert(binding.name.as_str()) {
            push(
                ViolationCode::DuplicateIoName,
                format!("signal name `{}` is bound more than once", binding.name),
            );
        }
        let Some(c) = by_id.get(binding.port.component.as_str()) else {
            push(
                ViolationCode::UnknownComponent,
                format!(
                    "binding `{}` references undefined component `{}`",
                    binding.name, binding.port.component
                ),
            );
            continue;
        };
        let ports = if is_input { c.kind.input_ports() } else { c.kind.output_ports() };
        if !ports.contains(&binding.port.port.as_str()) {
            push(
                ViolationCode::InvalidBinding,
                format!(
                    "`{}` is not an {} port of a {} (binding `{}`)",
                    binding.port,
                    if is_input { "input" } else { "output" },
                    c.kind,
                    binding.name
                ),
            );
        }
    }
    if g.io.outputs.is_empty() {
        push(ViolationCode::NoOutputs, "the graph binds no output signals".into());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reference;

    const MINIMAL: &str = r#"
format_version = 1
name = "minimal"

[[components]]
id = "ejector"
kind = "ejector"
params = { s_max = 1.2e-3, pv_max = 750 }

[[components]]
id = "sensor"
kind = "sensor"

[[connections]]
from = "ejector.port"
to = "sensor.port"

[io]
inputs = [{ name = "suction", port = "ejector.suction" }]
outputs = [{ name = "vacuum", port = "sensor.vacuum" }]
"#;

    fn codes(g: &SystemGraph) -> Vec<ViolationCode> {
        validate_graph(g).into_iter().map(|v| v.code).collect()
    }

    #[test]
    fn minimal_graph() {
        let g = parse_graph(MINIMAL).unwrap();
        assert_eq!(g.components.len(), 2);
        assert_eq!(g.connections.len(), 1);
        assert_eq!(g.components[0].number("pv_max").unwrap(), Some(750.0));
        assert!(validate_graph(&g).is_empty());
    }

    #[test]
    fn use_case_one_components() {
        let g = parse_graph(reference::USE_CASE_1).unwrap();
        assert_eq!(g.components.len(), 11);
        let count = |k| g.components.iter().filter(|c| c.kind == k).count();
        assert_eq!(count(ComponentKind::Ejector), 1);
        assert_eq!(count(ComponentKind::Hose), 5);
        assert_eq!(count(ComponentKind::Distributor), 1);
        assert_eq!(count(ComponentKind::SuctionCup), 4);
        assert!(validate_graph(&g).is_empty(), "{:?}", validate_graph(&g));
    }

    #[test]
    fn syntax_error_has_position() {
        let doc = "format_version = 1\n[[components]]\nid = \"x\nkind = 3\n";
        match parse_graph(doc) {
            Err(GraphError::Syntax { line, column, .. }) => {
                assert_eq!(line, 3);
                assert!(column >= 1);
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_kind() {
        let doc = MINIMAL.replace("kind = \"sensor\"", "kind = \"turbine\"");
        assert_eq!(
            parse_graph(&doc),
            Err(GraphError::UnknownKind { id: "sensor".into(), kind: "turbine".into() })
        );
    }

    #[test]
    fn missing_parameter_is_named() {
        let doc = MINIMAL.replace("s_max = 1.2e-3, ", "");
        let err = parse_graph(&doc).unwrap_err();
        assert!(matches!(err, GraphError::MissingParameter { param: "s_max", .. }));
        assert!(err.to_string().contains("s_max"));
    }

    #[test]
    fn undefined_component_is_named() {
        let doc = MINIMAL.replace("to = \"sensor.port\"", "to = \"ghost.port\"");
        let g = parse_graph(&doc).unwrap();
        let v = validate_graph(&g);
        assert!(v
            .iter()
            .any(|v| v.code == ViolationCode::UnknownComponent && v.message.contains("ghost")));
    }

    #[test]
    fn duplicate_id() {
        let mut g = parse_graph(MINIMAL).unwrap();
        let mut dup = g.components[1].clone();
        dup.kind = ComponentKind::Reservoir;
        dup.params.insert("volume".into(), ParamValue::Number(1e-4));
        g.components.push(dup);
        assert!(codes(&g).contains(&ViolationCode::DuplicateId));
    }

    #[test]
    fn disconnected_cup() {
        let mut g = parse_graph(reference::USE_CASE_1).unwrap();
        g.connections.retain(|c| c.to.component != "cup4" && c.from.component != "cup4");
        let v = validate_graph(&g);
        assert!(v
            .iter()
            .any(|v| v.code == ViolationCode::DisconnectedNode && v.message.contains("cup4")));
    }

    #[test]
    fn generator_count() {
        let mut g = parse_graph(MINIMAL).unwrap();
        g.components[0].kind = ComponentKind::Reservoir;
        g.components[0].params.insert("volume".into(), ParamValue::Number(1e-4));
        assert!(codes(&g).contains(&ViolationCode::NoVacuumGenerator));

        let mut g = parse_graph(MINIMAL).unwrap();
        let mut second = g.components[0].clone();
        second.id = "ejector2".into();
        g.components.push(second);
        g.connections.push(Connection {
            from: "ejector2.port".parse().unwrap(),
            to: "sensor.port".parse().unwrap(),
        });
        assert!(codes(&g).contains(&ViolationCode::MultipleVacuumGenerators));
    }

    #[test]
    fn bad_ports_and_bindings() {
        let doc = MINIMAL
            .replace("to = \"sensor.port\"", "to = \"sensor.vacuum\"")
            .replace("port = \"ejector.suction\"", "port = \"ejector.vacuum\"");
        let g = parse_graph(&doc).unwrap();
        let c = codes(&g);
        assert!(c.contains(&ViolationCode::UnknownPort));
        assert!(c.contains(&ViolationCode::InvalidBinding));
    }

    #[test]
    fn version_checked() {
        let doc = MINIMAL.replace("format_version = 1", "format_version = 7");
        let g = parse_graph(&doc).unwrap();
        assert_eq!(codes(&g), vec![ViolationCode::UnsupportedVersion]);
    }

    #[test]
    fn malformed_endpoint() {
        let doc = MINIMAL.replace("to = \"sensor.port\"", "to = \"sensorport\"");
        assert!(matches!(parse_graph(&doc), Err(GraphError::Syntax { .. })));
    }

    #[test]
    fn toml_round_trip() {
        let g = parse_graph(reference::USE_CASE_2).unwrap();
        let again = parse_graph(&g.to_toml()).unwrap();
        assert_eq!(g, again);
    }
}
