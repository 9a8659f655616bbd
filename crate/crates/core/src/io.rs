//! Persistent forms: JSON documents for discoveries and machines, CSV for
//! traces, DOT for diagrams.
//!
//! Numbers are written in their shortest round-trip decimal form, so every
//! save/load pair reproduces values bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::explorer::DiscoveryResult;
use crate::machine::{AbstractMachine, MdtLevel};
use crate::trace::{Depth, Trace};

pub const MACHINE_FORMAT_VERSION: u32 = 1;
pub const DISCOVERY_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("unsupported format_version {found} (supported: {supported})")]
    Version { found: String, supported: u32 },
    #[error("schema error at `{pointer}`: {message}")]
    Schema { pointer: String, message: String },
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Serialize, Deserialize)]
struct MachineDocument {
    format_version: u32,
    machine: AbstractMachine,
}

#[derive(Serialize, Deserialize)]
struct DiscoveryDocument {
    format_version: u32,
    discovery: DiscoveryResult,
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: Option<serde_json::Value>,
}

fn json_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut p = String::new();
    for seg in path.iter() {
        p.push('/');
        match seg {
            Segment::Seq { index } => write!(p, "{index}").expect("string write"),
            Segment::Map { key } => p.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => p.push_str(variant),
            Segment::Unknown => p.push('?'),
        }
    }
    if p.is_empty() {
        p.push('/');
    }
    p
}

fn parse_versioned<T: DeserializeOwned>(bytes: &[u8], supported: u32) -> Result<T, IoError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let probe: VersionProbe = serde_path_to_error::deserialize(de).map_err(|e| IoError::Schema {
        pointer: json_pointer(e.path()),
        message: e.inner().to_string(),
    })?;
    match probe.format_version {
        None => {
            return Err(IoError::Schema {
                pointer: "/format_version".into(),
                message: "missing field".into(),
            })
        }
        Some(v) if v.as_u64() != Some(supported as u64) => {
            return Err(IoError::Version {
                found: v.to_string(),
                supported,
            })
        }
        Some(_) => {}
    }
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    let doc = serde_path_to_error::deserialize(de).map_err(|e| IoError::Schema {
        pointer: json_pointer(e.path()),
        message: e.inner().to_string(),
    })?;
    Ok(doc)
}

pub fn save_machine(m: &AbstractMachine) -> Vec<u8> {
    let doc = MachineDocument {
        format_version: MACHINE_FORMAT_VERSION,
        machine: m.clone(),
    };
    serde_json::to_vec(&doc).expect("machine serializes")
}

pub fn load_machine(bytes: &[u8]) -> Result<AbstractMachine, IoError> {
    let doc: MachineDocument = parse_versioned(bytes, MACHINE_FORMAT_VERSION)?;
    let problems = doc.machine.violations();
    if !problems.is_empty() {
        return Err(IoError::Schema {
            pointer: "/machine".into(),
            message: problems.join("; "),
        });
    }
    Ok(doc.machine)
}

pub fn save_discovery(d: &DiscoveryResult) -> Vec<u8> {
    let doc = DiscoveryDocument {
        format_version: DISCOVERY_FORMAT_VERSION,
        discovery: d.clone(),
    };
    serde_json::to_vec_pretty(&doc).expect("discovery serializes")
}

pub fn load_discovery(bytes: &[u8]) -> Result<DiscoveryResult, IoError> {
    let doc: DiscoveryDocument = parse_versioned(bytes, DISCOVERY_FORMAT_VERSION)?;
    let problems = doc.discovery.violations();
    if !problems.is_empty() {
        return Err(IoError::Schema {
            pointer: "/discovery".into(),
            message: problems.join("; "),
        });
    }
    Ok(doc.discovery)
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, IoError> {
    std::fs::read(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    std::fs::write(path, bytes).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

pub const TIME_COLUMN: &str = "time_s";

/// CSV with `#` metadata lines, a `time_s,<names>` header and one row per
/// sample.
pub fn write_trace_csv(t: &Trace) -> String {
    let mut head = String::new();
    if let Some(src) = t.meta.source {
        writeln!(head, "# source: {}", src.as_str()).expect("string write");
    }
    writeln!(head, "# sample_period_s: {}", t.sample_period).expect("string write");
    for w in &t.meta.warnings {
        writeln!(head, "# warning: {}", w.replace(['\n', '\r'], " ")).expect("string write");
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(std::iter::once(TIME_COLUMN).chain(t.names.iter().map(String::as_str)))
        .expect("in-memory write");
    let mut fields = Vec::with_capacity(t.names.len() + 1);
    for (time, row) in t.times.iter().zip(&t.rows) {
        fields.clear();
        fields.push(time.to_string());
        fields.extend(row.iter().map(f64::to_string));
        w.write_record(&fields).expect("in-memory write");
    }
    head.push_str(&String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8"));
    head
}

pub fn read_trace_csv(text: &str) -> Result<Trace, IoError> {
    let err = |line: u64, message: String| IoError::Csv { line, message };
    let mut source = None;
    let mut period = None;
    let mut warnings = Vec::new();
    let mut skipped = 0u64;
    let mut body = text;
    while let Some(rest) = body.strip_prefix('#') {
        skipped += 1;
        let (line, next) = rest.split_once('\n').unwrap_or((rest, ""));
        let line = line.trim_end_matches('\r').trim();
        if let Some((key, value)) = line.split_once(':') {
            let value = value.trim();
            match key.trim() {
                "source" => {
                    source = Some(
                        Depth::parse(value).ok_or_else(|| err(skipped, format!("unknown source `{value}`")))?,
                    )
                }
                "sample_period_s" => {
                    period = Some(
                        value
                            .parse::<f64>()
                            .map_err(|e| err(skipped, format!("sample_period_s: {e}")))?,
                    )
                }
                "warning" => warnings.push(value.to_string()),
                _ => {}
            }
        }
        body = next;
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(body.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| err(skipped + 1, e.to_string()))?
        .clone();
    if header.get(0) != Some(TIME_COLUMN) {
        return Err(err(skipped + 1, format!("first column must be `{TIME_COLUMN}`")));
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut trace = Trace::new(period.unwrap_or(0.0), names);
    trace.meta.source = source;
    trace.meta.warnings = warnings;
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line()) + skipped;
            err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line()) + skipped;
        if record.len() != trace.names.len() + 1 {
            return Err(err(
                line,
                format!("row {k} has {} fields, header has {}", record.len(), trace.names.len() + 1),
            ));
        }
        let mut values = Vec::with_capacity(record.len());
        for field in record.iter() {
            values.push(
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| err(line, format!("row {k}: `{field}`: {e}")))?,
            );
        }
        let time = values.remove(0);
        if let Some(&last) = trace.times.last() {
            if !(time > last) {
                return Err(err(line, format!("row {k}: time {time} does not increase")));
            }
        }
        trace.times.push(time);
        trace.rows.push(values);
    }
    if period.is_none() && trace.times.len() > 1 {
        trace.sample_period = trace.times[1] - trace.times[0];
    }
    Ok(trace)
}

fn label_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:.1}")
    }
}

fn label_list(values: &[f64]) -> String {
    values.iter().map(|&v| label_number(v)).collect::<Vec<_>>().join(", ")
}

fn dot_escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

fn sorted_by_key<T>(items: &[T], key: impl Fn(&T) -> (u32, &[f64], u32)) -> Vec<&T> {
    let mut v: Vec<&T> = items.iter().collect();
    v.sort_by(|a, b| {
        let (ka, kb) = (key(a), key(b));
        ka.0.cmp(&kb.0)
            .then_with(|| {
                ka.1.iter()
                    .zip(kb.1)
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(ka.1.len().cmp(&kb.1.len()))
            })
            .then(ka.2.cmp(&kb.2))
    });
    v
}

/// State diagram of a discovery: states, the reset marker and one edge per
/// recorded transition labeled with its inputs and settle times.
pub fn export_discovery_dot(d: &DiscoveryResult) -> String {
    let mut s = String::new();
    writeln!(s, "digraph discovery {{").unwrap();
    writeln!(s, "  rankdir=LR;").unwrap();
    writeln!(s, "  init [shape=point];").unwrap();
    for st in &d.states {
        writeln!(
            s,
            "  S{} [shape=circle, label=\"{}\\n{}\"];",
            st.number,
            st.number,
            label_list(&st.stable_outputs)
        )
        .unwrap();
    }
    for t in sorted_by_key(&d.transitions, |t| (t.start_state, &t.input_values, t.target_state)) {
        let from = match t.start_state {
            0 => "init".to_string(),
            n => format!("S{n}"),
        };
        writeln!(
            s,
            "  {from} -> S{} [label=\"{} / {} ms\"];",
            t.target_state,
            label_list(&t.input_values),
            label_list(&t.settle_ms)
        )
        .unwrap();
    }
    s.push_str("}\n");
    s
}

/// State diagram of a machine. MDT2 and MDT3 machines show one box per
/// intermediate state between source and target.
pub fn export_machine_dot(m: &AbstractMachine) -> String {
    let mut s = String::new();
    writeln!(s, "digraph {} {{", m.level.as_str()).unwrap();
    writeln!(s, "  rankdir=LR;").unwrap();
    writeln!(s, "  init [shape=point];").unwrap();
    let mut states: Vec<_> = m.states.iter().collect();
    states.sort_by_key(|st| st.id);
    for st in states {
        writeln!(
            s,
            "  S{} [shape=circle, label=\"{}\\n{}\"];",
            st.id,
            st.id,
            label_list(&st.outputs)
        )
        .unwrap();
    }
    let transitions = sorted_by_key(&m.transitions, |t| (t.source, &t.guard, t.target));
    for (i, t) in transitions.iter().enumerate() {
        if let Some(im) = &t.intermediate {
            let kind = if im.trajectories.is_some() { "trajectory" } else { "delay" };
            writeln!(
                s,
                "  I{} [shape=box, label=\"{} to {}\\n{} {} ms\"];",
                i + 1,
                t.source,
                t.target,
                kind,
                label_list(&im.delays_ms)
            )
            .unwrap();
        }
    }
    writeln!(
        s,
        "  init -> S{} [label=\"{}\"];",
        m.initial_state,
        label_list(&m.initial_guard)
    )
    .unwrap();
    for (i, t) in transitions.iter().enumerate() {
        let guard = dot_escape(&label_list(&t.guard));
        match &t.intermediate {
            None => writeln!(s, "  S{} -> S{} [label=\"{guard}\"];", t.source, t.target).unwrap(),
            Some(im) => {
                writeln!(s, "  S{} -> I{} [label=\"{guard}\"];", t.source, i + 1).unwrap();
                writeln!(
                    s,
                    "  I{} -> S{} [label=\"after {} ms\"];",
                    i + 1,
                    t.target,
                    label_number(im.duration_ms())
                )
                .unwrap();
            }
        }
    }
    s.push_str("}\n");
    s
}

/// File name used for a machine of the given level.
pub fn machine_file_name(level: MdtLevel) -> String {
    format!("machine_{}.json", level.as_str())
}
