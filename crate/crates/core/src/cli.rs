//! Batch entry point: build, explore, synthesize, run, compare, bench.
//!
//! Every stage reads its inputs from files and writes its artifacts into
//! the output directory, so stages can be rerun independently.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Deserialize;

use crate::assembly::build_from_document;
use crate::bench::{compare_traces, run_benchmark, Phase, Subject};
use crate::explorer::{explore, ExplorationConfig, ExploreError};
use crate::io::{
    export_discovery_dot, export_machine_dot, load_discovery, load_machine, machine_file_name, read_file,
    read_trace_csv, save_discovery, save_machine, write_file, write_trace_csv, IoError,
};
use crate::machine::{run_machine, synthesize, MdtLevel};
use crate::model::{BehaviorModel, DetailedModel, SolverConfig};
use crate::trace::{simulate, InputScript, ScriptStep};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_MODEL: i32 = 3;
pub const EXIT_EXPLORATION: i32 = 4;
pub const EXIT_IO: i32 = 5;

pub const DISCOVERY_FILE: &str = "discovery.json";
pub const DISCOVERY_DOT_FILE: &str = "discovery.dot";
pub const BUILD_REPORT_FILE: &str = "build.txt";
pub const DEVIATION_FILE: &str = "deviation.json";
pub const BENCH_FILE: &str = "bench.json";

#[derive(Debug, Parser)]
#[command(name = "mdtwin", version, about = "Build, abstract and compare vacuum-gripper behavior models")]
struct Cli {
    /// TOML run configuration; relative paths inside it resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out_dir` from the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Free text stamped into the provenance of produced artifacts.
    #[arg(long, global = true)]
    seed_note: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Assemble the graph and report the resulting model.
    Build {
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Discover states and transitions of the detailed model.
    Explore {
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Turn the discovery into state machines.
    Synthesize {
        #[arg(long, num_args = 1.., value_parser = clap::value_parser!(u8).range(1..=3))]
        level: Vec<u8>,
    },
    /// Drive one model with the configured script and write its trace.
    Run {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4))]
        level: u8,
        #[arg(long)]
        graph: Option<PathBuf>,
    },
    /// Deviation between two trace files.
    Compare { reference: PathBuf, candidate: PathBuf },
    /// Time the detailed model against the synthesized machines.
    Bench {
        #[arg(long)]
        repetitions: Option<usize>,
        #[arg(long)]
        graph: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub graph: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub levels: Vec<u8>,
    pub solver: SolverConfig,
    pub exploration: ExplorationConfig,
    pub script: Option<ScriptConfig>,
    pub bench: BenchConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptConfig {
    /// s
    pub dt: f64,
    /// s
    pub duration: f64,
    pub steps: Vec<ScriptStep>,
}

impl ScriptConfig {
    pub fn script(&self) -> InputScript {
        InputScript {
            steps: self.steps.clone(),
            duration: self.duration,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub repetitions: usize,
    pub parallel: bool,
    pub phases: Vec<Phase>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            repetitions: 30,
            parallel: false,
            phases: Vec::new(),
        }
    }
}

impl RunConfig {
    /// Parse a configuration and resolve its paths against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<RunConfig, String> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| e.message().to_string())?;
        cfg.graph = cfg.graph.map(|p| base.join(p));
        cfg.out_dir = cfg.out_dir.map(|p| base.join(p));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if let Some(bad) = self.levels.iter().find(|&&l| MdtLevel::from_number(l).is_none()) {
            return Err(format!("levels: {bad} is not one of 1, 2, 3"));
        }
        if !(self.solver.max_step.is_finite() && self.solver.max_step > 0.0) {
            return Err(format!("solver.max_step: must be positive, got {}", self.solver.max_step));
        }
        if let Some(s) = &self.script {
            if !(s.dt.is_finite() && s.dt > 0.0) {
                return Err(format!("script.dt: must be positive, got {}", s.dt));
            }
            s.script().validate(s.steps.first().map_or(0, |x| x.values.len())).map_err(|e| format!("script: {e}"))?;
        }
        if self.bench.repetitions == 0 {
            return Err("bench.repetitions: must be at least 1".into());
        }
        Ok(())
    }
}

/// Failure of one CLI invocation, tagged with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        CliError { code: EXIT_CONFIG, kind: "config", message: message.into() }
    }

    fn model(message: impl fmt::Display) -> Self {
        CliError { code: EXIT_MODEL, kind: "model", message: message.to_string() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flat: Vec<&str> = self.message.split_whitespace().collect();
        write!(f, "error kind={} code={} message={}", self.kind, self.code, flat.join(" "))
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError { code: EXIT_IO, kind: "io", message: e.to_string() }
    }
}

impl From<ExploreError> for CliError {
    fn from(e: ExploreError) -> Self {
        match e {
            ExploreError::Config(m) => CliError::config(format!("exploration: {m}")),
            ExploreError::Model(m) => CliError::model(m),
            other => CliError { code: EXIT_EXPLORATION, kind: "exploration", message: other.to_string() },
        }
    }
}

/// Run the CLI on `argv` (program name first); returns the exit status.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return EXIT_OK;
            }
            let first = e.to_string().lines().next().unwrap_or_default().trim_start_matches("error: ").to_string();
            eprintln!("{}", CliError::config(first));
            return EXIT_CONFIG;
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            e.code
        }
    }
}

struct Context {
    cfg: RunConfig,
    out: Option<PathBuf>,
    note: Option<String>,
}

impl Context {
    fn out_dir(&self) -> Result<&Path, CliError> {
        self.out
            .as_deref()
            .ok_or_else(|| CliError::config("no output directory: pass --out or set out_dir"))
    }

    fn out_file(&self, name: &str) -> Result<PathBuf, CliError> {
        Ok(self.out_dir()?.join(name))
    }

    fn graph_document(&self, flag: Option<PathBuf>) -> Result<String, CliError> {
        let path = flag
            .or_else(|| self.cfg.graph.clone())
            .ok_or_else(|| CliError::config("no graph: pass --graph or set graph"))?;
        let bytes = read_file(&path)?;
        String::from_utf8(bytes).map_err(|_| CliError::config(format!("{}: not UTF-8", path.display())))
    }

    fn model(&self, flag: Option<PathBuf>) -> Result<(String, DetailedModel), CliError> {
        let doc = self.graph_document(flag)?;
        let model = build_from_document(&doc, self.cfg.solver.clone()).map_err(CliError::model)?;
        Ok((doc, model))
    }

    fn script(&self) -> Result<(InputScript, f64), CliError> {
        let s = self
            .cfg
            .script
            .as_ref()
            .ok_or_else(|| CliError::config("no [script] section in the configuration"))?;
        Ok((s.script(), s.dt))
    }

    fn levels(&self, flag: Vec<u8>) -> Vec<MdtLevel> {
        let numbers = if flag.is_empty() { self.cfg.levels.clone() } else { flag };
        let mut levels: Vec<MdtLevel> = if numbers.is_empty() {
            MdtLevel::ALL.to_vec()
        } else {
            numbers.into_iter().filter_map(MdtLevel::from_number).collect()
        };
        levels.sort();
        levels.dedup();
        levels
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let dir = self.out_dir()?;
        std::fs::create_dir_all(dir).map_err(|source| IoError::File {
            path: dir.display().to_string(),
            source,
        })?;
        let path = dir.join(name);
        write_file(&path, bytes)?;
        Ok(path)
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(path) => {
            let text = read_file(path)?;
            let text = String::from_utf8(text).map_err(|_| CliError::config(format!("{}: not UTF-8", path.display())))?;
            let base = path.parent().unwrap_or(Path::new("."));
            RunConfig::parse(&text, base).map_err(|m| CliError::config(format!("{}: {m}", path.display())))?
        }
        None => RunConfig::default(),
    };
    let out = cli.out.clone().or_else(|| cfg.out_dir.clone());
    let ctx = Context { cfg, out, note: cli.seed_note.clone() };
    match cli.command {
        Command::Build { graph } => build(&ctx, graph),
        Command::Explore { graph } => explore_cmd(&ctx, graph),
        Command::Synthesize { level } => synthesize_cmd(&ctx, level),
        Command::Run { level, graph } => run_cmd(&ctx, level, graph),
        Command::Compare { reference, candidate } => compare_cmd(&ctx, &reference, &candidate),
        Command::Bench { repetitions, graph } => bench_cmd(&ctx, repetitions, graph),
    }
}

fn build(ctx: &Context, graph: Option<PathBuf>) -> Result<(), CliError> {
    let (_, model) = ctx.model(graph)?;
    let names = |s: &[crate::model::Signal]| s.iter().map(|x| x.name.as_str()).collect::<Vec<_>>().join(",");
    let report = format!(
        "graph {}\nnodes {}\nlinks {}\nvolume_m3 {}\ninternal_step_s {}\ninputs {}\noutputs {}\nbundle_bytes {}\nfingerprint {}\n",
        model.graph().name,
        model.network().nodes.len(),
        model.network().links.len(),
        model.total_volume(),
        model.internal_step(),
        names(model.inputs()),
        names(model.outputs()),
        model.bundle_bytes().len(),
        model.fingerprint(),
    );
    print!("{report}");
    if ctx.out.is_some() {
        ctx.write(BUILD_REPORT_FILE, report.as_bytes())?;
    }
    Ok(())
}

fn explore_cmd(ctx: &Context, graph: Option<PathBuf>) -> Result<(), CliError> {
    let (_, model) = ctx.model(graph)?;
    ctx.out_dir()?;
    let mut d = explore(&model, &ctx.cfg.exploration)?;
    d.note = ctx.note.clone();
    ctx.write(DISCOVERY_FILE, &save_discovery(&d))?;
    ctx.write(DISCOVERY_DOT_FILE, export_discovery_dot(&d).as_bytes())?;
    println!(
        "states {} transitions {} evaluations {}",
        d.states.len(),
        d.transitions.len(),
        d.evaluations
    );
    Ok(())
}

fn synthesize_cmd(ctx: &Context, level: Vec<u8>) -> Result<(), CliError> {
    let d = load_discovery(&read_file(&ctx.out_file(DISCOVERY_FILE)?)?)?;
    for level in ctx.levels(level) {
        let mut m = synthesize(&d, level).map_err(CliError::model)?;
        if ctx.note.is_some() {
            m.provenance.note = ctx.note.clone();
        }
        let name = machine_file_name(level);
        let bytes = save_machine(&m);
        ctx.write(&name, &bytes)?;
        ctx.write(&name.replace(".json", ".dot"), export_machine_dot(&m).as_bytes())?;
        println!("{} {} bytes", name, bytes.len());
    }
    Ok(())
}

pub fn trace_file_name(level: u8) -> String {
    format!("trace_mdt{level}.csv")
}

fn run_cmd(ctx: &Context, level: u8, graph: Option<PathBuf>) -> Result<(), CliError> {
    let (script, dt) = ctx.script()?;
    let trace = match MdtLevel::from_number(level) {
        Some(l) => {
            let m = load_machine(&read_file(&ctx.out_file(&machine_file_name(l))?)?)?;
            run_machine(&m, &script, dt).map_err(CliError::model)?
        }
        None => {
            let (_, mut model) = ctx.model(graph)?;
            simulate(&mut model, &script, dt).map_err(CliError::model)?
        }
    };
    let path = ctx.write(&trace_file_name(level), write_trace_csv(&trace).as_bytes())?;
    println!("{} rows -> {}", trace.len(), path.display());
    Ok(())
}

fn compare_cmd(ctx: &Context, reference: &Path, candidate: &Path) -> Result<(), CliError> {
    let text = |p: &Path| -> Result<String, CliError> {
        String::from_utf8(read_file(p)?).map_err(|_| CliError::config(format!("{}: not UTF-8", p.display())))
    };
    let a = read_trace_csv(&text(reference)?)?;
    let b = read_trace_csv(&text(candidate)?)?;
    let report = compare_traces(&a, &b, &ctx.cfg.bench.phases).map_err(|e| CliError::config(e.to_string()))?;
    print!("{}", report.to_table());
    if ctx.out.is_some() {
        let json = serde_json::to_vec_pretty(&report).expect("report serializes");
        ctx.write(DEVIATION_FILE, &json)?;
    }
    Ok(())
}

fn bench_cmd(ctx: &Context, repetitions: Option<usize>, graph: Option<PathBuf>) -> Result<(), CliError> {
    let (script, dt) = ctx.script()?;
    let document = ctx.graph_document(graph)?;
    let mut subjects = Vec::new();
    for level in ctx.levels(Vec::new()) {
        subjects.push(Subject::Machine(read_file(&ctx.out_file(&machine_file_name(level))?)?));
    }
    subjects.push(Subject::Detailed {
        document,
        solver: ctx.cfg.solver.clone(),
    });
    let reps = repetitions.unwrap_or(ctx.cfg.bench.repetitions);
    if reps == 0 {
        return Err(CliError::config("--repetitions must be at least 1"));
    }
    let report = run_benchmark(&subjects, &script, dt, reps, ctx.cfg.bench.parallel).map_err(CliError::model)?;
    print!("{}", report.to_table());
    let json = serde_json::to_vec_pretty(&report).expect("report serializes");
    ctx.write(BENCH_FILE, &json)?;
    Ok(())
}
