//! One test per acceptance criterion. Each prints a `criterion N: PASS|FAIL`
//! line straight to stdout (so it shows without `--nocapture`) and then
//! asserts. The tests share one lock so the timing criterion runs alone.

use std::io::Write;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::{Duration, Instant};

use mdtwin::assembly::build_from_document;
use mdtwin::bench::{run_benchmark, Subject};
use mdtwin::explorer::{explore, match_state, DiscoveryResult, ExplorationConfig, Plan, TransitionRecord};
use mdtwin::io::{
    export_discovery_dot, export_machine_dot, load_discovery, load_machine, read_trace_csv, save_discovery,
    save_machine, write_trace_csv,
};
use mdtwin::machine::{
    run_machine, state_sequence, synthesize, AbstractMachine, Intermediate, MachineRuntime, MachineState,
    MachineTransition, MdtLevel, Provenance, Trajectories,
};
use mdtwin::model::{BehaviorModel, DetailedModel, Signal, SolverConfig};
use mdtwin::pneumatics::{evacuation_time_mdt2, threshold_outputs, HoseParams, ThresholdConfig};
use mdtwin::reference::{self, pick_and_place_script};
use mdtwin::trace::{simulate, Depth, Trace};
use mdtwin::units::{values_match, SignalKind, ATMOSPHERE_PA};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

const ALPHABET: [f64; 2] = [0.0, 24.0];
const EXPLORATION_TOLERANCE: f64 = 1.0;
const C1_RUNTIME_LIMIT: Duration = Duration::from_secs(30);
const C2_CASES: u32 = 100;
const C3_UNIT_TOLERANCE: f64 = 1e-12;
const C3_MIN_HOSE_RATIO: f64 = 3.0;
const C3_TARGET_VACUUM: f64 = 700.0;
const C4_MAX_LENGTH: usize = 4;
const C7_REPETITIONS: usize = 30;
const C7_MIN_SPEEDUP: f64 = 50.0;
const C7_MAX_SPREAD: f64 = 5.0;
const C7_RUNTIME_LIMIT: Duration = Duration::from_secs(300);
const C9_VACUUM: f64 = 650.0;
const C9_BYTE: u8 = 48;
const C10_CASES: u32 = 1000;
const SCRIPT_DT: f64 = 1e-3;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn report(n: u32, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "criterion {n}: {verdict} ({detail})").expect("stdout");
    out.flush().expect("stdout");
    assert!(ok, "criterion {n} failed: {detail}");
}

fn config() -> ExplorationConfig {
    ExplorationConfig {
        continuous_tolerance: EXPLORATION_TOLERANCE,
        ..ExplorationConfig::binary(&["suction", "blow_off"], &ALPHABET)
    }
}

struct Explored {
    model: DetailedModel,
    cfg: ExplorationConfig,
    plan: Plan,
    discovery: DiscoveryResult,
    elapsed: Duration,
}

impl Explored {
    fn new(document: &str) -> Explored {
        let model = build_from_document(document, SolverConfig::default()).expect("reference graph builds");
        let cfg = config();
        let plan = cfg.plan(model.inputs(), model.outputs()).expect("valid config");
        let t0 = Instant::now();
        let discovery = explore(&model, &cfg).expect("reference graph explores");
        let elapsed = t0.elapsed();
        Explored { model, cfg, plan, discovery, elapsed }
    }

    fn machine(&self, level: MdtLevel) -> AbstractMachine {
        synthesize(&self.discovery, level).expect("synthesis")
    }

    fn kinds(&self) -> Vec<SignalKind> {
        self.discovery.outputs.iter().map(|s| s.kind).collect()
    }

    fn matches(&self, a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len()
            && self
                .kinds()
                .iter()
                .zip(&self.discovery.tolerances)
                .zip(a.iter().zip(b))
                .all(|((&k, &t), (&x, &y))| values_match(k, x, y, t))
    }

    /// Fresh detailed model after reset and the reach sequence of `state`.
    fn model_in(&self, state: u32) -> DetailedModel {
        let mut m = self.model.clone();
        m.reset();
        for u in &self.discovery.state(state).expect("state").reach_sequence {
            hold(&mut m, u, self.plan.settle_samples, self.plan.cycle);
        }
        m
    }
}

fn hold(m: &mut DetailedModel, u: &[f64], steps: usize, dt: f64) {
    for _ in 0..steps {
        m.step(u, dt).expect("model step");
    }
}

fn uc1() -> &'static Explored {
    static CELL: OnceLock<Explored> = OnceLock::new();
    CELL.get_or_init(|| Explored::new(reference::USE_CASE_1))
}

fn uc2() -> &'static Explored {
    static CELL: OnceLock<Explored> = OnceLock::new();
    CELL.get_or_init(|| Explored::new(reference::USE_CASE_2))
}

fn timed_transitions(d: &DiscoveryResult) -> impl Iterator<Item = &TransitionRecord> {
    d.transitions.iter().filter(|t| t.start_state != 0)
}

#[test]
fn criterion_1_table_structure() {
    let _g = serial();
    let e = uc1();
    let d = &e.discovery;
    let expected: [(u32, [f64; 2], u32); 8] = [
        (0, [0.0, 0.0], 1),
        (1, [24.0, 0.0], 2),
        (1, [0.0, 24.0], 3),
        (1, [24.0, 24.0], 3),
        (2, [0.0, 24.0], 3),
        (2, [24.0, 24.0], 3),
        (3, [0.0, 0.0], 1),
        (3, [24.0, 0.0], 2),
    ];
    let mut got: Vec<(u32, Vec<f64>, u32)> = d
        .transitions
        .iter()
        .map(|t| (t.start_state, t.input_values.clone(), t.target_state))
        .collect();
    let mut want: Vec<(u32, Vec<f64>, u32)> = expected.iter().map(|(s, g, t)| (*s, g.to_vec(), *t)).collect();
    let key = |r: &(u32, Vec<f64>, u32)| (r.0, r.1.iter().map(|v| *v as i64).collect::<Vec<_>>(), r.2);
    got.sort_by_key(key);
    want.sort_by_key(key);
    let structure = d.states.len() == 3 && got == want;
    let mut worst = 0.0f64;
    let mut values_ok = true;
    for s in &d.states {
        let y = e.model_in(s.number).output_values();
        values_ok &= e.matches(&y, &s.stable_outputs);
        worst = worst.max((y[0] - s.stable_outputs[0]).abs());
    }
    let fast = e.elapsed < C1_RUNTIME_LIMIT;
    report(
        1,
        structure && values_ok && fast,
        &format!(
            "{} states, {} rows, rows match: {}, stable vacuum within {worst:.3} mbar, explored in {:.2} s",
            d.states.len(),
            d.transitions.len(),
            got == want,
            e.elapsed.as_secs_f64()
        ),
    );
}

#[derive(Debug, Clone)]
struct RandomGraph {
    s_max: f64,
    pv_max: f64,
    blow_flow: f64,
    blow_overpressure: f64,
    check_valve: bool,
    h2: f64,
    supply_length: f64,
    supply_diameter: f64,
    distributor_volume: f64,
    branches: Vec<(f64, f64)>,
    far_sensor: bool,
}

impl RandomGraph {
    fn document(&self) -> String {
        let mut doc = format!(
            "format_version = 1\nname = \"random\"\n\n\
             [[components]]\nid = \"ejector\"\nkind = \"ejector\"\n\
             params = {{ s_max = {}, pv_max = {}, blow_flow = {}, blow_overpressure = {}, has_check_valve = {}, h2 = {} }}\n\n\
             [[components]]\nid = \"supply\"\nkind = \"hose\"\nparams = {{ length = {}, inner_diameter = {}, segments = 1 }}\n\n\
             [[components]]\nid = \"distributor\"\nkind = \"distributor\"\nparams = {{ volume = {} }}\n\n",
            self.s_max,
            self.pv_max,
            self.blow_flow,
            self.blow_overpressure,
            self.check_valve,
            self.h2,
            self.supply_length,
            self.supply_diameter,
            self.distributor_volume
        );
        for (i, (length, volume)) in self.branches.iter().enumerate() {
            doc += &format!(
                "[[components]]\nid = \"hose{i}\"\nkind = \"hose\"\nparams = {{ length = {length}, inner_diameter = 4e-3, segments = 1 }}\n\n\
                 [[components]]\nid = \"cup{i}\"\nkind = \"suction_cup\"\nparams = {{ volume = {volume} }}\n\n"
            );
        }
        if self.far_sensor {
            doc += "[[components]]\nid = \"sensor\"\nkind = \"sensor\"\n\n";
        }
        doc += "[[connections]]\nfrom = \"ejector.port\"\nto = \"supply.a\"\n\n";
        doc += "[[connections]]\nfrom = \"supply.b\"\nto = \"distributor.in\"\n\n";
        for i in 0..self.branches.len() {
            doc += &format!("[[connections]]\nfrom = \"distributor.out{i}\"\nto = \"hose{i}.a\"\n\n");
            doc += &format!("[[connections]]\nfrom = \"hose{i}.b\"\nto = \"cup{i}.port\"\n\n");
        }
        if self.far_sensor {
            doc += "[[connections]]\nfrom = \"distributor.sense\"\nto = \"sensor.port\"\n\n";
        }
        doc += "[io]\ninputs = [\n    { name = \"suction\", port = \"ejector.suction\" },\n    { name = \"blow_off\", port = \"ejector.blow_off\" },\n]\n";
        doc += "outputs = [\n    { name = \"vacuum\", port = \"ejector.vacuum\" },\n    { name = \"H2\", port = \"ejector.h2\" },\n";
        if self.far_sensor {
            doc += "    { name = \"far_vacuum\", port = \"sensor.vacuum\" },\n";
        }
        doc += "]\n";
        doc
    }
}

fn random_graph() -> impl Strategy<Value = RandomGraph> {
    (
        (2e-3..4e-3f64, 600.0..800.0f64, 2e-3..6e-3f64, -30.0..-5.0f64, any::<bool>(), 300.0..550.0f64),
        (0.5..1.5f64, prop_oneof![Just(4e-3), Just(6e-3)], 10e-6..40e-6f64),
        prop::collection::vec((0.4..0.8f64, 8e-6..20e-6f64), 1..=4),
        any::<bool>(),
    )
        .prop_map(|((s_max, pv_max, blow_flow, blow_overpressure, check_valve, h2), (sl, sd, dv), branches, far_sensor)| {
            RandomGraph {
                s_max,
                pv_max,
                blow_flow,
                blow_overpressure,
                check_valve,
                h2,
                supply_length: sl,
                supply_diameter: sd,
                distributor_volume: dv,
                branches,
                far_sensor,
            }
        })
}

fn guard_conflicts(d: &DiscoveryResult) -> usize {
    let mut n = 0;
    for (i, a) in d.transitions.iter().enumerate() {
        for b in &d.transitions[..i] {
            if a.start_state == b.start_state && d.same_guard(&a.input_values, &b.input_values) {
                n += 1;
            }
        }
    }
    n
}

#[test]
fn criterion_2_determinism_and_absorption() {
    let _g = serial();
    let mut runner = TestRunner::new(Config {
        cases: C2_CASES,
        failure_persistence: None,
        ..Config::default()
    });
    let checked = std::sync::atomic::AtomicUsize::new(0);
    let result = runner.run(&random_graph(), |g| {
        let model = build_from_document(&g.document(), SolverConfig::default())
            .map_err(|e| TestCaseError::fail(format!("build: {e}")))?;
        let cfg = ExplorationConfig { parallel: true, ..config() };
        let d = explore(&model, &cfg).map_err(|e| TestCaseError::fail(format!("explore: {e}")))?;
        let conflicts = guard_conflicts(&d);
        let absorbed = d.absorption_violations().len();
        let other = d.violations().len();
        prop_assert_eq!(conflicts + absorbed + other, 0, "{:?}", d.violations());
        checked.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        Ok(())
    });
    let n = checked.into_inner();
    report(
        2,
        result.is_ok() && n >= C2_CASES as usize,
        &format!("{n} random graphs explored, zero violations: {}", result.is_ok()),
    );
    if let Err(e) = result {
        panic!("{e}");
    }
}

/// Seconds until the first output reaches `target`, stepping at `dt`.
fn time_to_vacuum(document: &str, target: f64, dt: f64, limit: f64) -> f64 {
    let mut m = build_from_document(document, SolverConfig::default()).expect("setup builds");
    m.reset();
    let mut t = 0.0;
    while m.output_values()[0] < target {
        assert!(t < limit, "target vacuum not reached within {limit} s");
        m.step(&[24.0, 0.0], dt).expect("step");
        t += dt;
    }
    t
}

#[test]
fn criterion_3_evacuation() {
    let _g = serial();
    let unit = evacuation_time_mdt2(4e-4, 4e-4, std::f64::consts::E, 1.0).expect("valid inputs");
    let unit_ok = (unit - 1.0).abs() <= C3_UNIT_TOLERANCE;

    let reservoir = build_from_document(reference::RESERVOIR_SETUP, SolverConfig::default()).unwrap();
    let hose = HoseParams {
        length: 31.83,
        inner_diameter: 4e-3,
        segments: 8,
        viscosity: HoseParams::AIR_VISCOSITY,
    };
    let volume = 0.4e-3;
    let same_volume = (hose.volume() - volume).abs() / volume < 1e-3;
    let s = reservoir.network().ejector.s_max;
    let p0 = ATMOSPHERE_PA;
    let pv = ATMOSPHERE_PA - C3_TARGET_VACUUM * 100.0;
    let eq_ratio = evacuation_time_mdt2(volume, s, p0, pv).unwrap() / evacuation_time_mdt2(volume, s, p0, pv).unwrap();

    let t_res = time_to_vacuum(reference::RESERVOIR_SETUP, C3_TARGET_VACUUM, 1e-4, 30.0);
    let t_hose = time_to_vacuum(reference::HOSE_SETUP, C3_TARGET_VACUUM, 1e-4, 30.0);
    let ratio = t_hose / t_res;
    report(
        3,
        unit_ok && same_volume && eq_ratio == 1.0 && ratio >= C3_MIN_HOSE_RATIO,
        &format!(
            "unit case t = {unit}, formula ratio {eq_ratio}, detailed model to {C3_TARGET_VACUUM} mbar: reservoir {t_res:.4} s, hose {t_hose:.4} s, ratio {ratio:.2}"
        ),
    );
}

struct StepCheck<'a> {
    e: &'a Explored,
    machine: &'a AbstractMachine,
    combos: &'a [Vec<f64>],
    sequences: usize,
    failures: Vec<String>,
}

impl StepCheck<'_> {
    fn walk(&mut self, model: &DetailedModel, rt: &MachineRuntime, prefix: &mut Vec<Vec<f64>>) {
        if prefix.len() == C4_MAX_LENGTH {
            return;
        }
        for u in self.combos {
            let mut m = model.clone();
            hold(&mut m, u, self.e.plan.settle_samples, self.e.plan.cycle);
            let mut r = rt.clone();
            r.step(self.machine, u, self.e.cfg.settle_time).expect("machine step");
            prefix.push(u.clone());
            self.sequences += 1;
            let y4 = m.output_values();
            if !self.e.matches(&y4, r.outputs()) {
                self.failures.push(format!("{prefix:?}: mdt4 {y4:?} vs mdt1 {:?}", r.outputs()));
            }
            self.walk(&m, &r, prefix);
            prefix.pop();
        }
    }
}

#[test]
fn criterion_4_mdt1_step_response() {
    let _g = serial();
    let e = uc1();
    let m1 = e.machine(MdtLevel::Mdt1);
    let mut root = e.model.clone();
    root.reset();
    let rt = MachineRuntime::new(&m1);
    let mut check = StepCheck {
        e,
        machine: &m1,
        combos: &e.plan.combinations,
        sequences: 0,
        failures: Vec::new(),
    };
    check.walk(&root, &rt, &mut Vec::new());
    let expected: usize = (1..=C4_MAX_LENGTH).map(|k| e.plan.combinations.len().pow(k as u32)).sum();
    report(
        4,
        check.failures.is_empty() && check.sequences == expected,
        &format!(
            "{} sequences up to length {C4_MAX_LENGTH}, {} mismatches{}",
            check.sequences,
            check.failures.len(),
            check.failures.first().map(|f| format!(", first {f}")).unwrap_or_default()
        ),
    );
}

#[test]
fn criterion_5_mdt2_timing() {
    let _g = serial();
    let mut checked = 0;
    let mut failures = Vec::new();
    for (label, e) in [("uc1", uc1()), ("uc2", uc2())] {
        let m2 = e.machine(MdtLevel::Mdt2);
        let cycle = e.plan.cycle;
        let cycle_ms = cycle * 1e3;
        for t in timed_transitions(&e.discovery) {
            let source = &e.discovery.state(t.start_state).unwrap().stable_outputs;
            let target = &e.discovery.state(t.target_state).unwrap().stable_outputs;
            let mut rt = MachineRuntime::new(&m2);
            rt.force_state(&m2, t.start_state);
            let horizon = (t.settle_ms.iter().copied().fold(0.0, f64::max) / cycle_ms).round() as usize + 2;
            let mut switched: Vec<Option<usize>> = vec![None; source.len()];
            for k in 1..=horizon {
                rt.step(&m2, &t.input_values, cycle).unwrap();
                for (j, s) in switched.iter_mut().enumerate() {
                    if s.is_none() && source[j] != target[j] && rt.outputs()[j] == target[j] {
                        *s = Some(k);
                    }
                }
            }
            for (j, s) in switched.iter().enumerate() {
                if source[j] == target[j] {
                    continue;
                }
                checked += 1;
                match s {
                    Some(k) if ((*k as f64) * cycle_ms - t.settle_ms[j]).abs() <= cycle_ms + 1e-9 => {}
                    other => failures.push(format!(
                        "{label} {}->{} {:?} output {j}: switch at {other:?} cycles, recorded {} ms",
                        t.start_state, t.target_state, t.input_values, t.settle_ms[j]
                    )),
                }
            }
        }
    }
    report(
        5,
        failures.is_empty() && checked > 0,
        &format!("{checked} output switches checked, {} off by more than one cycle {failures:?}", failures.len()),
    );
}

#[test]
fn criterion_6_mdt3_fidelity() {
    let _g = serial();
    let mut exact = 0usize;
    let mut between = 0usize;
    let mut failures = Vec::new();
    for (label, e) in [("uc1", uc1()), ("uc2", uc2())] {
        let m3 = e.machine(MdtLevel::Mdt3);
        let cycle = e.plan.cycle;
        for t in timed_transitions(&e.discovery) {
            let source = e.discovery.state(t.start_state).unwrap().stable_outputs.clone();
            let len = t.trajectories.iter().map(Vec::len).max().unwrap_or(0);

            // Capture instants: machine, recording and a fresh detailed run agree bit for bit.
            let mut rt = MachineRuntime::new(&m3);
            rt.force_state(&m3, t.start_state);
            let mut fresh = e.model_in(t.start_state);
            for k in 1..=len {
                rt.step(&m3, &t.input_values, cycle).unwrap();
                fresh.step(&t.input_values, cycle).unwrap();
                let y4 = fresh.output_values();
                for (j, samples) in t.trajectories.iter().enumerate() {
                    if let Some(&s) = samples.get(k - 1) {
                        exact += 1;
                        if rt.outputs()[j].to_bits() != s.to_bits() || y4[j].to_bits() != s.to_bits() {
                            failures.push(format!(
                                "{label} {}->{} output {j} sample {k}: machine {} recorded {s} fresh {}",
                                t.start_state, t.target_state, rt.outputs()[j], y4[j]
                            ));
                        }
                    }
                }
            }

            // Between instants: inside the hull of the adjacent samples and
            // no further from the detailed model than their spread.
            const SUB: usize = 4;
            let mut rt = MachineRuntime::new(&m3);
            rt.force_state(&m3, t.start_state);
            let mut fine = e.model_in(t.start_state);
            let h = cycle / SUB as f64;
            for k in 0..len * SUB {
                rt.step(&m3, &t.input_values, h).unwrap();
                fine.step(&t.input_values, h).unwrap();
                if (k + 1) % SUB == 0 {
                    continue;
                }
                let y4 = fine.output_values();
                let m = k / SUB;
                for (j, samples) in t.trajectories.iter().enumerate() {
                    if m >= samples.len() {
                        continue;
                    }
                    let a = if m == 0 { source[j] } else { samples[m - 1] };
                    let b = samples[m];
                    let y3 = rt.outputs()[j];
                    let slack = 1e-9 * a.abs().max(b.abs()).max(1.0);
                    let in_hull = y3 >= a.min(b) - slack && y3 <= a.max(b) + slack;
                    let close = (y3 - y4[j]).abs() <= (b - a).abs() + slack;
                    between += 1;
                    if !(in_hull && close) {
                        failures.push(format!(
                            "{label} {}->{} output {j} between samples {m} and {}: mdt3 {y3} mdt4 {} bounds {a}..{b}",
                            t.start_state,
                            t.target_state,
                            m + 1,
                            y4[j]
                        ));
                    }
                }
            }
        }
    }
    report(
        6,
        failures.is_empty() && exact > 0 && between > 0,
        &format!(
            "{exact} capture instants exact, {between} intermediate instants bounded, {} failures{}",
            failures.len(),
            failures.first().map(|f| format!(", first {f}")).unwrap_or_default()
        ),
    );
}

fn subjects(e: &Explored, document: &str) -> Vec<Subject> {
    let mut s: Vec<Subject> = MdtLevel::ALL
        .iter()
        .map(|&l| Subject::Machine(save_machine(&e.machine(l))))
        .collect();
    s.push(Subject::Detailed {
        document: document.to_string(),
        solver: SolverConfig::default(),
    });
    s
}

#[test]
fn criterion_7_speedup() {
    let _g = serial();
    let t0 = Instant::now();
    let e = uc2();
    let g = e.model.graph();
    let cups = g
        .components
        .iter()
        .filter(|c| c.kind == mdtwin::graph::ComponentKind::SuctionCup)
        .count();
    let modules = g.components.iter().filter(|c| c.id.starts_with("module") && !c.id.contains('_')).count();
    let report_t = run_benchmark(
        &subjects(e, reference::USE_CASE_2),
        &pick_and_place_script(),
        SCRIPT_DT,
        C7_REPETITIONS,
        false,
    )
    .expect("benchmark");
    let total = t0.elapsed();
    let mean = |d: Depth| report_t.level(d).expect("level").execution.mean;
    let m4 = mean(Depth::Mdt4);
    let abstract_means = [mean(Depth::Mdt1), mean(Depth::Mdt2), mean(Depth::Mdt3)];
    let slowest = abstract_means.iter().copied().fold(0.0, f64::max);
    let fastest = abstract_means.iter().copied().fold(f64::INFINITY, f64::min);
    let speedup = m4 / slowest;
    let spread = slowest / fastest;
    report(
        7,
        cups == 32
            && modules == 12
            && speedup >= C7_MIN_SPEEDUP
            && spread < C7_MAX_SPREAD
            && total < C7_RUNTIME_LIMIT,
        &format!(
            "{modules} modules, {cups} cups, {C7_REPETITIONS} reps: mdt4 {m4:.5} s, mdt1..3 {abstract_means:.5?} s, \
             min speedup {speedup:.1}x, spread {spread:.2}x, total {:.1} s",
            total.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_8_size_ordering() {
    let _g = serial();
    let mut ok = true;
    let mut detail = Vec::new();
    for (label, e) in [("uc1", uc1()), ("uc2", uc2())] {
        let sizes: Vec<usize> = MdtLevel::ALL.iter().map(|&l| save_machine(&e.machine(l)).len()).collect();
        let bundle = e.model.bundle_bytes().len();
        let ordered = sizes[0] <= sizes[1] && sizes[1] <= sizes[2];
        let below = sizes[2] < bundle;
        ok &= ordered && below;
        detail.push(format!(
            "{label}: mdt1 {} <= mdt2 {} <= mdt3 {}: {ordered}; mdt3 < mdt4 bundle {bundle}: {below}",
            sizes[0], sizes[1], sizes[2]
        ));
    }
    report(8, ok, &detail.join("; "));
}

#[test]
fn criterion_9_threshold_byte() {
    let _g = serial();
    let (_, byte) = threshold_outputs(C9_VACUUM, &ThresholdConfig::default());
    let mut m = uc2().model.clone();
    let p = vec![ATMOSPHERE_PA - C9_VACUUM * 100.0; m.pressures().len()];
    m.set_pressures(&p);
    let j = m.outputs().iter().position(|s| s.name == "pdi_byte_5").expect("pdi output");
    let from_model = m.output_values()[j];
    report(
        9,
        byte == C9_BYTE && from_model == f64::from(C9_BYTE),
        &format!("{C9_VACUUM} mbar -> byte {byte}, use-case-2 output pdi_byte_5 = {from_model}"),
    );
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO,
        -1e4..1e4f64,
        (0u32..2000).prop_map(|k| k as f64 * 0.5),
    ]
}

fn name() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,6}".prop_filter("reserved", |s| s != "time_s" && s != "state")
}

fn unique_names(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<String>> {
    prop::collection::btree_set(name(), n).prop_map(|s| s.into_iter().collect())
}

fn signal_kind() -> impl Strategy<Value = SignalKind> {
    prop_oneof![Just(SignalKind::Continuous), Just(SignalKind::Discrete)]
}

fn random_machine() -> impl Strategy<Value = AbstractMachine> {
    (unique_names(1..=2), unique_names(1..=3), 1u32..=4, 1u8..=3)
        .prop_flat_map(|(ins, outs, n_states, level)| {
            let n_in = ins.len();
            let n_out = outs.len();
            (
                Just((ins, outs, n_states, level)),
                prop::collection::vec(signal_kind(), n_in + n_out),
                prop::collection::vec(prop::collection::vec(finite(), n_out), n_states as usize),
                prop::collection::vec((1..=n_states, 0usize..(1 << n_in), 1..=n_states), 0..8),
                prop::collection::vec(prop_oneof![(0u32..40).prop_map(f64::from), 0.0..40.0f64], 8 * n_out),
                prop::collection::vec(finite(), 1..64),
                (1..=n_states, 0usize..(1 << n_in)),
                (".{0,12}", ".{0,12}", prop::option::of(".{0,16}")),
            )
        })
        .prop_map(|((ins, outs, _, level), kinds, outputs, edges, delays, pool, (init, init_guard), prov)| {
            let level = MdtLevel::from_number(level).unwrap();
            let n_in = ins.len();
            let n_out = outs.len();
            let guard_of = |bits: usize| (0..n_in).map(|i| if bits >> i & 1 == 1 { 24.0 } else { 0.0 }).collect::<Vec<f64>>();
            let mut seen = std::collections::BTreeSet::new();
            let mut transitions = Vec::new();
            let mut next = 0usize;
            for (source, bits, target) in edges {
                if !seen.insert((source, bits)) {
                    continue;
                }
                let i = transitions.len();
                let intermediate = match level {
                    MdtLevel::Mdt1 => None,
                    _ => {
                        let delays_ms: Vec<f64> = (0..n_out).map(|j| delays[(i * n_out + j) % delays.len()]).collect();
                        let trajectories = (level == MdtLevel::Mdt3).then(|| Trajectories {
                            cycle: 1e-3,
                            samples: delays_ms
                                .iter()
                                .map(|&d| {
                                    (0..mdtwin::explorer::trajectory_len(d, 1.0))
                                        .map(|_| {
                                            next += 1;
                                            pool[next % pool.len()]
                                        })
                                        .collect()
                                })
                                .collect(),
                        });
                        Some(Intermediate { delays_ms, trajectories })
                    }
                };
                transitions.push(MachineTransition {
                    source,
                    guard: guard_of(bits),
                    target,
                    intermediate,
                });
            }
            AbstractMachine {
                level,
                inputs: ins.into_iter().zip(&kinds).map(|(n, &k)| Signal::new(n, k)).collect(),
                outputs: outs.into_iter().zip(&kinds[n_in..]).map(|(n, &k)| Signal::new(n, k)).collect(),
                alphabet: vec![vec![0.0, 24.0]; n_in],
                initial_state: init,
                initial_guard: guard_of(init_guard),
                states: outputs
                    .into_iter()
                    .enumerate()
                    .map(|(i, outputs)| MachineState { id: i as u32 + 1, outputs })
                    .collect(),
                transitions,
                provenance: Provenance {
                    source_model: prov.0,
                    config: prov.1,
                    note: prov.2,
                },
            }
        })
}

fn random_trace() -> impl Strategy<Value = Trace> {
    (unique_names(1..=4), 0usize..40)
        .prop_flat_map(|(names, rows)| {
            let width = names.len();
            (
                Just(names),
                prop::collection::vec(1e-6..1.0f64, rows),
                prop::collection::vec(prop::collection::vec(finite(), width), rows),
                prop::option::of(prop_oneof![
                    Just(Depth::Mdt1),
                    Just(Depth::Mdt2),
                    Just(Depth::Mdt3),
                    Just(Depth::Mdt4)
                ]),
                prop_oneof![Just(1e-3), 1e-6..1.0f64],
                prop::collection::vec("[a-z0-9=_.]{1,20}", 0..3),
                -10.0..10.0f64,
            )
        })
        .prop_map(|(names, steps, rows, source, period, warnings, start)| {
            let mut t = Trace::new(period, names);
            t.meta.source = source;
            t.meta.warnings = warnings;
            let mut time = start;
            for (dt, row) in steps.into_iter().zip(rows) {
                t.push(time, row).expect("valid row");
                time += dt;
            }
            t
        })
}

#[test]
fn criterion_10_round_trips() {
    let _g = serial();
    let config = Config {
        cases: C10_CASES,
        failure_persistence: None,
        ..Config::default()
    };
    let machines = std::sync::atomic::AtomicUsize::new(0);
    let machine_result = TestRunner::new(config.clone()).run(&random_machine(), |m| {
        prop_assert!(m.violations().is_empty(), "{:?}", m.violations());
        let bytes = save_machine(&m);
        let back = load_machine(&bytes).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(save_machine(&back), bytes);
        prop_assert_eq!(export_machine_dot(&back), export_machine_dot(&m));
        machines.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        Ok(())
    });
    let traces = std::sync::atomic::AtomicUsize::new(0);
    let trace_result = TestRunner::new(config).run(&random_trace(), |t| {
        let text = write_trace_csv(&t);
        let back = read_trace_csv(&text).map_err(|e| TestCaseError::fail(e.to_string()))?;
        prop_assert_eq!(&back, &t);
        prop_assert_eq!(write_trace_csv(&back), text);
        traces.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        Ok(())
    });
    let e = uc1();
    let d = &e.discovery;
    let reloaded = load_discovery(&save_discovery(d)).expect("discovery reloads");
    let mut dot_stable = reloaded == *d && export_discovery_dot(&reloaded) == export_discovery_dot(d);
    for level in MdtLevel::ALL {
        let m = e.machine(level);
        dot_stable &= export_machine_dot(&m) == export_machine_dot(&e.machine(level));
        dot_stable &= export_machine_dot(&load_machine(&save_machine(&m)).unwrap()) == export_machine_dot(&m);
    }
    let (nm, nt) = (machines.into_inner(), traces.into_inner());
    report(
        10,
        machine_result.is_ok() && trace_result.is_ok() && dot_stable && nm >= C10_CASES as usize && nt >= C10_CASES as usize,
        &format!(
            "{nm} machines and {nt} traces round-tripped exactly, DOT byte-stable: {dot_stable}{}{}",
            machine_result.as_ref().err().map(|e| format!(", machine failure {e}")).unwrap_or_default(),
            trace_result.as_ref().err().map(|e| format!(", trace failure {e}")).unwrap_or_default()
        ),
    );
}

#[test]
fn criterion_11_blow_off_dominance() {
    let _g = serial();
    let e = uc1();
    let d = &e.discovery;
    let script = pick_and_place_script();
    let suction = d.state(2).unwrap().stable_outputs[0];
    let discard = d.state(3).unwrap().stable_outputs[0];
    let dominant = d.transition(2, &[24.0, 24.0]).map(|t| t.target_state) == Some(3)
        && d.transition(2, &[0.0, 24.0]).map(|t| t.target_state) == Some(3);
    let mut detail = vec![format!("discovery (24,24) from 2 -> 3: {dominant}")];
    let mut ok = dominant;
    // Rows sample the outputs reached at k·dt; row 6000 is the last one
    // before the blow-off command takes effect.
    let at = |trace: &Trace, t: f64| trace.rows[(t / SCRIPT_DT).round() as usize][trace.column_index("vacuum").unwrap()];
    for level in MdtLevel::ALL {
        let m = e.machine(level);
        let trace = run_machine(&m, &script, SCRIPT_DT).expect("machine run");
        let seq = state_sequence(&trace);
        let held = at(&trace, 6.0) == suction;
        let after = at(&trace, 6.0 + SCRIPT_DT);
        let delay_ms = m
            .transitions
            .iter()
            .find(|t| t.source == 2 && t.guard == [24.0, 24.0])
            .and_then(|t| t.intermediate.as_ref())
            .map_or(0.0, |im| im.delays_ms[0]);
        let unchanged = match level {
            MdtLevel::Mdt1 => after == discard,
            MdtLevel::Mdt2 => after == if delay_ms > SCRIPT_DT * 1e3 { suction } else { discard },
            MdtLevel::Mdt3 => after <= suction && after >= discard,
        };
        let discarded = at(&trace, 9.0) == discard;
        let level_ok = seq == [1, 2, 3] && held && unchanged && discarded;
        ok &= level_ok;
        detail.push(format!(
            "{}: states {seq:?}, vacuum {} -> {after} -> {}",
            level.as_str(),
            at(&trace, 6.0),
            at(&trace, 9.0)
        ));
    }
    let mut model = e.model.clone();
    let trace = simulate(&mut model, &script, SCRIPT_DT).expect("detailed run");
    let kinds = e.kinds();
    let offset = model.inputs().len();
    let classify = |t: f64| {
        let row = &trace.rows[(t / SCRIPT_DT).round() as usize][offset..];
        match_state(row, &d.states, &kinds, &d.tolerances).ok().flatten()
    };
    let seq4 = [classify(3.0), classify(6.0), classify(9.0)];
    let v6 = at(&trace, 6.0);
    let v9 = at(&trace, 9.0);
    let mdt4_ok = seq4 == [Some(1), Some(2), Some(3)]
        && (v6 - suction).abs() <= EXPLORATION_TOLERANCE
        && (v9 - discard).abs() <= EXPLORATION_TOLERANCE;
    ok &= mdt4_ok;
    detail.push(format!("mdt4: states {seq4:?}, vacuum {v6:.3} -> {v9:.3}"));
    report(11, ok, &detail.join("; "));
}
