//! Wall-clock timing of every level on the second use case.

use mdtwin::assembly::build_from_document;
use mdtwin::bench::{run_benchmark, Subject};
use mdtwin::explorer::{explore, ExplorationConfig};
use mdtwin::io::save_machine;
use mdtwin::machine::{synthesize, MdtLevel};
use mdtwin::model::SolverConfig;
use mdtwin::reference::{pick_and_place_script, USE_CASE_2};

fn main() {
    let repetitions = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(5);
    let model = build_from_document(USE_CASE_2, SolverConfig::default()).unwrap();
    let cfg = ExplorationConfig { parallel: true, ..ExplorationConfig::binary(&["suction", "blow_off"], &[0.0, 24.0]) };
    let d = explore(&model, &cfg).unwrap();
    let mut subjects: Vec<Subject> = MdtLevel::ALL
        .iter()
        .map(|&l| Subject::Machine(save_machine(&synthesize(&d, l).unwrap())))
        .collect();
    subjects.push(Subject::Detailed { document: USE_CASE_2.into(), solver: SolverConfig::default() });
    let report = run_benchmark(&subjects, &pick_and_place_script(), 1e-3, repetitions, false).unwrap();
    print!("{}", report.to_table());
}
