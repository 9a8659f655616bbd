//! Deviation of each machine from the detailed model, per script phase.

use mdtwin::assembly::build_from_document;
use mdtwin::bench::{compare_traces, traces, Phase, Subject};
use mdtwin::explorer::{explore, ExplorationConfig};
use mdtwin::io::save_machine;
use mdtwin::machine::{synthesize, MdtLevel};
use mdtwin::model::SolverConfig;
use mdtwin::reference::{pick_and_place_script, USE_CASE_1};

fn main() {
    let model = build_from_document(USE_CASE_1, SolverConfig::default()).unwrap();
    let d = explore(&model, &ExplorationConfig::binary(&["suction", "blow_off"], &[0.0, 24.0])).unwrap();
    let mut subjects = vec![Subject::Detailed { document: USE_CASE_1.into(), solver: SolverConfig::default() }];
    subjects.extend(MdtLevel::ALL.map(|l| Subject::Machine(save_machine(&synthesize(&d, l).unwrap()))));
    let t = traces(&subjects, &pick_and_place_script(), 1e-3).unwrap();
    let phases = [Phase::new("idle", 0.0, 3.0), Phase::new("suction", 3.0, 6.0), Phase::new("blow-off", 6.0, 9.0)];
    for (level, trace) in MdtLevel::ALL.iter().zip(&t[1..]) {
        println!("{} against mdt4", level.as_str());
        print!("{}", compare_traces(&t[0], trace, &phases).unwrap().to_table());
        println!();
    }
}
