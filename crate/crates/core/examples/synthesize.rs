//! Build the three abstract machines from one exploration and print their
//! sizes and the MDT2 graph.

use mdtwin::assembly::build_from_document;
use mdtwin::explorer::{explore, ExplorationConfig};
use mdtwin::io::{export_machine_dot, save_machine};
use mdtwin::machine::{synthesize, MdtLevel};
use mdtwin::model::SolverConfig;
use mdtwin::reference::USE_CASE_1;

fn main() {
    let model = build_from_document(USE_CASE_1, SolverConfig::default()).unwrap();
    let d = explore(&model, &ExplorationConfig::binary(&["suction", "blow_off"], &[0.0, 24.0])).unwrap();
    println!("mdt4 bundle {} bytes", model.bundle_bytes().len());
    for level in MdtLevel::ALL {
        let m = synthesize(&d, level).unwrap();
        println!(
            "{} {} states, {} transitions, {} bytes",
            level.as_str(),
            m.states.len(),
            m.transitions.len(),
            save_machine(&m).len()
        );
    }
    println!();
    print!("{}", export_machine_dot(&synthesize(&d, MdtLevel::Mdt2).unwrap()));
}
