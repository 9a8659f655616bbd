//! Discover the stable states and transitions of the detailed model.

use mdtwin::assembly::build_from_document;
use mdtwin::explorer::{explore, ExplorationConfig};
use mdtwin::io::export_discovery_dot;
use mdtwin::model::SolverConfig;
use mdtwin::reference::USE_CASE_1;

fn main() {
    let model = build_from_document(USE_CASE_1, SolverConfig::default()).unwrap();
    let cfg = ExplorationConfig::binary(&["suction", "blow_off"], &[0.0, 24.0]);
    let d = explore(&model, &cfg).unwrap();
    for s in &d.states {
        println!("state {}  outputs {:?}  reached by {:?}", s.number, s.stable_outputs, s.reach_sequence);
    }
    for t in &d.transitions {
        println!(
            "{} --{:?}--> {}  settle {:?} ms",
            t.start_state, t.input_values, t.target_state, t.settle_ms
        );
    }
    println!("{} model evaluations\n", d.evaluations);
    print!("{}", export_discovery_dot(&d));
}
