//! Drive every level with the pick-and-place script and sample the vacuum.

use mdtwin::assembly::build_from_document;
use mdtwin::explorer::{explore, ExplorationConfig};
use mdtwin::machine::{run_machine, state_sequence, synthesize, MdtLevel};
use mdtwin::model::SolverConfig;
use mdtwin::reference::{pick_and_place_script, USE_CASE_1};
use mdtwin::trace::simulate;

const PROBES: [f64; 6] = [2.9, 3.05, 3.2, 5.9, 6.05, 8.9];

fn main() {
    let mut model = build_from_document(USE_CASE_1, SolverConfig::default()).unwrap();
    let d = explore(&model, &ExplorationConfig::binary(&["suction", "blow_off"], &[0.0, 24.0])).unwrap();
    let script = pick_and_place_script();
    print!("{:<6}", "t/s");
    for t in PROBES {
        print!("{t:>9.2}");
    }
    println!("  states");
    for level in MdtLevel::ALL {
        let trace = run_machine(&synthesize(&d, level).unwrap(), &script, 1e-3).unwrap();
        let j = trace.column_index("vacuum").unwrap();
        print!("{:<6}", level.as_str());
        for t in PROBES {
            print!("{:>9.1}", trace.interpolate(j, t).unwrap());
        }
        println!("  {:?}", state_sequence(&trace));
    }
    let trace = simulate(&mut model, &script, 1e-3).unwrap();
    let j = trace.column_index("vacuum").unwrap();
    print!("{:<6}", "mdt4");
    for t in PROBES {
        print!("{:>9.1}", trace.interpolate(j, t).unwrap());
    }
    println!();
}
