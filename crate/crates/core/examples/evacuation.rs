//! Closed-form evacuation time against the detailed model for a compact
//! reservoir and a long hose of the same volume.

use mdtwin::assembly::build_from_document;
use mdtwin::model::{BehaviorModel, SolverConfig};
use mdtwin::pneumatics::evacuation_time_mdt2;
use mdtwin::reference::{HOSE_SETUP, RESERVOIR_SETUP};
use mdtwin::units::ATMOSPHERE_PA;

const TARGET_MBAR: f64 = 700.0;

fn time_to(document: &str) -> f64 {
    let mut m = build_from_document(document, SolverConfig::default()).unwrap();
    m.reset();
    let dt = 1e-4;
    let mut t = 0.0;
    while m.output_values()[0] < TARGET_MBAR {
        m.step(&[24.0, 0.0], dt).unwrap();
        t += dt;
    }
    t
}

fn main() {
    for (name, doc) in [("reservoir", RESERVOIR_SETUP), ("hose", HOSE_SETUP)] {
        let m = build_from_document(doc, SolverConfig::default()).unwrap();
        let volume = m.total_volume();
        let s = m.network().ejector.s_max;
        let closed = evacuation_time_mdt2(volume, s, ATMOSPHERE_PA, ATMOSPHERE_PA - TARGET_MBAR * 100.0).unwrap();
        println!(
            "{name:<10} volume {:.3} l  closed form {closed:.4} s  detailed {:.4} s",
            volume * 1e3,
            time_to(doc)
        );
    }
}
