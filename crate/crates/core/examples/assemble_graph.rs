//! Turn a component graph document into a detailed model and inspect it.

use mdtwin::assembly::build_from_document;
use mdtwin::model::{BehaviorModel, SolverConfig};
use mdtwin::reference::USE_CASE_2;

fn main() {
    let m = build_from_document(USE_CASE_2, SolverConfig::default()).unwrap();
    let net = m.network();
    println!("nodes        {}", net.nodes.len());
    println!("volume       {:.3} l", m.total_volume() * 1e3);
    println!("internal dt  {:.3e} s", m.internal_step());
    println!("bundle       {} bytes", m.bundle_bytes().len());
    println!("fingerprint  {}", m.fingerprint());
    let names = |s: &[mdtwin::model::Signal]| s.iter().map(|s| s.name.clone()).collect::<Vec<_>>().join(", ");
    println!("inputs       {}", names(m.inputs()));
    println!("outputs      {}", names(m.outputs()));
}
