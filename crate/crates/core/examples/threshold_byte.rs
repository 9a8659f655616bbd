//! Switching outputs of the vacuum sensor across the pressure range.

use mdtwin::pneumatics::{threshold_outputs, ThresholdConfig};

fn main() {
    let cfg = ThresholdConfig::default();
    println!("{:>6} {:>5} {:>5} {:>10}", "mbar", "H2", "byte", "bits");
    for p in (0..=800).step_by(50) {
        let (h2, byte) = threshold_outputs(p as f64, &cfg);
        println!("{p:>6} {h2:>5} {byte:>5} {byte:>#010b}");
    }
}
