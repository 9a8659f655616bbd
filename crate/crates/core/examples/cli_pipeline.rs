//! The command line pipeline for the first use case, written to a scratch
//! directory.

use mdtwin::cli::run_cli;

fn main() {
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/use_case_1.toml");
    let out = std::env::temp_dir().join("mdtwin_cli_pipeline");
    let out = out.to_str().unwrap();
    let steps: [&[&str]; 5] = [
        &["build"],
        &["explore"],
        &["synthesize"],
        &["run", "--level", "3"],
        &["run", "--level", "4"],
    ];
    let base = ["mdtwin", "--config", config, "--out", out];
    for step in steps {
        let code = run_cli(base.iter().chain(step.iter()).copied());
        println!("{:<24} exit {code}", step.join(" "));
        if code != 0 {
            std::process::exit(code);
        }
    }
    let t3 = format!("{out}/trace_mdt3.csv");
    let t4 = format!("{out}/trace_mdt4.csv");
    let code = run_cli(["mdtwin", "--config", config, "--out", out, "compare", &t4, &t3]);
    println!("{:<24} exit {code}", "compare mdt4 mdt3");
    println!("artifacts in {out}");
}
