fn main() {
    std::process::exit(mdtwin::cli::run_cli(std::env::args_os()));
}
