use std::process::exit;

fn main() {
    exit(giant_gates::cli::run(std::env::args()));
}
