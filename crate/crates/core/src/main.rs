use clap::Parser;
use prm_maxreg::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
