use clap::Parser;
use hotrack::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
