use clap::Parser;
use invscales::cli::{run, CommandSpec};

fn main() {
    std::process::exit(run(CommandSpec::parse()));
}
