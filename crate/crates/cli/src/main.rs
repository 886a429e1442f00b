use std::io::Write;

use clap::Parser;
use hia_cli::app::{execute, Cli};

fn main() {
    let out = execute(Cli::parse());
    // A closed pipe on the reading end is not an analysis failure.
    let _ = std::io::stdout().write_all(out.stdout.as_bytes());
    let _ = std::io::stderr().write_all(out.stderr.as_bytes());
    std::process::exit(out.code);
}
