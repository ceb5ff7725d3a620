use std::process::ExitCode;

use clap::Parser;
use gkls_sse::cli::{run, Cli};

fn main() -> ExitCode {
    ExitCode::from(run(&Cli::parse()))
}
