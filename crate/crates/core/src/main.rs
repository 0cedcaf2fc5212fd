use std::process::ExitCode;

use clap::Parser;
use hphi2::cli::{main_with, Cli};

fn main() -> ExitCode {
    ExitCode::from(main_with(Cli::parse()))
}
