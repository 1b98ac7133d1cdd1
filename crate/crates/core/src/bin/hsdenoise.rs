use std::process::ExitCode;

use clap::Parser;
use hsdenoise::cli::{run, Cli};

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("hsdenoise: outputs written, but not every solve converged");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("hsdenoise: {e}");
            ExitCode::FAILURE
        }
    }
}
