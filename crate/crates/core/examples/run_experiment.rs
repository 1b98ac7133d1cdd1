//! The simulate, denoise, evaluate loop over noise cases, as run by
//! `hsdenoise experiment`.
//!
//! ```text
//! cargo run --release --example run_experiment [out_dir]
//! ```

use clap::Parser;
use hsdenoise::cli::{cmd_experiment, Cli, Command};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| std::env::temp_dir().join("hsdenoise-experiment").display().to_string());
    let cli = Cli::try_parse_from([
        "hsdenoise", "experiment", "--out", &out, "--synthetic", "24x24x8", "--block", "4x4",
        "--case", "1,3,6", "--seed", "3",
    ])?;
    let Command::Experiment(args) = cli.command else { unreachable!() };
    let table = cmd_experiment(&args)?;
    for cell in &table.cells {
        println!(
            "{:7} {:6} MPSNR {:6.2}  MSSIM {:.4}  iterations {}",
            cell.case.to_string(),
            cell.method,
            cell.mpsnr.unwrap_or(f64::NAN),
            cell.mssim.unwrap_or(f64::NAN),
            cell.iterations.map_or("-".into(), |n| n.to_string()),
        );
    }
    println!("table written to {out}/table.csv");
    Ok(())
}
