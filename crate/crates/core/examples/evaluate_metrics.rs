//! MPSNR and MSSIM, the CSV row format, and band images.
//!
//! ```text
//! cargo run --example evaluate_metrics
//! ```

use hsdenoise::degrade::add_gaussian;
use hsdenoise::io::export_band_pgm;
use hsdenoise::metrics::{evaluate, CSV_HEADER};
use hsdenoise::synthetic::piecewise_constant_cube;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let clean = piecewise_constant_cube(24, 24, 6, 1)?;
    println!("{CSV_HEADER}");
    for sigma in [0.0, 0.01, 0.05, 0.1] {
        let noisy = add_gaussian(&clean, sigma, 9)?;
        let m = evaluate(&noisy, &clean)?;
        println!("{}", m.csv_row("synthetic", &format!("sigma={sigma}"), "gaussian"));
    }

    let noisy = add_gaussian(&clean, 0.05, 9)?;
    let m = evaluate(&noisy, &clean)?;
    let per_band: Vec<String> = m.per_band_psnr.iter().map(|p| format!("{p:.2}")).collect();
    println!("per-band PSNR: {}", per_band.join(" "));

    let dir = std::env::temp_dir().join("hsdenoise-evaluate-metrics");
    std::fs::create_dir_all(&dir)?;
    export_band_pgm(&noisy, 2, dir.join("noisy_band2.pgm"), Some(1.5))?;
    export_band_pgm(&clean, 2, dir.join("clean_band2.pgm"), Some(1.5))?;
    println!("band images in {}", dir.display());
    Ok(())
}
