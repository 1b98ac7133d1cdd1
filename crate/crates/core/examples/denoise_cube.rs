//! Denoise one simulated cube with S3TTV and with SSTV.
//!
//! ```text
//! cargo run --release --example denoise_cube [case]
//! ```

use hsdenoise::degrade::{calibrate_radii, simulate, NoiseCase};
use hsdenoise::metrics::evaluate;
use hsdenoise::regularizer::{BlockShape, Regularizer};
use hsdenoise::solver::{solve, DenoiseProblem, StoppingRule};
use hsdenoise::synthetic::piecewise_constant_cube;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let case: NoiseCase = std::env::args().nth(1).unwrap_or_else(|| "5".into()).parse()?;
    let clean = piecewise_constant_cube(32, 32, 16, 7)?;
    let spec = case.spec(7);
    let degraded = simulate(&clean, &spec)?;
    let radii = calibrate_radii(&spec, clean.len());
    let noisy = evaluate(&degraded.observed, &clean)?;
    println!("{case}: noisy MPSNR {:.2} dB, MSSIM {:.4}", noisy.mpsnr_db, noisy.mssim);

    let geom = BlockShape::tiled(4, 4).bind(32, 32)?;
    let stop = StoppingRule { objective_every: 100, ..StoppingRule::default() };
    for kind in [Regularizer::S3ttv, Regularizer::Sstv] {
        let problem = DenoiseProblem::new(degraded.observed.clone(), radii, (0.0, 1.0), geom.clone(), kind)?;
        let sol = solve(&problem, &stop)?;
        let m = evaluate(&sol.u, &clean)?;
        let r = &sol.report;
        println!(
            "{kind:5}: {:5} iterations, converged {}, MPSNR {:.2} dB, MSSIM {:.4}",
            r.iterations, r.converged, m.mpsnr_db, m.mssim
        );
        println!(
            "       worst constraint violation {:.1e} (last iterate {:.1e})",
            r.residuals.max_violation(),
            r.raw_residuals.max_violation()
        );
        if spec.stripe_rate > 0.0 {
            let err = degraded.stripe.sub(&sol.t).norm2() / degraded.stripe.norm2();
            println!("       relative stripe error {err:.3}");
        }
    }
    Ok(())
}
