//! Mixed-noise simulation and radius calibration for the six noise cases.
//!
//! ```text
//! cargo run --example simulate_noise
//! ```

use hsdenoise::degrade::{calibrate_radii, simulate, NoiseCase};
use hsdenoise::metrics::mpsnr;
use hsdenoise::synthetic::piecewise_constant_cube;

fn main() -> hsdenoise::Result<()> {
    let clean = piecewise_constant_cube(32, 32, 16, 7)?;
    println!("case    sigma  p_s   p_t   |  MPSNR   alpha     beta    epsilon");
    for case in NoiseCase::ALL {
        let spec = case.spec(42);
        let d = simulate(&clean, &spec)?;
        let r = calibrate_radii(&spec, clean.len());
        let (psnr, _) = mpsnr(&d.observed, &clean)?;
        println!(
            "{case}  {:.2}  {:.2}  {:.2}  | {psnr:6.2}  {:7.2}  {:7.2}  {:7.3}",
            spec.gaussian_sigma, spec.sparse_rate, spec.stripe_rate, r.alpha, r.beta, r.epsilon
        );
    }

    // The observation is exactly the sum of its parts.
    let d = simulate(&clean, &NoiseCase::Case6.spec(42))?;
    let rebuilt = clean.add(&d.sparse).add(&d.stripe).add(&d.gaussian);
    println!("v == u + s + t + n bit-wise: {}", rebuilt == d.observed);
    println!(
        "true norms: ||s||_1 = {:.1}, ||t||_1 = {:.1}, ||n||_2 = {:.3}",
        d.sparse.norm1(),
        d.stripe.norm1(),
        d.gaussian.norm2()
    );
    Ok(())
}
