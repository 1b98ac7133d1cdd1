//! Projections and proximity operators used by the solver.
//!
//! ```text
//! cargo run --example prox_operators
//! ```

use hsdenoise::prox::{
    l1_ball_threshold, nuclear_norm, project_box, project_l1_ball, project_l2_ball, prox_conjugate,
    prox_nuclear, BallSpec,
};
use hsdenoise::{DMatrix, HSCube};

fn main() -> hsdenoise::Result<()> {
    let x = HSCube::new(6, 1, 1, vec![3.0, -1.0, 0.5, 0.0, -2.5, 1.0])?;

    let p = project_l1_ball(&x, 4.0);
    println!("l1 ball, radius 4:");
    println!("  threshold {:?}", l1_ball_threshold(x.as_slice(), 4.0));
    println!("  {:?}  (norm {})", p.as_slice(), p.norm1());

    let b = project_box(&x, 0.0, 1.0)?;
    println!("box [0, 1]:  {:?}", b.as_slice());

    let center = HSCube::zeros(6, 1, 1);
    let q = project_l2_ball(&x, &center, 1.0)?;
    println!("l2 ball, radius 1: norm {:.6}", q.norm2());
    println!("zero set contains its projection: {}", BallSpec::ZeroSet.contains(&BallSpec::ZeroSet.project(&x)?, 0.0));

    // Singular value soft thresholding shrinks every singular value by gamma.
    let m = DMatrix::from_row_slice(3, 2, &[3.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
    let shrunk = prox_nuclear(&m, 0.5, 0)?;
    println!("nuclear prox, gamma 0.5: ||M||_* = {} -> {}", nuclear_norm(&m, 0)?, nuclear_norm(&shrunk, 0)?);

    // Moreau: the conjugate of the nuclear norm is the indicator of the unit
    // spectral ball, so its prox clips singular values at 1.
    let dual = prox_conjugate(&m, 2.0, |z: &DMatrix<f64>, lambda| prox_nuclear(z, lambda, 0))?;
    let sv = dual.clone().svd(false, false).singular_values;
    println!("conjugate prox singular values: {:?}", sv.as_slice());
    Ok(())
}
