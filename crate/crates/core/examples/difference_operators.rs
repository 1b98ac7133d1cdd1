//! Periodic difference operators on a small cube and their adjoints.
//!
//! ```text
//! cargo run --example difference_operators
//! ```

use hsdenoise::cube::{adjoint_diff, forward_diff, second_order_diff};
use hsdenoise::{Axis, HSCube};

fn main() -> hsdenoise::Result<()> {
    // 4 rows, 3 columns, 2 bands; vertical index varies fastest in memory.
    let x = HSCube::from_fn(4, 3, 2, |i, j, k| (i * i) as f64 + 0.5 * j as f64 + 2.0 * k as f64)?;
    let y = HSCube::from_fn(4, 3, 2, |i, j, k| ((i + 2 * j + 3 * k) % 5) as f64 - 2.0)?;

    for axis in Axis::ALL {
        let dx = forward_diff(&x, axis);
        let lhs = dx.dot(&y);
        let rhs = x.dot(&adjoint_diff(&y, axis));
        println!(
            "{axis:?}: sum(Dx) = {:+.1}, <Dx,y> = {lhs:+.3}, <x,D'y> = {rhs:+.3}",
            dx.sum()
        );
    }

    // Row 3 wraps around to row 0.
    let dv = forward_diff(&x, Axis::Vertical);
    println!("Dv x, band 0, column 0: {:?}", &dv.band(0)[..4]);

    // Ds removes anything shared by all bands, so a band-constant cube has
    // no second-order spatio-spectral variation.
    let flat = HSCube::from_fn(4, 3, 5, |i, j, _| (i * 3 + j) as f64)?;
    let (a, b) = second_order_diff(&flat);
    println!("band-constant cube: |DvDs x| = {}, |DhDs x| = {}", a.norm2(), b.norm2());
    Ok(())
}
