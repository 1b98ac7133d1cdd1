//! Blocks, structure tensors and the two regularizer values.
//!
//! ```text
//! cargo run --example structure_tensor
//! ```

use hsdenoise::cube::second_order_diff;
use hsdenoise::degrade::add_gaussian;
use hsdenoise::regularizer::{extract_blocks, s3ttv_value, sstv_value, BlockShape};
use hsdenoise::synthetic::piecewise_constant_cube;

fn main() -> hsdenoise::Result<()> {
    let clean = piecewise_constant_cube(20, 20, 8, 3)?;
    let noisy = add_gaussian(&clean, 0.05, 1)?;

    for shape in [BlockShape::tiled(10, 10), BlockShape::tiled(4, 4), BlockShape::tiled(4, 4).with_stride(2)] {
        let geom = shape.bind(20, 20)?;
        let (dv, dh) = second_order_diff(&clean);
        let blocks = extract_blocks(&dv, &dh, &geom)?;
        let m = &blocks[0].matrix;
        println!(
            "{}x{} blocks, stride {}: B = {}, L_b is {}x{}",
            shape.block_h, shape.block_w, shape.stride_h, geom.block_count(), m.nrows(), m.ncols()
        );
        println!(
            "  S3TTV clean {:8.3}   noisy {:8.3}",
            s3ttv_value(&clean, &geom)?,
            s3ttv_value(&noisy, &geom)?
        );
    }
    println!("SSTV       clean {:8.3}   noisy {:8.3}", sstv_value(&clean), sstv_value(&noisy));

    // Few dominant singular values per block: edges are shared across bands.
    let geom = BlockShape::tiled(10, 10).bind(20, 20)?;
    let (dv, dh) = second_order_diff(&clean);
    for block in extract_blocks(&dv, &dh, &geom)? {
        let sv = block.matrix.svd(false, false).singular_values;
        let top = sv.iter().take(3).map(|s| format!("{s:.3}")).collect::<Vec<_>>();
        println!("block {}: leading singular values {}", block.block_index, top.join(" "));
    }
    Ok(())
}
