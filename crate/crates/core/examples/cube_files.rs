//! Writing and reading the binary cube format.
//!
//! ```text
//! cargo run --example cube_files
//! ```

use hsdenoise::io::{encode_cube, read_cube, write_cube, HEADER_LEN};
use hsdenoise::synthetic::piecewise_constant_cube;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cube = piecewise_constant_cube(16, 12, 4, 5)?;
    let bytes = encode_cube(&cube);
    println!("{} bytes = {HEADER_LEN}-byte header + 8 x {}", bytes.len(), cube.len());
    println!("header: {:02x?}", &bytes[..HEADER_LEN]);

    let path = std::env::temp_dir().join("hsdenoise-example.hsc");
    write_cube(&cube, &path)?;
    let back = read_cube(&path)?;
    println!("round trip identical: {}", back == cube);

    let mut broken = bytes.clone();
    broken.truncate(bytes.len() - 1);
    std::fs::write(&path, &broken)?;
    println!("truncated file: {}", read_cube(&path).unwrap_err());
    std::fs::remove_file(&path)?;
    Ok(())
}
