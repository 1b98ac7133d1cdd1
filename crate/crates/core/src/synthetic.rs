//! Seeded synthetic cubes for demos and tests.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cube::HSCube;
use crate::error::Result;

/// A piecewise-constant scene in `[0.1, 0.9]`.
///
/// The spatial grid is split into a background, a few axis-aligned
/// rectangles and one disk. Each region carries a smooth spectral signature,
/// so bands are strongly correlated and edges are shared across bands.
pub fn piecewise_constant_cube(n1: usize, n2: usize, n3: usize, seed: u64) -> Result<HSCube> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let regions = 5;
    let signatures: Vec<Vec<f64>> = (0..regions)
        .map(|_| {
            let base = rng.random_range(0.3..0.7);
            let amp = rng.random_range(0.05..0.2);
            let freq = rng.random_range(0.5..2.0);
            let phase = rng.random_range(0.0..2.0 * PI);
            (0..n3)
                .map(|k| {
                    let x = k as f64 / n3.max(1) as f64;
                    (base + amp * (2.0 * PI * freq * x + phase).sin()).clamp(0.1, 0.9)
                })
                .collect()
        })
        .collect();

    let mut label = vec![0usize; n1 * n2];
    for region in 1..regions - 1 {
        let h = rng.random_range(n1 / 4..=n1 / 2).max(1);
        let w = rng.random_range(n2 / 4..=n2 / 2).max(1);
        let top = rng.random_range(0..=n1 - h);
        let left = rng.random_range(0..=n2 - w);
        for j in left..left + w {
            for i in top..top + h {
                label[i + n1 * j] = region;
            }
        }
    }
    let (ci, cj) = (rng.random_range(0.0..n1 as f64), rng.random_range(0.0..n2 as f64));
    let radius = n1.min(n2) as f64 / 5.0;
    for j in 0..n2 {
        for i in 0..n1 {
            let (di, dj) = (i as f64 - ci, j as f64 - cj);
            if di * di + dj * dj <= radius * radius {
                label[i + n1 * j] = regions - 1;
            }
        }
    }

    HSCube::from_fn(n1, n2, n3, |i, j, k| signatures[label[i + n1 * j]][k])
}
