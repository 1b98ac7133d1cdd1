//! Spatio-spectral structure tensors and the regularizers built from them.
//!
//! For a block `b` of `block_h x block_w` pixels, the structure tensor `L_b`
//! is a `(block_h * block_w) x (2 * n3)` matrix. Column `2k` holds the
//! vectorized `Dv Ds u` values of band `k` inside the block and column
//! `2k + 1` the `Dh Ds u` values, vertical index fastest. S3TTV is the sum of
//! the nuclear norms of all `L_b`; SSTV is the plain l1 norm of the same
//! second-order differences.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cube::{second_order_diff, HSCube};
use crate::error::{Error, Result};
use crate::prox::nuclear_norm;

/// Which regularizer the denoiser minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularizer {
    S3ttv,
    Sstv,
}

impl Regularizer {
    pub fn name(self) -> &'static str {
        match self {
            Regularizer::S3ttv => "S3TTV",
            Regularizer::Sstv => "SSTV",
        }
    }
}

impl fmt::Display for Regularizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regularizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "s3ttv" => Ok(Regularizer::S3ttv),
            "sstv" => Ok(Regularizer::Sstv),
            other => Err(Error::InvalidParameter {
                name: "regularizer",
                reason: format!("expected `s3ttv` or `sstv`, got `{other}`"),
            }),
        }
    }
}

/// Block size and stride, independent of any particular cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockShape {
    pub block_h: usize,
    pub block_w: usize,
    pub stride_h: usize,
    pub stride_w: usize,
}

impl BlockShape {
    /// Non-overlapping tiling with `block_h x block_w` blocks.
    pub fn tiled(block_h: usize, block_w: usize) -> Self {
        Self {
            block_h,
            block_w,
            stride_h: block_h,
            stride_w: block_w,
        }
    }

    pub fn with_stride(self, stride: usize) -> Self {
        Self {
            stride_h: stride,
            stride_w: stride,
            ..self
        }
    }

    /// Resolves the block origins for an `n1 x n2` spatial grid.
    pub fn bind(self, n1: usize, n2: usize) -> Result<BlockGeometry> {
        BlockGeometry::new(self, n1, n2)
    }
}

impl Default for BlockShape {
    fn default() -> Self {
        Self::tiled(10, 10)
    }
}

/// A block shape bound to a spatial grid.
///
/// Origins sit on the grid `(r * stride_h, c * stride_w)` for every origin
/// inside the image. Blocks that run past the bottom or right edge are
/// completed periodically with pixels from the opposite boundary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockGeometry {
    shape: BlockShape,
    n1: usize,
    n2: usize,
    origins: Vec<(usize, usize)>,
    // Spatial pixel index (i + n1 * j) of every block row, block-major.
    pixels: Vec<usize>,
}

impl BlockGeometry {
    pub fn new(shape: BlockShape, n1: usize, n2: usize) -> Result<Self> {
        let BlockShape {
            block_h,
            block_w,
            stride_h,
            stride_w,
        } = shape;
        if block_h == 0 || block_w == 0 || block_h > n1 || block_w > n2 {
            return Err(Error::IncompatibleGeometry {
                block_h,
                block_w,
                n1,
                n2,
            });
        }
        if stride_h == 0 || stride_w == 0 || stride_h > block_h || stride_w > block_w {
            return Err(Error::InvalidParameter {
                name: "stride",
                reason: format!(
                    "stride {stride_h}x{stride_w} must be positive and no larger than the block {block_h}x{block_w}"
                ),
            });
        }
        let mut origins = Vec::new();
        for col in (0..n2).step_by(stride_w) {
            for row in (0..n1).step_by(stride_h) {
                origins.push((row, col));
            }
        }
        let mut pixels = Vec::with_capacity(origins.len() * block_h * block_w);
        for &(row, col) in &origins {
            for b in 0..block_w {
                let j = (col + b) % n2;
                for a in 0..block_h {
                    let i = (row + a) % n1;
                    pixels.push(i + n1 * j);
                }
            }
        }
        Ok(Self {
            shape,
            n1,
            n2,
            origins,
            pixels,
        })
    }

    pub fn shape(&self) -> BlockShape {
        self.shape
    }

    pub fn spatial_dims(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    pub fn origins(&self) -> &[(usize, usize)] {
        &self.origins
    }

    /// Number of blocks `B`.
    pub fn block_count(&self) -> usize {
        self.origins.len()
    }

    /// Rows per structure tensor, `block_h * block_w`.
    pub fn block_pixels(&self) -> usize {
        self.shape.block_h * self.shape.block_w
    }

    /// Spatial pixel indices covered by block `b`, in row order of `L_b`.
    pub fn block_pixel_indices(&self, b: usize) -> &[usize] {
        let m = self.block_pixels();
        &self.pixels[b * m..(b + 1) * m]
    }

    /// How many block rows read each spatial pixel.
    pub fn coverage(&self) -> Vec<usize> {
        let mut count = vec![0; self.n1 * self.n2];
        for &p in &self.pixels {
            count[p] += 1;
        }
        count
    }

    fn check_cube(&self, cube: &HSCube) -> Result<()> {
        if (cube.n1(), cube.n2()) != (self.n1, self.n2) {
            return Err(Error::IncompatibleGeometry {
                block_h: self.shape.block_h,
                block_w: self.shape.block_w,
                n1: cube.n1(),
                n2: cube.n2(),
            });
        }
        Ok(())
    }
}

/// The structure tensor `L_b` of one block.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureTensorBlock {
    pub matrix: DMatrix<f64>,
    /// Zero-based block index `b`.
    pub block_index: usize,
}

/// Gathers every block of `(dv, dh)` into its structure tensor.
pub fn extract_blocks(
    dv: &HSCube,
    dh: &HSCube,
    geom: &BlockGeometry,
) -> Result<Vec<StructureTensorBlock>> {
    dv.ensure_same_dims(dh)?;
    geom.check_cube(dv)?;
    let matrices = extract_matrices(dv, dh, geom);
    Ok(matrices
        .into_iter()
        .enumerate()
        .map(|(block_index, matrix)| StructureTensorBlock {
            matrix,
            block_index,
        })
        .collect())
}

pub(crate) fn extract_matrices(dv: &HSCube, dh: &HSCube, geom: &BlockGeometry) -> Vec<DMatrix<f64>> {
    let n3 = dv.n3();
    let plane = dv.n1() * dv.n2();
    let (dv, dh) = (dv.as_slice(), dh.as_slice());
    (0..geom.block_count())
        .into_par_iter()
        .map(|b| {
            let rows = geom.block_pixel_indices(b);
            let mut m = DMatrix::zeros(rows.len(), 2 * n3);
            for k in 0..n3 {
                let offset = k * plane;
                for (r, &p) in rows.iter().enumerate() {
                    m[(r, 2 * k)] = dv[offset + p];
                    m[(r, 2 * k + 1)] = dh[offset + p];
                }
            }
            m
        })
        .collect()
}

/// Adjoint of [`extract_blocks`]: every block entry is added back onto the
/// voxel it was read from.
pub fn scatter_blocks_adjoint(
    blocks: &[StructureTensorBlock],
    geom: &BlockGeometry,
    dims: (usize, usize, usize),
) -> Result<(HSCube, HSCube)> {
    if blocks.len() != geom.block_count() {
        return Err(Error::InvalidParameter {
            name: "blocks",
            reason: format!("expected {} blocks, got {}", geom.block_count(), blocks.len()),
        });
    }
    let expected = (geom.block_pixels(), 2 * dims.2);
    for blk in blocks {
        if blk.matrix.shape() != expected {
            return Err(Error::InvalidParameter {
                name: "blocks",
                reason: format!(
                    "block {} has shape {:?}, expected {:?}",
                    blk.block_index,
                    blk.matrix.shape(),
                    expected
                ),
            });
        }
    }
    if (dims.0, dims.1) != geom.spatial_dims() {
        let (n1, n2) = (dims.0, dims.1);
        let shape = geom.shape();
        return Err(Error::IncompatibleGeometry {
            block_h: shape.block_h,
            block_w: shape.block_w,
            n1,
            n2,
        });
    }
    let matrices: Vec<&DMatrix<f64>> = blocks.iter().map(|b| &b.matrix).collect();
    Ok(scatter_matrices(&matrices, geom, dims))
}

pub(crate) fn scatter_matrices(
    matrices: &[&DMatrix<f64>],
    geom: &BlockGeometry,
    dims: (usize, usize, usize),
) -> (HSCube, HSCube) {
    let plane = dims.0 * dims.1;
    let mut dv = vec![0.0; plane * dims.2];
    let mut dh = vec![0.0; plane * dims.2];
    // Bands own disjoint output slices; within a band blocks accumulate in
    // index order so the sums are reproducible.
    dv.par_chunks_mut(plane)
        .zip(dh.par_chunks_mut(plane))
        .enumerate()
        .for_each(|(k, (band_v, band_h))| {
            for (b, m) in matrices.iter().enumerate() {
                for (r, &p) in geom.block_pixel_indices(b).iter().enumerate() {
                    band_v[p] += m[(r, 2 * k)];
                    band_h[p] += m[(r, 2 * k + 1)];
                }
            }
        });
    (
        HSCube::from_parts(dims, dv),
        HSCube::from_parts(dims, dh),
    )
}

/// Structure tensors of `u`.
pub fn structure_tensors(u: &HSCube, geom: &BlockGeometry) -> Result<Vec<StructureTensorBlock>> {
    let (dv, dh) = second_order_diff(u);
    extract_blocks(&dv, &dh, geom)
}

/// `sum_b ||L_b||_*`.
pub fn s3ttv_value(u: &HSCube, geom: &BlockGeometry) -> Result<f64> {
    let blocks = structure_tensors(u, geom)?;
    let norms: Vec<f64> = blocks
        .par_iter()
        .map(|b| nuclear_norm(&b.matrix, b.block_index))
        .collect::<Result<_>>()?;
    Ok(norms.iter().sum())
}

/// `||Dv Ds u||_1 + ||Dh Ds u||_1`.
pub fn sstv_value(u: &HSCube) -> f64 {
    let (dv, dh) = second_order_diff(u);
    dv.norm1() + dh.norm1()
}

/// Value of the selected regularizer at `u`.
pub fn regularizer_value(kind: Regularizer, u: &HSCube, geom: &BlockGeometry) -> Result<f64> {
    match kind {
        Regularizer::S3ttv => s3ttv_value(u, geom),
        Regularizer::Sstv => Ok(sstv_value(u)),
    }
}
