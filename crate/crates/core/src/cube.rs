//! Hyperspectral cube storage and periodic difference operators.
//!
//! A cube holds `n1 x n2 x n3` voxels (vertical, horizontal, band). Storage is
//! band-sequential: all voxels of band 0, then band 1, and so on. Inside a band
//! the vertical index varies fastest, so voxel `(i, j, k)` lives at
//! `i + n1 * (j + n2 * k)`.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Direction of a forward difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Vertical,
    Horizontal,
    Spectral,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Vertical, Axis::Horizontal, Axis::Spectral];
}

/// A dense, finite, double-precision hyperspectral cube.
#[derive(Debug, Clone, PartialEq)]
pub struct HSCube {
    n1: usize,
    n2: usize,
    n3: usize,
    data: Vec<f64>,
}

impl HSCube {
    /// Builds a cube from band-sequential data, rejecting wrong lengths and
    /// non-finite entries.
    pub fn new(n1: usize, n2: usize, n3: usize, data: Vec<f64>) -> Result<Self> {
        if n1 == 0 || n2 == 0 || n3 == 0 {
            return Err(Error::EmptyDimension { n1, n2, n3 });
        }
        if data.len() != n1 * n2 * n3 {
            return Err(Error::LengthMismatch {
                n1,
                n2,
                n3,
                len: data.len(),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { n1, n2, n3, data })
    }

    /// Internal constructor for results of arithmetic on already-validated cubes.
    pub(crate) fn from_parts(dims: (usize, usize, usize), data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dims.0 * dims.1 * dims.2);
        Self {
            n1: dims.0,
            n2: dims.1,
            n3: dims.2,
            data,
        }
    }

    pub fn zeros(n1: usize, n2: usize, n3: usize) -> Self {
        Self::filled(n1, n2, n3, 0.0)
    }

    pub fn filled(n1: usize, n2: usize, n3: usize, value: f64) -> Self {
        assert!(n1 > 0 && n2 > 0 && n3 > 0, "cube dimensions must be positive");
        assert!(value.is_finite());
        Self::from_parts((n1, n2, n3), vec![value; n1 * n2 * n3])
    }

    /// Builds a cube by evaluating `f(i, j, k)` at every voxel.
    pub fn from_fn(
        n1: usize,
        n2: usize,
        n3: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(n1 * n2 * n3);
        for k in 0..n3 {
            for j in 0..n2 {
                for i in 0..n1 {
                    data.push(f(i, j, k));
                }
            }
        }
        Self::new(n1, n2, n3, data)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n1, self.n2, self.n3)
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn n3(&self) -> usize {
        self.n3
    }

    /// Total voxel count `N`.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n1 * (j + self.n2 * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(i, j, k)]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Voxels of band `k`, vertical index fastest.
    pub fn band(&self, k: usize) -> &[f64] {
        let plane = self.n1 * self.n2;
        &self.data[k * plane..(k + 1) * plane]
    }

    pub fn ensure_same_dims(&self, other: &HSCube) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                found: other.dims(),
            });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> HSCube {
        let data = self.data.par_iter().map(|&v| f(v)).collect();
        Self::from_parts(self.dims(), data)
    }

    /// Elementwise combination of two cubes with the same dimensions.
    pub fn zip_map(&self, other: &HSCube, f: impl Fn(f64, f64) -> f64 + Sync) -> HSCube {
        assert_eq!(self.dims(), other.dims(), "cube dimensions differ");
        let data = self
            .data
            .par_iter()
            .zip(other.data.par_iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::from_parts(self.dims(), data)
    }

    pub fn add(&self, other: &HSCube) -> HSCube {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &HSCube) -> HSCube {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, factor: f64) -> HSCube {
        self.map(|v| factor * v)
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, factor: f64, other: &HSCube) -> HSCube {
        self.zip_map(other, |a, b| a + factor * b)
    }

    pub fn add_assign_scaled(&mut self, factor: f64, other: &HSCube) {
        assert_eq!(self.dims(), other.dims(), "cube dimensions differ");
        self.data
            .par_iter_mut()
            .zip(other.data.par_iter())
            .for_each(|(a, &b)| *a += factor * b);
    }

    // Reductions run sequentially so results are bit-reproducible.

    pub fn dot(&self, other: &HSCube) -> f64 {
        assert_eq!(self.dims(), other.dims(), "cube dimensions differ");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn norm2(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn norm1(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }
}

#[inline]
fn next(i: usize, n: usize) -> usize {
    if i + 1 == n {
        0
    } else {
        i + 1
    }
}

#[inline]
fn prev(i: usize, n: usize) -> usize {
    if i == 0 {
        n - 1
    } else {
        i - 1
    }
}

/// Periodic forward difference `out[p] = x[p + e_axis] - x[p]`.
pub fn forward_diff(x: &HSCube, axis: Axis) -> HSCube {
    shifted_diff(x, axis, true)
}

/// Adjoint of [`forward_diff`]: `out[p] = y[p - e_axis] - y[p]`.
pub fn adjoint_diff(y: &HSCube, axis: Axis) -> HSCube {
    shifted_diff(y, axis, false)
}

fn shifted_diff(x: &HSCube, axis: Axis, forward: bool) -> HSCube {
    let (n1, n2, n3) = x.dims();
    let plane = n1 * n2;
    let src = x.as_slice();
    let step = |i: usize, n: usize| if forward { next(i, n) } else { prev(i, n) };
    let mut out = vec![0.0; src.len()];
    out.par_chunks_mut(plane).enumerate().for_each(|(k, band)| {
        let here = &src[k * plane..(k + 1) * plane];
        match axis {
            Axis::Vertical => {
                for j in 0..n2 {
                    let col = j * n1;
                    for i in 0..n1 {
                        band[col + i] = here[col + step(i, n1)] - here[col + i];
                    }
                }
            }
            Axis::Horizontal => {
                for j in 0..n2 {
                    let col = j * n1;
                    let other = step(j, n2) * n1;
                    for i in 0..n1 {
                        band[col + i] = here[other + i] - here[col + i];
                    }
                }
            }
            Axis::Spectral => {
                let kk = step(k, n3);
                let there = &src[kk * plane..(kk + 1) * plane];
                for p in 0..plane {
                    band[p] = there[p] - here[p];
                }
            }
        }
    });
    HSCube::from_parts(x.dims(), out)
}

/// Second-order spatio-spectral differences `(Dv Ds x, Dh Ds x)`.
pub fn second_order_diff(x: &HSCube) -> (HSCube, HSCube) {
    let ds = forward_diff(x, Axis::Spectral);
    (
        forward_diff(&ds, Axis::Vertical),
        forward_diff(&ds, Axis::Horizontal),
    )
}

/// Adjoint of [`second_order_diff`]: `Ds^T (Dv^T a + Dh^T b)`.
pub fn second_order_diff_adjoint(dv: &HSCube, dh: &HSCube) -> HSCube {
    let spatial = adjoint_diff(dv, Axis::Vertical).add(&adjoint_diff(dh, Axis::Horizontal));
    adjoint_diff(&spatial, Axis::Spectral)
}
