//! Proximity operators and projections.
//!
//! Every operator here is a pure function. The conjugate prox of any function
//! is obtained from its plain prox through Moreau's identity, see
//! [`prox_conjugate`].

use nalgebra::{DMatrix, SymmetricEigen, SVD};

use crate::cube::HSCube;
use crate::error::{Error, Result};

const SVD_EPS: f64 = 1e-15;
const SVD_MAX_ITERS: usize = 10_000;

/// Constraint sets appearing in the denoising problem.
#[derive(Debug, Clone, PartialEq)]
pub enum BallSpec {
    /// `{ x : ||x||_1 <= radius }`.
    L1ZeroCentered { radius: f64 },
    /// `{ x : ||x - center||_2 <= radius }`.
    L2Centered { center: HSCube, radius: f64 },
    /// `{ x : lower <= x_i <= upper }`.
    Box { lower: f64, upper: f64 },
    /// `{ 0 }`.
    ZeroSet,
}

impl BallSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            BallSpec::L1ZeroCentered { radius } | BallSpec::L2Centered { radius, .. } => {
                check_radius(*radius)
            }
            BallSpec::Box { lower, upper } => check_bounds(*lower, *upper),
            BallSpec::ZeroSet => Ok(()),
        }
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, x: &HSCube) -> Result<HSCube> {
        match self {
            BallSpec::L1ZeroCentered { radius } => {
                check_radius(*radius)?;
                Ok(project_l1_ball(x, *radius))
            }
            BallSpec::L2Centered { center, radius } => project_l2_ball(x, center, *radius),
            BallSpec::Box { lower, upper } => project_box(x, *lower, *upper),
            BallSpec::ZeroSet => {
                let (n1, n2, n3) = x.dims();
                Ok(HSCube::zeros(n1, n2, n3))
            }
        }
    }

    pub fn contains(&self, x: &HSCube, tol: f64) -> bool {
        match self {
            BallSpec::L1ZeroCentered { radius } => x.norm1() <= radius + tol,
            BallSpec::L2Centered { center, radius } => x.sub(center).norm2() <= radius + tol,
            BallSpec::Box { lower, upper } => x
                .as_slice()
                .iter()
                .all(|&v| v >= lower - tol && v <= upper + tol),
            BallSpec::ZeroSet => x.as_slice().iter().all(|v| v.abs() <= tol),
        }
    }
}

fn check_radius(radius: f64) -> Result<()> {
    if radius.is_finite() && radius >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "radius",
            reason: format!("must be finite and nonnegative, got {radius}"),
        })
    }
}

fn check_bounds(lower: f64, upper: f64) -> Result<()> {
    if lower < upper {
        Ok(())
    } else {
        Err(Error::InvalidBounds { lower, upper })
    }
}

/// Elementwise clamp into `[lower, upper]`.
pub fn project_box(x: &HSCube, lower: f64, upper: f64) -> Result<HSCube> {
    check_bounds(lower, upper)?;
    Ok(x.map(|v| v.clamp(lower, upper)))
}

/// Radial projection onto the ball of `radius` around `center`.
pub fn project_l2_ball(x: &HSCube, center: &HSCube, radius: f64) -> Result<HSCube> {
    center.ensure_same_dims(x)?;
    check_radius(radius)?;
    let dist = x.sub(center).norm2();
    if dist <= radius {
        return Ok(x.clone());
    }
    let ratio = radius / dist;
    Ok(center.zip_map(x, |c, v| c + ratio * (v - c)))
}

/// Projection onto the zero-centered l1 ball.
pub fn project_l1_ball(x: &HSCube, radius: f64) -> HSCube {
    let data = project_l1_ball_slice(x.as_slice(), radius);
    HSCube::from_parts(x.dims(), data)
}

/// Projection of a plain vector onto `{ z : ||z||_1 <= radius }`.
pub fn project_l1_ball_slice(x: &[f64], radius: f64) -> Vec<f64> {
    match l1_ball_threshold(x, radius) {
        None => x.to_vec(),
        Some(theta) => soft_threshold_slice(x, theta),
    }
}

fn soft_threshold_slice(x: &[f64], theta: f64) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let m = v.abs() - theta;
            if m > 0.0 {
                m.copysign(v)
            } else {
                0.0
            }
        })
        .collect()
}

/// Soft-threshold level for the l1-ball projection, or `None` when `x`
/// already lies in the ball.
///
/// Uses Condat's active-set scan on `|x|`: a single pass builds a candidate
/// set whose running mean tracks the threshold, followed by a cleanup pass
/// that drops entries below it. Observed complexity is linear.
pub fn l1_ball_threshold(x: &[f64], radius: f64) -> Option<f64> {
    let l1: f64 = x.iter().map(|v| v.abs()).sum();
    if l1 <= radius {
        return None;
    }
    if radius <= 0.0 {
        return Some(x.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
    }

    let mut mags = x.iter().map(|v| v.abs());
    let first = mags.next()?;
    let mut active: Vec<f64> = Vec::with_capacity(64);
    let mut parked: Vec<f64> = Vec::new();
    active.push(first);
    let mut rho = first - radius;

    for y in mags {
        if y > rho {
            rho += (y - rho) / (active.len() + 1) as f64;
            if rho > y - radius {
                active.push(y);
            } else {
                parked.append(&mut active);
                active.push(y);
                rho = y - radius;
            }
        }
    }
    for y in parked {
        if y > rho {
            active.push(y);
            rho += (y - rho) / active.len() as f64;
        }
    }
    loop {
        let before = active.len();
        let mut idx = 0;
        while idx < active.len() {
            let y = active[idx];
            if y <= rho {
                active.swap_remove(idx);
                rho += (rho - y) / active.len() as f64;
            } else {
                idx += 1;
            }
        }
        if active.len() == before {
            break;
        }
    }
    // Recompute from the final support to shed the running-mean rounding.
    let sum: f64 = active.iter().sum();
    Some(((sum - radius) / active.len() as f64).max(0.0))
}

/// Projection onto `{ x : ||x||_1 <= radius, Dv x = 0 }`, the vertically
/// flat cubes inside the l1 ball.
///
/// A flat cube is one value per (column, band) repeated over all `n1` rows,
/// so the projection is the l1-ball projection of the column means at radius
/// `radius / n1`, broadcast back down each column.
pub fn project_flat_l1_ball(x: &HSCube, radius: f64) -> HSCube {
    let (n1, n2, n3) = x.dims();
    let means: Vec<f64> = x
        .as_slice()
        .chunks(n1)
        .map(|col| col.iter().sum::<f64>() / n1 as f64)
        .collect();
    let projected = project_l1_ball_slice(&means, radius / n1 as f64);
    let mut data = Vec::with_capacity(n1 * n2 * n3);
    for c in projected {
        data.extend(std::iter::repeat_n(c, n1));
    }
    HSCube::from_parts(x.dims(), data)
}

/// Elementwise soft thresholding, the prox of `gamma * ||.||_1`.
pub fn prox_l1_norm(x: &HSCube, gamma: f64) -> HSCube {
    x.map(|v| {
        let m = v.abs() - gamma;
        if m > 0.0 {
            m.copysign(v)
        } else {
            0.0
        }
    })
}

/// Singular value soft thresholding, the prox of `gamma * ||.||_*`.
///
/// Works on the smaller Gram side: with `M M^T = U diag(sigma^2) U^T`, the
/// result is `U diag(max(1 - gamma / sigma, 0)) U^T M`, and symmetrically with
/// `M^T M` when `M` has fewer columns than rows. Singular values at or below
/// `gamma` drop out, so their eigenvector accuracy does not matter.
///
/// `block` only labels the error when the eigensolver fails to converge.
pub fn prox_nuclear(m: &DMatrix<f64>, gamma: f64, block: usize) -> Result<DMatrix<f64>> {
    if gamma == 0.0 {
        return Ok(m.clone());
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::SvdFailure { block });
    }
    let wide = m.nrows() <= m.ncols();
    let gram = if wide {
        m * m.transpose()
    } else {
        m.transpose() * m
    };
    let eig = SymmetricEigen::try_new(gram, SVD_EPS, SVD_MAX_ITERS)
        .ok_or(Error::SvdFailure { block })?;
    let q = eig.eigenvectors;
    let mut weighted = q.clone();
    for (c, &lambda) in eig.eigenvalues.iter().enumerate() {
        let sigma = lambda.max(0.0).sqrt();
        let w = if sigma > gamma { 1.0 - gamma / sigma } else { 0.0 };
        weighted.column_mut(c).scale_mut(w);
    }
    let filter = weighted * q.transpose();
    Ok(if wide { filter * m } else { m * filter })
}

/// Sum of singular values.
pub fn nuclear_norm(m: &DMatrix<f64>, block: usize) -> Result<f64> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::SvdFailure { block });
    }
    let svd = SVD::try_new(m.clone(), false, false, SVD_EPS, SVD_MAX_ITERS)
        .ok_or(Error::SvdFailure { block })?;
    Ok(svd.singular_values.iter().sum())
}

/// Vector-space operations needed by [`prox_conjugate`].
pub trait ProxVariable: Sized {
    fn scaled(&self, factor: f64) -> Self;
    fn minus(&self, other: &Self) -> Self;
}

impl ProxVariable for HSCube {
    fn scaled(&self, factor: f64) -> Self {
        self.scale(factor)
    }

    fn minus(&self, other: &Self) -> Self {
        self.sub(other)
    }
}

impl ProxVariable for DMatrix<f64> {
    fn scaled(&self, factor: f64) -> Self {
        self * factor
    }

    fn minus(&self, other: &Self) -> Self {
        self - other
    }
}

/// Prox of `gamma * f^*` via Moreau's identity:
/// `x - gamma * prox_{f / gamma}(x / gamma)`.
///
/// `prox_f(z, lambda)` must return `prox_{lambda f}(z)`.
pub fn prox_conjugate<T, F>(x: &T, gamma: f64, prox_f: F) -> Result<T>
where
    T: ProxVariable,
    F: FnOnce(&T, f64) -> Result<T>,
{
    let inner = prox_f(&x.scaled(1.0 / gamma), 1.0 / gamma)?;
    Ok(x.minus(&inner.scaled(gamma)))
}
