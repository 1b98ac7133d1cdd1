//! Mixed-noise simulation and constraint radius calibration.
//!
//! An observation is `v = u + s + t + n`: salt-and-pepper residual `s`,
//! vertical stripes `t` and white Gaussian noise `n`. Salt-and-pepper voxels
//! are replaced by 0 or 1 and receive no Gaussian noise.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cube::HSCube;
use crate::error::{Error, Result};
use crate::solver::Radii;

// Independent ChaCha streams per noise component.
const STREAM_SPARSE: u64 = 1;
const STREAM_STRIPE: u64 = 2;
const STREAM_GAUSSIAN: u64 = 3;

/// Noise parameters of one simulated observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub gaussian_sigma: f64,
    pub sparse_rate: f64,
    pub stripe_rate: f64,
    pub stripe_amplitude: f64,
    pub rho: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            gaussian_sigma: 0.0,
            sparse_rate: 0.0,
            stripe_rate: 0.0,
            stripe_amplitude: 0.5,
            rho: 0.95,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        if !(self.gaussian_sigma.is_finite() && self.gaussian_sigma >= 0.0) {
            return bad("sigma", "must be finite and nonnegative");
        }
        if !(0.0..=1.0).contains(&self.sparse_rate) {
            return bad("sparse_rate", "must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.stripe_rate) {
            return bad("stripe_rate", "must lie in [0, 1]");
        }
        if !(self.stripe_amplitude.is_finite() && self.stripe_amplitude > 0.0) {
            return bad("stripe_amplitude", "must be positive");
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return bad("rho", "must lie in (0, 1]");
        }
        Ok(())
    }
}

/// The six mixed-noise scenarios of the experimental protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NoiseCase {
    Case1,
    Case2,
    Case3,
    Case4,
    Case5,
    Case6,
}

impl NoiseCase {
    pub const ALL: [NoiseCase; 6] = [
        NoiseCase::Case1,
        NoiseCase::Case2,
        NoiseCase::Case3,
        NoiseCase::Case4,
        NoiseCase::Case5,
        NoiseCase::Case6,
    ];

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1..=6 => Ok(Self::ALL[n as usize - 1]),
            _ => Err(Error::InvalidParameter {
                name: "case",
                reason: format!("expected 1..=6, got {n}"),
            }),
        }
    }

    pub fn number(self) -> u8 {
        Self::ALL.iter().position(|&c| c == self).unwrap() as u8 + 1
    }

    /// `(sigma, p_s, p_t)`.
    pub fn levels(self) -> (f64, f64, f64) {
        match self {
            NoiseCase::Case1 => (0.05, 0.05, 0.0),
            NoiseCase::Case2 => (0.1, 0.05, 0.0),
            NoiseCase::Case3 => (0.05, 0.0, 0.05),
            NoiseCase::Case4 => (0.1, 0.0, 0.05),
            NoiseCase::Case5 => (0.05, 0.05, 0.05),
            NoiseCase::Case6 => (0.1, 0.05, 0.05),
        }
    }

    pub fn spec(self, seed: u64) -> NoiseSpec {
        let (gaussian_sigma, sparse_rate, stripe_rate) = self.levels();
        NoiseSpec {
            gaussian_sigma,
            sparse_rate,
            stripe_rate,
            seed,
            ..NoiseSpec::default()
        }
    }
}

impl fmt::Display for NoiseCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Case {}", self.number())
    }
}

impl FromStr for NoiseCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let digits = s.trim().trim_start_matches(|c: char| !c.is_ascii_digit());
        let n = digits.parse::<u8>().map_err(|_| Error::InvalidParameter {
            name: "case",
            reason: format!("cannot parse `{s}`"),
        })?;
        Self::from_number(n)
    }
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian_field(len: usize, sigma: f64, seed: u64, skip: Option<&[bool]>) -> Vec<f64> {
    if sigma == 0.0 {
        return vec![0.0; len];
    }
    let normal = Normal::new(0.0, sigma).expect("sigma is finite and nonnegative");
    let mut rng = rng_for(seed, STREAM_GAUSSIAN);
    (0..len)
        .map(|p| {
            // Always draw so the field does not depend on the mask.
            let z = normal.sample(&mut rng);
            match skip {
                Some(mask) if mask[p] => 0.0,
                _ => z,
            }
        })
        .collect()
}

/// `u + n` with i.i.d. `N(0, sigma^2)` noise.
pub fn add_gaussian(u: &HSCube, sigma: f64, seed: u64) -> Result<HSCube> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "sigma",
            reason: format!("must be finite and nonnegative, got {sigma}"),
        });
    }
    let noise = HSCube::from_parts(u.dims(), gaussian_field(u.len(), sigma, seed, None));
    Ok(u.add(&noise))
}

fn check_rate(name: &'static str, rate: f64) -> Result<()> {
    if (0.0..=1.0).contains(&rate) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must lie in [0, 1], got {rate}"),
        })
    }
}

fn check_normalized(u: &HSCube) -> Result<()> {
    let (min, max) = (u.min(), u.max());
    if min < 0.0 || max > 1.0 {
        return Err(Error::NotNormalized { min, max });
    }
    Ok(())
}

fn sparse_voxels(len: usize, rate: f64, seed: u64) -> Vec<(usize, f64)> {
    let count = (rate * len as f64).round() as usize;
    let mut rng = rng_for(seed, STREAM_SPARSE);
    let mut picked: Vec<usize> = index::sample(&mut rng, len, count).into_vec();
    picked.sort_unstable();
    picked
        .into_iter()
        .map(|p| (p, if rng.random_bool(0.5) { 1.0 } else { 0.0 }))
        .collect()
}

/// Replaces `round(rate * N)` voxels by 0 or 1 (equal odds).
///
/// Returns the corrupted cube and the additive residual `corrupted - u`.
pub fn add_salt_pepper(u: &HSCube, rate: f64, seed: u64) -> Result<(HSCube, HSCube)> {
    check_rate("sparse_rate", rate)?;
    check_normalized(u)?;
    let mut corrupted = u.clone();
    let mut residual = vec![0.0; u.len()];
    for (p, value) in sparse_voxels(u.len(), rate, seed) {
        residual[p] = value - u.as_slice()[p];
        corrupted.as_mut_slice()[p] = value;
    }
    Ok((corrupted, HSCube::from_parts(u.dims(), residual)))
}

fn stripe_field(dims: (usize, usize, usize), rate: f64, amplitude: f64, seed: u64) -> HSCube {
    let (n1, n2, n3) = dims;
    let pairs = n2 * n3;
    let count = (rate * pairs as f64).round() as usize;
    let mut rng = rng_for(seed, STREAM_STRIPE);
    let mut picked: Vec<usize> = index::sample(&mut rng, pairs, count).into_vec();
    picked.sort_unstable();
    let mut field = vec![0.0; n1 * n2 * n3];
    for pair in picked {
        // pair = j + n2 * k; a column of band k is contiguous.
        let value = rng.random_range(-amplitude..=amplitude);
        let start = pair * n1;
        field[start..start + n1].fill(value);
    }
    HSCube::from_parts(dims, field)
}

/// Adds vertical stripes to `round(rate * n2 * n3)` (column, band) pairs,
/// each with one intensity drawn uniformly from `[-amplitude, amplitude]`.
///
/// Returns the corrupted cube and the stripe component itself.
pub fn add_stripes(u: &HSCube, rate: f64, amplitude: f64, seed: u64) -> Result<(HSCube, HSCube)> {
    check_rate("stripe_rate", rate)?;
    if !(amplitude.is_finite() && amplitude > 0.0) {
        return Err(Error::InvalidParameter {
            name: "stripe_amplitude",
            reason: format!("must be positive, got {amplitude}"),
        });
    }
    let stripes = stripe_field(u.dims(), rate, amplitude, seed);
    Ok((u.add(&stripes), stripes))
}

/// A simulated observation with its exact noise decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Degraded {
    pub observed: HSCube,
    pub sparse: HSCube,
    pub stripe: HSCube,
    pub gaussian: HSCube,
}

/// Applies the full mixed-noise model to a clean cube in `[0, 1]`.
///
/// `observed` is computed as `((u + sparse) + stripe) + gaussian` voxel by
/// voxel, so re-adding the components in that order reproduces it bit-wise.
/// The observation is not clamped.
pub fn simulate(clean: &HSCube, spec: &NoiseSpec) -> Result<Degraded> {
    spec.validate()?;
    check_normalized(clean)?;
    let (_, sparse) = add_salt_pepper(clean, spec.sparse_rate, spec.seed)?;
    let replaced: Vec<bool> = {
        let mut mask = vec![false; clean.len()];
        for (p, _) in sparse_voxels(clean.len(), spec.sparse_rate, spec.seed) {
            mask[p] = true;
        }
        mask
    };
    let stripe = if spec.stripe_rate > 0.0 {
        stripe_field(clean.dims(), spec.stripe_rate, spec.stripe_amplitude, spec.seed)
    } else {
        let (n1, n2, n3) = clean.dims();
        HSCube::zeros(n1, n2, n3)
    };
    let gaussian = HSCube::from_parts(
        clean.dims(),
        gaussian_field(clean.len(), spec.gaussian_sigma, spec.seed, Some(&replaced)),
    );
    let observed = clean.add(&sparse).add(&stripe).add(&gaussian);
    Ok(Degraded {
        observed,
        sparse,
        stripe,
        gaussian,
    })
}

/// Constraint radii from the noise statistics:
/// `alpha = rho N p_s / 2`, `beta = rho 0.5 N p_t (1 - p_s) / 2`,
/// `epsilon = rho sqrt(sigma^2 N (1 - p_s))`.
pub fn calibrate_radii(spec: &NoiseSpec, n_total: usize) -> Radii {
    let n = n_total as f64;
    let (rho, ps, pt, sigma) = (spec.rho, spec.sparse_rate, spec.stripe_rate, spec.gaussian_sigma);
    Radii {
        alpha: rho * n * ps / 2.0,
        beta: rho * 0.5 * n * pt * (1.0 - ps) / 2.0,
        epsilon: rho * (sigma * sigma * n * (1.0 - ps)).sqrt(),
    }
}
