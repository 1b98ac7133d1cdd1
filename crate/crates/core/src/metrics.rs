//! Band-averaged quality metrics: MPSNR and MSSIM.
//!
//! Both assume intensities normalized to `[0, 1]`, so the PSNR peak and the
//! SSIM dynamic range are 1. References outside that range are rejected.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cube::HSCube;
use crate::error::{Error, Result};

/// Per-band PSNR is capped here so a perfect band stays finite.
pub const PSNR_CAP_DB: f64 = 300.0;

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const SSIM_RANGE: f64 = 1.0;

/// Metrics of an estimate against a reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mpsnr_db: f64,
    pub mssim: f64,
    pub per_band_psnr: Vec<f64>,
    pub per_band_ssim: Vec<f64>,
}

/// Column header of [`MetricReport::csv_row`].
pub const CSV_HEADER: &str = "dataset,case,method,mpsnr,mssim";

impl MetricReport {
    /// One `dataset,case,method,mpsnr,mssim` line, without a newline.
    pub fn csv_row(&self, dataset: &str, case: &str, method: &str) -> String {
        format!(
            "{dataset},{case},{method},{:.4},{:.4}",
            self.mpsnr_db, self.mssim
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn check_pair(estimate: &HSCube, reference: &HSCube) -> Result<()> {
    reference.ensure_same_dims(estimate)?;
    let (min, max) = (reference.min(), reference.max());
    if min < 0.0 || max > 1.0 {
        return Err(Error::NotNormalized { min, max });
    }
    Ok(())
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Per-band PSNR `10 log10(n1 n2 / ||e_k||^2)` and its mean over bands.
pub fn mpsnr(estimate: &HSCube, reference: &HSCube) -> Result<(f64, Vec<f64>)> {
    check_pair(estimate, reference)?;
    let pixels = (estimate.n1() * estimate.n2()) as f64;
    let per_band: Vec<f64> = (0..estimate.n3())
        .map(|k| {
            let err: f64 = estimate
                .band(k)
                .iter()
                .zip(reference.band(k))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if err == 0.0 {
                PSNR_CAP_DB
            } else {
                (10.0 * (pixels / err).log10()).min(PSNR_CAP_DB)
            }
        })
        .collect();
    Ok((mean(&per_band), per_band))
}

/// Per-band SSIM and its mean over bands.
pub fn mssim(estimate: &HSCube, reference: &HSCube) -> Result<(f64, Vec<f64>)> {
    check_pair(estimate, reference)?;
    let (n1, n2, _) = estimate.dims();
    let kernel = gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA);
    let per_band: Vec<f64> = (0..estimate.n3())
        .into_par_iter()
        .map(|k| ssim_band(estimate.band(k), reference.band(k), n1, n2, &kernel))
        .collect();
    Ok((mean(&per_band), per_band))
}

/// Both metrics in one report.
pub fn evaluate(estimate: &HSCube, reference: &HSCube) -> Result<MetricReport> {
    let (mpsnr_db, per_band_psnr) = mpsnr(estimate, reference)?;
    let (mssim, per_band_ssim) = mssim(estimate, reference)?;
    Ok(MetricReport {
        mpsnr_db,
        mssim,
        per_band_psnr,
        per_band_ssim,
    })
}

pub(crate) fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size / 2) as f64;
    let raw: Vec<f64> = (0..size)
        .map(|a| {
            let d = a as f64 - half;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Half-sample symmetric reflection: `-1 -> 0`, `n -> n - 1`.
#[inline]
pub(crate) fn reflect(idx: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let r = idx.rem_euclid(period);
    if r < n as isize {
        r as usize
    } else {
        (period - 1 - r) as usize
    }
}

/// Separable Gaussian filter of an `n1 x n2` plane (vertical index fastest).
fn blur(plane: &[f64], n1: usize, n2: usize, kernel: &[f64]) -> Vec<f64> {
    let half = (kernel.len() / 2) as isize;
    let mut vertical = vec![0.0; plane.len()];
    for j in 0..n2 {
        for i in 0..n1 {
            let mut acc = 0.0;
            for (a, w) in kernel.iter().enumerate() {
                let ii = reflect(i as isize + a as isize - half, n1);
                acc += w * plane[ii + n1 * j];
            }
            vertical[i + n1 * j] = acc;
        }
    }
    let mut out = vec![0.0; plane.len()];
    for j in 0..n2 {
        for i in 0..n1 {
            let mut acc = 0.0;
            for (b, w) in kernel.iter().enumerate() {
                let jj = reflect(j as isize + b as isize - half, n2);
                acc += w * vertical[i + n1 * jj];
            }
            out[i + n1 * j] = acc;
        }
    }
    out
}

fn ssim_band(x: &[f64], y: &[f64], n1: usize, n2: usize, kernel: &[f64]) -> f64 {
    let c1 = (SSIM_K1 * SSIM_RANGE).powi(2);
    let c2 = (SSIM_K2 * SSIM_RANGE).powi(2);
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let mu_x = blur(x, n1, n2, kernel);
    let mu_y = blur(y, n1, n2, kernel);
    let e_xx = blur(&xx, n1, n2, kernel);
    let e_yy = blur(&yy, n1, n2, kernel);
    let e_xy = blur(&xy, n1, n2, kernel);
    let map_sum: f64 = (0..x.len())
        .map(|p| {
            let (mx, my) = (mu_x[p], mu_y[p]);
            let var_x = e_xx[p] - mx * mx;
            let var_y = e_yy[p] - my * my;
            let cov = e_xy[p] - mx * my;
            let num = (2.0 * (mx * my) + c1) * (2.0 * cov + c2);
            let den = (mx * mx + my * my + c1) * (var_x + var_y + c2);
            num / den
        })
        .sum();
    map_sum / x.len() as f64
}
