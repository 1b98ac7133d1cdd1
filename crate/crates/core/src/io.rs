//! Cube files, band images and JSON side files.
//!
//! A cube file is a 20-byte header followed by the payload:
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 4    | magic `HSC1`                            |
//! | 4      | 4    | `n1`, u32 little-endian                 |
//! | 8      | 4    | `n2`, u32 little-endian                 |
//! | 12     | 4    | `n3`, u32 little-endian                 |
//! | 16     | 1    | dtype code, `1` = f64 little-endian     |
//! | 17     | 3    | reserved, zero                          |
//! | 20     | 8N   | values in [`HSCube`] memory order       |

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::cube::HSCube;
use crate::degrade::{NoiseCase, NoiseSpec};
use crate::error::{Error, Result};
use crate::solver::Radii;

pub const MAGIC: [u8; 4] = *b"HSC1";
pub const DTYPE_F64: u8 = 1;
pub const HEADER_LEN: usize = 20;

/// Serialize a cube to the in-memory file representation.
pub fn encode_cube(cube: &HSCube) -> Vec<u8> {
    let (n1, n2, n3) = cube.dims();
    let mut bytes = Vec::with_capacity(HEADER_LEN + 8 * cube.len());
    bytes.extend_from_slice(&MAGIC);
    for n in [n1, n2, n3] {
        bytes.extend_from_slice(&(n as u32).to_le_bytes());
    }
    bytes.push(DTYPE_F64);
    bytes.extend_from_slice(&[0u8; 3]);
    for v in cube.as_slice() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes
}

/// Parse a cube from file bytes. `path` is only used in error messages.
pub fn decode_cube(bytes: &[u8], path: &Path) -> Result<HSCube> {
    if bytes.len() < HEADER_LEN {
        let mut found = [0u8; 4];
        let k = bytes.len().min(4);
        found[..k].copy_from_slice(&bytes[..k]);
        if found != MAGIC {
            return Err(Error::BadMagic { path: path.into(), found });
        }
        return Err(Error::Truncated {
            path: path.into(),
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let found: [u8; 4] = bytes[..4].try_into().unwrap();
    if found != MAGIC {
        return Err(Error::BadMagic { path: path.into(), found });
    }
    let dim = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let (n1, n2, n3) = (dim(4), dim(8), dim(12));
    if bytes[16] != DTYPE_F64 {
        return Err(Error::UnsupportedDtype {
            path: path.into(),
            code: bytes[16],
        });
    }
    let expected = n1
        .checked_mul(n2)
        .and_then(|x| x.checked_mul(n3))
        .and_then(|x| x.checked_mul(8))
        .ok_or_else(|| Error::InvalidParameter {
            name: "header",
            reason: format!("dimensions {n1}x{n2}x{n3} overflow"),
        })?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(Error::Truncated {
            path: path.into(),
            expected,
            found: payload.len(),
        });
    }
    let data: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    HSCube::new(n1, n2, n3, data)
}

pub fn write_cube(cube: &HSCube, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_cube(cube)).map_err(|e| Error::io(path, e))
}

pub fn read_cube(path: impl AsRef<Path>) -> Result<HSCube> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_cube(&bytes, path)
}

/// Quantize one value for PGM export.
pub fn quantize(value: f64, scale: f64) -> u16 {
    ((value * scale).clamp(0.0, 1.0) * 65535.0 + 0.5).floor() as u16
}

/// Encode band `band` as a 16-bit binary PGM (P5, big-endian samples).
///
/// The image is `n2` wide and `n1` tall. Values are multiplied by `scale`
/// (default 1), clamped to `[0, 1]` and mapped to `0..=65535`.
pub fn encode_band_pgm(cube: &HSCube, band: usize, scale: Option<f64>) -> Result<Vec<u8>> {
    let (n1, n2, n3) = cube.dims();
    if band >= n3 {
        return Err(Error::BandOutOfRange { band, n3 });
    }
    let scale = scale.unwrap_or(1.0);
    if !scale.is_finite() || scale <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "scale",
            reason: format!("must be positive and finite, got {scale}"),
        });
    }
    let mut bytes = format!("P5\n{n2} {n1}\n65535\n").into_bytes();
    bytes.reserve(2 * n1 * n2);
    for i in 0..n1 {
        for j in 0..n2 {
            bytes.extend_from_slice(&quantize(cube.get(i, j, band), scale).to_be_bytes());
        }
    }
    Ok(bytes)
}

pub fn export_band_pgm(
    cube: &HSCube,
    band: usize,
    path: impl AsRef<Path>,
    scale: Option<f64>,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_band_pgm(cube, band, scale)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// What `simulate` records next to the degraded cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseManifest {
    pub dims: (usize, usize, usize),
    pub case: Option<NoiseCase>,
    pub spec: NoiseSpec,
    pub radii: Radii,
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Write `header` then each row, newline-terminated.
pub fn write_csv(header: &str, rows: &[String], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    writeln!(out, "{header}").expect("write to Vec");
    for row in rows {
        writeln!(out, "{row}").expect("write to Vec");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pgm_samples(bytes: &[u8]) -> (usize, usize, Vec<u16>) {
        // Minimal P5 reader: four whitespace-separated tokens then one byte.
        let mut tokens = Vec::new();
        let mut pos = 0;
        while tokens.len() < 4 {
            while bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            let start = pos;
            while !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            tokens.push(std::str::from_utf8(&bytes[start..pos]).unwrap().to_string());
        }
        pos += 1;
        assert_eq!(tokens[0], "P5");
        assert_eq!(tokens[3], "65535");
        let w: usize = tokens[1].parse().unwrap();
        let h: usize = tokens[2].parse().unwrap();
        let samples = bytes[pos..]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect::<Vec<_>>();
        assert_eq!(samples.len(), w * h);
        (w, h, samples)
    }

    #[test]
    fn single_zero_voxel_layout() {
        let bytes = encode_cube(&HSCube::zeros(1, 1, 1));
        assert_eq!(bytes.len(), HEADER_LEN + 8);
        assert_eq!(&bytes[..4], b"HSC1");
        assert_eq!(&bytes[4..16], &[1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(&bytes[16..20], &[1, 0, 0, 0]);
        assert!(bytes[20..].iter().all(|&b| b == 0));
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let cube = HSCube::from_fn(3, 4, 2, |i, j, k| (i as f64 + 0.1) / (j as f64 + 1.7) - k as f64 * 1e-300)
            .unwrap();
        let bytes = encode_cube(&cube);
        let back = decode_cube(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back.dims(), cube.dims());
        for (a, b) in back.as_slice().iter().zip(cube.as_slice()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(bytes, encode_cube(&back));
    }

    #[test]
    fn decode_errors_are_distinct() {
        let good = encode_cube(&HSCube::zeros(2, 2, 2));
        let p = Path::new("x.hsc");

        let mut magic = good.clone();
        magic[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode_cube(&magic, p), Err(Error::BadMagic { found, .. }) if &found == b"XXXX"));

        let short = &good[..HEADER_LEN + 63];
        assert!(matches!(
            decode_cube(short, p),
            Err(Error::Truncated { expected: 64, found: 63, .. })
        ));

        let mut dtype = good.clone();
        dtype[16] = 2;
        assert!(matches!(decode_cube(&dtype, p), Err(Error::UnsupportedDtype { code: 2, .. })));

        let mut nan = good.clone();
        nan[HEADER_LEN + 8..HEADER_LEN + 16].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(decode_cube(&nan, p), Err(Error::NonFinite { index: 1 })));

        assert!(matches!(decode_cube(b"HS", p), Err(Error::BadMagic { .. })));
        assert!(matches!(decode_cube(b"HSC1\0\0", p), Err(Error::Truncated { .. })));
    }

    #[test]
    fn pgm_half_maps_to_32768() {
        let cube = HSCube::filled(3, 5, 2, 0.5);
        let (w, h, samples) = pgm_samples(&encode_band_pgm(&cube, 1, None).unwrap());
        assert_eq!((w, h), (5, 3));
        assert!(samples.iter().all(|&s| s == 32768));
    }

    #[test]
    fn pgm_scale_saturates() {
        assert_eq!(quantize(0.8, 1.5), 65535);
        assert_eq!(quantize(-0.2, 1.0), 0);
        assert_eq!(quantize(1.0, 1.0), 65535);
    }

    #[test]
    fn pgm_matches_band_within_one_step() {
        let cube = HSCube::from_fn(6, 7, 3, |i, j, k| ((i * 7 + j * 3 + k) % 11) as f64 / 9.0 - 0.05).unwrap();
        for scale in [None, Some(1.5)] {
            let (_, _, samples) = pgm_samples(&encode_band_pgm(&cube, 2, scale).unwrap());
            for i in 0..6 {
                for j in 0..7 {
                    let expect = (cube.get(i, j, 2) * scale.unwrap_or(1.0)).clamp(0.0, 1.0);
                    let got = samples[i * 7 + j] as f64 / 65535.0;
                    assert!((got - expect).abs() <= 1.0 / 65535.0);
                }
            }
        }
    }

    #[test]
    fn pgm_band_out_of_range() {
        assert!(matches!(
            encode_band_pgm(&HSCube::zeros(2, 2, 2), 2, None),
            Err(Error::BandOutOfRange { band: 2, n3: 2 })
        ));
    }
}
