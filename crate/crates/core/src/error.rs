use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the denoising library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cube data length {len} does not match dimensions {n1}x{n2}x{n3}")]
    LengthMismatch {
        n1: usize,
        n2: usize,
        n3: usize,
        len: usize,
    },
    #[error("cube dimensions must be positive, got {n1}x{n2}x{n3}")]
    EmptyDimension { n1: usize, n2: usize, n3: usize },
    #[error("non-finite value at linear index {index}")]
    NonFinite { index: usize },
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize, usize),
        found: (usize, usize, usize),
    },
    #[error("invalid bounds: lower {lower} must be strictly below upper {upper}")]
    InvalidBounds { lower: f64, upper: f64 },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("block geometry {block_h}x{block_w} does not fit a {n1}x{n2} spatial grid")]
    IncompatibleGeometry {
        block_h: usize,
        block_w: usize,
        n1: usize,
        n2: usize,
    },
    #[error("SVD failed to converge on block {block}")]
    SvdFailure { block: usize },
    #[error("numerical failure at iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("input cube is not normalized to [0, 1] (found range [{min}, {max}]); rescale it first")]
    NotNormalized { min: f64, max: f64 },
    #[error("bad magic in {path}: expected \"HSC1\", found {found:?}")]
    BadMagic { path: PathBuf, found: [u8; 4] },
    #[error("unsupported dtype code {code} in {path}")]
    UnsupportedDtype { path: PathBuf, code: u8 },
    #[error("truncated payload in {path}: expected {expected} bytes, found {found}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("band {band} out of range for a cube with {n3} bands")]
    BandOutOfRange { band: usize, n3: usize },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
