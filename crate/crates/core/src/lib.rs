//! Mixed-noise removal for hyperspectral image cubes.

pub mod cli;
pub mod cube;
pub mod degrade;
pub mod error;
pub mod io;
pub mod metrics;
pub mod prox;
pub mod regularizer;
pub mod solver;
pub mod synthetic;

pub use cube::{Axis, HSCube};
pub use error::{Error, Result};
pub use nalgebra::DMatrix;
