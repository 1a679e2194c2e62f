//! Discrete biharmonic operator zoo on masked 2D cell grids.

pub mod error;
pub mod grid;
pub mod harness;
pub mod laplace;
pub mod linalg;
pub mod operators;
pub mod toolbox;
pub mod zoo;

pub use error::{Error, Result};
