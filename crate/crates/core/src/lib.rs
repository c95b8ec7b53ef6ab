//! Complex-geometrical-optics laboratory for the two-dimensional partial-data
//! Calderón problem on the unit disk.

pub mod cache;
pub mod carleman;
pub mod cauchy;
pub mod cgo;
pub mod completion;
pub mod error;
pub mod fit;
pub mod grid;
pub mod phase;
pub mod poly;
pub mod report;
pub mod runner;
pub mod scenario;
pub mod stationary;

pub use error::{LabError, Result};
pub use grid::{DiskGrid, GridFunction};
pub use poly::HolomorphicPolynomial;
