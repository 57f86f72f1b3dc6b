//! Topology optimization on regular 2D grids with logarithmic volume growth
//! and a minimum-thickness erosion filter.

pub mod error;
pub mod erosion;
pub mod fem;
pub mod freq;
pub mod filter;
pub mod growth;
pub mod io;
pub mod simp;

pub use error::{Error, Result};
