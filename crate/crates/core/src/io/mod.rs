//! Configuration, archives and file formats.

pub mod archive;
pub mod config;
pub mod dataset;
pub mod density;
pub mod fields;
pub mod fixtures;
pub mod pgm;
pub mod tables;
