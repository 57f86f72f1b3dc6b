//! 8-bit binary graymaps and area-averaging resampling.
//!
//! Grids here are row-major with the first row at the top of the domain
//! (largest y).

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ExtendedColorType, ImageEncoder};

use crate::error::{Error, Result};
use crate::fem::GridMesh;

/// A row-major grid of values, top row first.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

impl Grid {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::DimensionMismatch {
                what: "grid values",
                expected: width * height,
                actual: values.len(),
            });
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    /// Lays element values out as an image of the mesh.
    pub fn from_elements(mesh: &GridMesh, values: &[f64]) -> Result<Self> {
        if values.len() != mesh.n_elements() {
            return Err(Error::DimensionMismatch {
                what: "element values",
                expected: mesh.n_elements(),
                actual: values.len(),
            });
        }
        let (nelx, nely) = (mesh.nelx(), mesh.nely());
        let mut out = Vec::with_capacity(values.len());
        for row in 0..nely {
            let ey = nely - 1 - row;
            out.extend((0..nelx).map(|ex| values[mesh.element_index(ex, ey)]));
        }
        Self::new(nelx, nely, out)
    }

    /// Inverse of [`Grid::from_elements`].
    pub fn to_elements(&self, mesh: &GridMesh) -> Result<Vec<f64>> {
        if (self.width, self.height) != (mesh.nelx(), mesh.nely()) {
            return Err(Error::DimensionMismatch {
                what: "grid size against mesh",
                expected: mesh.n_elements(),
                actual: self.values.len(),
            });
        }
        let mut out = vec![0.0; mesh.n_elements()];
        for row in 0..self.height {
            let ey = self.height - 1 - row;
            for ex in 0..self.width {
                out[mesh.element_index(ex, ey)] = self.values[row * self.width + ex];
            }
        }
        Ok(out)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Quantizes values in [0, 1] to 8 bits.
    pub fn to_gray(&self) -> Vec<u8> {
        self.values
            .iter()
            .map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    pub fn from_gray(width: usize, height: usize, pixels: &[u8]) -> Result<Self> {
        Self::new(
            width,
            height,
            pixels.iter().map(|&p| f64::from(p) / 255.0).collect(),
        )
    }

    /// Area-averaging resample: every output pixel is the mean of the input
    /// area it covers, with fractional overlaps weighted.
    pub fn resize(&self, width: usize, height: usize) -> Result<Grid> {
        if width == 0 || height == 0 {
            return Err(Error::Resize(format!("target size {width}x{height}")));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Resize("empty source image".into()));
        }
        if (width, height) == (self.width, self.height) {
            return Ok(self.clone());
        }
        let wx = overlap_weights(self.width, width);
        let wy = overlap_weights(self.height, height);
        let mut values = vec![0.0; width * height];
        for (oy, row_w) in wy.iter().enumerate() {
            for (ox, col_w) in wx.iter().enumerate() {
                let mut sum = 0.0;
                for &(iy, fy) in row_w {
                    for &(ix, fx) in col_w {
                        sum += fy * fx * self.values[iy * self.width + ix];
                    }
                }
                values[oy * width + ox] = sum;
            }
        }
        Grid::new(width, height, values)
    }
}

/// For each output cell, the input cells it overlaps and their weights
/// (summing to one).
fn overlap_weights(n_in: usize, n_out: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|o| {
            let lo = o as f64 * scale;
            let hi = (o + 1) as f64 * scale;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(n_in);
            (first..last)
                .filter_map(|i| {
                    let w = (hi.min(i as f64 + 1.0) - lo.max(i as f64)) / scale;
                    (w > 0.0).then_some((i, w))
                })
                .collect()
        })
        .collect()
}

pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<()> {
    if pixels.len() != width * height {
        return Err(Error::DimensionMismatch {
            what: "graymap pixels",
            expected: width * height,
            actual: pixels.len(),
        });
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let encoder = PnmEncoder::new(BufWriter::new(file))
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary));
    encoder
        .write_image(pixels, width as u32, height as u32, ExtendedColorType::L8)
        .map_err(|e| archive_err(path, e))
}

/// Reads any graymap as 8-bit pixels.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let reader = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let img = reader.decode().map_err(|e| archive_err(path, e))?.into_luma8();
    let (w, h) = img.dimensions();
    Ok((w as usize, h as usize, img.into_raw()))
}

pub fn write_grid(path: &Path, grid: &Grid) -> Result<()> {
    write_pgm(path, grid.width, grid.height, &grid.to_gray())
}

pub fn read_grid(path: &Path) -> Result<Grid> {
    let (w, h, pixels) = read_pgm(path)?;
    Grid::from_gray(w, h, &pixels)
}

fn archive_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Archive {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}
