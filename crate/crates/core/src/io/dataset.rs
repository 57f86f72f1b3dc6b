//! Surrogate training sets: resized density images plus an index.
//!
//! `index.csv` columns are `image,v,c,v0,r,iter`; `image` is relative to
//! the dataset directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::archive::RunArchive;
use crate::io::pgm::{write_grid, Grid};

pub const INDEX_FILE: &str = "index.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRow {
    pub image: String,
    pub v: f64,
    pub c: f64,
    pub v0: f64,
    pub r: usize,
    pub iter: usize,
}

/// One image per archive from its final density, resized to `size`
/// (native when `None`).
pub fn build_dataset(
    archives: &[PathBuf],
    out_dir: &Path,
    size: Option<(usize, usize)>,
) -> Result<Vec<IndexRow>> {
    if let Some((w, h)) = size {
        if w == 0 || h == 0 {
            return Err(Error::Resize(format!("target size {w}x{h}")));
        }
    }
    let mut loaded = Vec::with_capacity(archives.len());
    for dir in archives {
        loaded.push(RunArchive::open(dir)?);
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut rows = Vec::with_capacity(loaded.len());
    for (i, archive) in loaded.iter().enumerate() {
        let last = archive.last().ok_or_else(|| Error::Archive {
            path: archive.dir.clone(),
            reason: "empty history".into(),
        })?;
        let d = &archive.density;
        let grid = Grid::new(d.nelx, d.nely, d.rows.clone())?;
        let grid = match size {
            Some((w, h)) => grid.resize(w, h)?,
            None => grid,
        };
        let stem = archive
            .dir
            .file_name()
            .map_or_else(|| "run".to_string(), |s| s.to_string_lossy().into_owned());
        let image = format!("{i:03}_{stem}.pgm");
        write_grid(&out_dir.join(&image), &grid)?;
        rows.push(IndexRow {
            image,
            v: last.v,
            c: last.c,
            v0: archive.manifest.v0,
            r: archive.manifest.erosion_radius,
            iter: last.iter,
        });
    }
    write_index(&out_dir.join(INDEX_FILE), &rows)?;
    Ok(rows)
}

pub fn write_index(path: &Path, rows: &[IndexRow]) -> Result<()> {
    crate::io::tables::write_rows(path, rows)
}

pub fn read_index(path: &Path) -> Result<Vec<IndexRow>> {
    crate::io::tables::read_rows(path)
}
