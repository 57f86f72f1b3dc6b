//! Plain-text density fields.
//!
//! ```text
//! topogrow-density 1
//! 3 2
//! 0.5 0.5 1
//! 0.001 0.5 0.5
//! ```
//!
//! Line two is `nelx nely`; then `nely` rows of `nelx` values, top row
//! first. Values are written in shortest round-trip form. A `.pgm` path is
//! also accepted on reading, with pixels mapped to `p / 255`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fem::GridMesh;
use crate::io::pgm::{read_grid, Grid};

pub const DENSITY_HEADER: &str = "topogrow-density 1";

#[derive(Debug, Clone, PartialEq)]
pub struct DensityFile {
    pub nelx: usize,
    pub nely: usize,
    /// Row-major, top row first.
    pub rows: Vec<f64>,
}

impl DensityFile {
    pub fn from_elements(mesh: &GridMesh, values: &[f64]) -> Result<Self> {
        let grid = Grid::from_elements(mesh, values)?;
        Ok(Self {
            nelx: grid.width,
            nely: grid.height,
            rows: grid.values,
        })
    }

    /// Element-ordered values clamped to `[floor, 1]`.
    pub fn to_element_order(&self, mesh: &GridMesh, floor: f64) -> Vec<f64> {
        let grid = Grid {
            width: self.nelx,
            height: self.nely,
            values: self.rows.clone(),
        };
        grid.to_elements(mesh)
            .expect("caller checks dimensions")
            .into_iter()
            .map(|v| v.clamp(floor, 1.0))
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.rows.len() * 8);
        let _ = writeln!(out, "{DENSITY_HEADER}");
        let _ = writeln!(out, "{} {}", self.nelx, self.nely);
        for row in self.rows.chunks(self.nelx) {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let bad = |reason: String| Error::Archive {
            path: path.to_path_buf(),
            reason,
        };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        if lines.next().map(str::trim) != Some(DENSITY_HEADER) {
            return Err(bad(format!("missing `{DENSITY_HEADER}` header")));
        }
        let dims: Vec<usize> = lines
            .next()
            .ok_or_else(|| bad("missing size line".into()))?
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(format!("size line: {e}")))?;
        let [nelx, nely] = dims[..] else {
            return Err(bad("size line needs `nelx nely`".into()));
        };
        let mut rows = Vec::with_capacity(nelx * nely);
        for (r, line) in lines.enumerate() {
            let before = rows.len();
            for token in line.split_whitespace() {
                let v: f64 = token
                    .parse()
                    .map_err(|e| bad(format!("row {}: {e}", r + 1)))?;
                if !v.is_finite() {
                    return Err(bad(format!("row {}: non-finite value", r + 1)));
                }
                rows.push(v);
            }
            if rows.len() - before != nelx {
                return Err(bad(format!("row {} has {} values", r + 1, rows.len() - before)));
            }
        }
        if rows.len() != nelx * nely {
            return Err(bad(format!("expected {nely} rows of {nelx}")));
        }
        Ok(Self { nelx, nely, rows })
    }
}

pub fn write_density(path: &Path, mesh: &GridMesh, values: &[f64]) -> Result<()> {
    let file = DensityFile::from_elements(mesh, values)?;
    std::fs::write(path, file.to_text()).map_err(|e| Error::io(path, e))
}

pub fn read_density(path: &Path) -> Result<DensityFile> {
    let is_pgm = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("pgm"));
    if is_pgm {
        let grid = read_grid(path)?;
        return Ok(DensityFile {
            nelx: grid.width,
            nely: grid.height,
            rows: grid.values,
        });
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    DensityFile::parse(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip_is_exact() {
        let mesh = GridMesh::new(4, 3).unwrap();
        let values: Vec<f64> = (0..12).map(|i| 1.0 / (i as f64 + 1.0)).collect();
        let file = DensityFile::from_elements(&mesh, &values).unwrap();
        let text = file.to_text();
        let back = DensityFile::parse(&text, Path::new("x")).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.to_element_order(&mesh, 0.0), values);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn malformed_files_are_rejected() {
        let p = Path::new("x");
        assert!(DensityFile::parse("2 1\n0 0\n", p).is_err());
        assert!(DensityFile::parse("topogrow-density 1\n2 1\n0\n", p).is_err());
        assert!(DensityFile::parse("topogrow-density 1\n2 2\n0 1\n", p).is_err());
        assert!(DensityFile::parse("topogrow-density 1\n1 1\nNaN\n", p).is_err());
    }
}
