//! Run archives.
//!
//! ```text
//! <run>/
//!   config.toml        normalized run definition
//!   manifest.json      hash, status, curve constants, plan outcomes
//!   history.csv        iter,v,c,change,erased_count,volume_removed
//!   density.txt        final physical density
//!   snapshots/iter_00010.pgm ...
//!   fields/von_mises.pgm, von_mises.csv ...
//! ```

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{DensityField, GridMesh};
use crate::growth::InterpolationPlan;
use crate::io::config::RunConfig;
use crate::io::density::{read_density, write_density, DensityFile};
use crate::io::fields::export_fields;
use crate::io::pgm::{write_grid, Grid};
use crate::simp::{IterationRecord, IterationSink, PlanOutcome, PlanRunner, RunStatus};

pub const CONFIG_FILE: &str = "config.toml";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const HISTORY_FILE: &str = "history.csv";
pub const DENSITY_FILE: &str = "density.txt";
pub const SNAPSHOT_DIR: &str = "snapshots";
pub const FIELDS_DIR: &str = "fields";

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iter: usize,
    pub v: f64,
    pub c: f64,
    pub change: f64,
    pub erased_count: usize,
    pub volume_removed: f64,
}

impl From<&IterationRecord> for HistoryRow {
    fn from(r: &IterationRecord) -> Self {
        Self {
            iter: r.iter,
            v: r.v,
            c: r.c,
            change: r.change,
            erased_count: r.erased_count,
            volume_removed: r.volume_removed,
        }
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Archive {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

pub fn write_history(path: &Path, rows: &[HistoryRow]) -> Result<()> {
    crate::io::tables::write_rows(path, rows)
}

/// Reads a history and checks that iterations strictly increase.
pub fn read_history(path: &Path) -> Result<Vec<HistoryRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let rows: Vec<HistoryRow> = r
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| csv_err(path, e))?;
    if let Some(w) = rows.windows(2).find(|w| w[1].iter <= w[0].iter) {
        return Err(Error::Archive {
            path: path.to_path_buf(),
            reason: format!("iteration {} follows {}", w[1].iter, w[0].iter),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchiveStatus {
    Converged,
    VolumeReached,
    MaxIterations,
    PlansCompleted,
    Failed,
}

impl From<RunStatus> for ArchiveStatus {
    fn from(s: RunStatus) -> Self {
        match s {
            RunStatus::Converged => ArchiveStatus::Converged,
            RunStatus::VolumeReached => ArchiveStatus::VolumeReached,
            RunStatus::MaxIterations => ArchiveStatus::MaxIterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub fixture: Option<String>,
    pub tool_version: String,
    pub status: ArchiveStatus,
    pub error: Option<String>,
    pub iterations: usize,
    pub seed: u64,
    pub mesh: [usize; 2],
    pub c_min: f64,
    /// Starting volume of the growth curve, or the held volume without growth.
    pub v0: f64,
    pub erosion_radius: usize,
    /// Growth curve constants `1/c = a ln v + b`, when growing logarithmically.
    pub curve_a: Option<f64>,
    pub curve_b: Option<f64>,
    /// Archive the interpolation started from.
    pub source: Option<PathBuf>,
    pub plans: Vec<PlanOutcome>,
    /// Volume and compliance of the final field, analysed afresh.
    pub final_v: f64,
    pub final_c: f64,
}

/// Streams history rows and snapshots into a run directory.
pub struct ArchiveWriter {
    dir: PathBuf,
    mesh: GridMesh,
    history: csv::Writer<File>,
    snapshot_every: usize,
    last_snapshot: Option<usize>,
}

impl ArchiveWriter {
    /// Creates the directory and writes the config copy.
    pub fn create(dir: &Path, config: &RunConfig, mesh: GridMesh) -> Result<Self> {
        std::fs::create_dir_all(dir.join(SNAPSHOT_DIR))
            .map_err(|e| Error::io(dir.join(SNAPSHOT_DIR), e))?;
        let cfg_path = dir.join(CONFIG_FILE);
        std::fs::write(&cfg_path, config.to_toml_string()?).map_err(|e| Error::io(&cfg_path, e))?;
        let hist_path = dir.join(HISTORY_FILE);
        let history = csv::Writer::from_path(&hist_path).map_err(|e| csv_err(&hist_path, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            mesh,
            history,
            snapshot_every: config.output.snapshot_every,
            last_snapshot: None,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn snapshot(&mut self, iter: usize, densities: &DensityField) -> Result<()> {
        let path = self.dir.join(SNAPSHOT_DIR).join(snapshot_name(iter));
        write_grid(&path, &Grid::from_elements(&self.mesh, densities.physical())?)?;
        self.last_snapshot = Some(iter);
        Ok(())
    }

    /// Writes the final density and snapshot, then the manifest.
    pub fn finish(
        mut self,
        manifest: &Manifest,
        densities: &DensityField,
        last_iter: usize,
    ) -> Result<PathBuf> {
        let hist_path = self.dir.join(HISTORY_FILE);
        self.history.flush().map_err(|e| Error::io(&hist_path, e))?;
        if last_iter > 0 && self.last_snapshot != Some(last_iter) {
            self.snapshot(last_iter, densities)?;
        }
        write_density(&self.dir.join(DENSITY_FILE), &self.mesh, densities.physical())?;
        write_manifest(&self.dir.join(MANIFEST_FILE), manifest)?;
        Ok(self.dir)
    }
}

impl IterationSink for ArchiveWriter {
    fn record(&mut self, record: &IterationRecord, densities: &DensityField) -> Result<()> {
        let hist_path = self.dir.join(HISTORY_FILE);
        self.history
            .serialize(HistoryRow::from(record))
            .map_err(|e| csv_err(&hist_path, e))?;
        self.history.flush().map_err(|e| Error::io(&hist_path, e))?;
        if self.snapshot_every > 0 && record.iter.is_multiple_of(self.snapshot_every) {
            self.snapshot(record.iter, densities)?;
        }
        Ok(())
    }
}

pub fn snapshot_name(iter: usize) -> String {
    format!("iter_{iter:05}.pgm")
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).map_err(|e| Error::Archive {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// A finished run read back from disk.
#[derive(Debug, Clone)]
pub struct RunArchive {
    pub dir: PathBuf,
    pub config: RunConfig,
    pub manifest: Manifest,
    pub history: Vec<HistoryRow>,
    pub density: DensityFile,
}

impl RunArchive {
    pub fn open(dir: &Path) -> Result<Self> {
        let cfg_path = dir.join(CONFIG_FILE);
        let (config, _) = RunConfig::load(&cfg_path)?;
        let man_path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&man_path).map_err(|e| Error::io(&man_path, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Archive {
            path: man_path.clone(),
            reason: e.to_string(),
        })?;
        let history = read_history(&dir.join(HISTORY_FILE))?;
        let density = read_density(&dir.join(DENSITY_FILE))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            config,
            manifest,
            history,
            density,
        })
    }

    /// Checks that the stored config still hashes to the manifest value.
    pub fn verify(&self) -> Result<()> {
        let hash = self.config.canonical_hash(&self.dir)?;
        if hash != self.manifest.config_hash {
            return Err(Error::Archive {
                path: self.dir.join(CONFIG_FILE),
                reason: format!(
                    "config hash {hash} does not match manifest {}",
                    self.manifest.config_hash
                ),
            });
        }
        Ok(())
    }

    pub fn mesh(&self) -> Result<GridMesh> {
        GridMesh::new(self.density.nelx, self.density.nely)
    }

    pub fn last(&self) -> Option<&HistoryRow> {
        self.history.last()
    }
}

/// Result of [`run_to_archive`].
#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub manifest: Manifest,
    /// Failure that ended the run; the archive is still written.
    pub failure: Option<Error>,
}

/// Copy of `config` suitable for an archive: the init path is absolute and
/// the output directory is dropped.
pub fn normalize_config(config: &RunConfig, base_dir: &Path) -> Result<RunConfig> {
    let mut out = config.clone();
    out.output.dir = None;
    if let Some(p) = &config.init.field {
        let full = base_dir.join(p);
        out.init.field = Some(std::fs::canonicalize(&full).map_err(|e| Error::io(&full, e))?);
    }
    Ok(out)
}

/// Runs a config (and optional interpolation plans) into `dir`.
///
/// Config and solver setup errors are returned before anything is written.
/// Errors raised while iterating are recorded in the manifest and returned
/// in [`RunOutcome::failure`].
pub fn run_to_archive(
    config: &RunConfig,
    base_dir: &Path,
    dir: &Path,
    plans: &[InterpolationPlan],
    plan_budget: usize,
    source: Option<&Path>,
) -> Result<RunOutcome> {
    let config_hash = config.canonical_hash(base_dir)?;
    let resolved = config.resolve(base_dir)?;
    let c_min = resolved.solid_compliance()?;
    let schedule = resolved.schedule(Some(c_min))?;
    let mut optimizer = resolved.build(schedule)?;
    let mesh = resolved.problem.mesh;

    let archived = normalize_config(config, base_dir)?;
    let mut writer = ArchiveWriter::create(dir, &archived, mesh)?;

    let result: Result<(ArchiveStatus, Vec<PlanOutcome>)> = if plans.is_empty() {
        optimizer
            .run(&mut writer)
            .map(|s| (ArchiveStatus::from(s), Vec::new()))
    } else {
        PlanRunner::new(&mut optimizer, plan_budget)
            .and_then(|mut runner| runner.execute(plans, &mut writer))
            .map(|outcomes| (ArchiveStatus::PlansCompleted, outcomes))
    };

    let (status, plan_outcomes, failure) = match result {
        Ok((s, p)) => (s, p, None),
        Err(e) => (ArchiveStatus::Failed, Vec::new(), Some(e)),
    };
    let densities = optimizer.densities().clone();
    let (final_v, final_c) = match optimizer.problem().analyze(&densities) {
        Ok(a) => (densities.volume(), a.mean_compliance),
        Err(_) => (densities.volume(), f64::NAN),
    };
    let curve = schedule.curve().copied();
    let manifest = Manifest {
        config_hash,
        fixture: config.fixture.map(|f| f.name().to_string()),
        tool_version: TOOL_VERSION.to_string(),
        status,
        error: failure.as_ref().map(|e| e.to_string()),
        iterations: optimizer.iteration(),
        seed: config.seed,
        mesh: [mesh.nelx(), mesh.nely()],
        c_min,
        v0: schedule.initial_volume(),
        erosion_radius: config.erosion.radius(),
        curve_a: curve.map(|c| c.slope()),
        curve_b: curve.map(|c| c.intercept()),
        source: source.map(Path::to_path_buf),
        plans: plan_outcomes,
        final_v,
        final_c,
    };
    let iterations = manifest.iterations;
    let dir = writer.finish(&manifest, &densities, iterations)?;
    if failure.is_none() && !config.output.fields.is_empty() {
        export_fields(
            &dir.join(FIELDS_DIR),
            optimizer.problem(),
            &densities,
            &config.output.fields,
            &[],
        )?;
    }
    Ok(RunOutcome {
        dir,
        manifest,
        failure,
    })
}
