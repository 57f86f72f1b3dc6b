//! Run definitions in TOML.
//!
//! A run names a built-in fixture or spells out its mesh, supports and
//! loads with node coordinates `(ix, iy)`. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::erosion::{DirectionMask, ErosionSpec, StepMetric};
use crate::error::{Error, Result};
use crate::fem::{Component, FieldKind, GridMesh, LoadCase, MaterialLaw};
use crate::growth::{GrowthCurve, VolumeUpdateForm};
use crate::io::density::read_density;
use crate::io::fixtures::Fixture;
use crate::simp::{
    initial_field, Optimizer, OptimizerConfig, Perturbation, Problem, VolumeSchedule,
};

/// Environment variable that relocates relative output directories.
pub const OUTPUT_ROOT_ENV: &str = "TOPOGROW_OUTPUT_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[derive(Default)]
pub struct RunConfig {
    pub fixture: Option<Fixture>,
    #[serde(default)]
    pub seed: u64,
    pub mesh: Option<MeshConfig>,
    pub material: Option<MaterialConfig>,
    #[serde(default)]
    pub supports: Vec<SupportConfig>,
    #[serde(default)]
    pub loads: Vec<LoadConfig>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub growth: GrowthConfig,
    #[serde(default)]
    pub erosion: ErosionConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub init: InitConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub nelx: usize,
    pub nely: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialConfig {
    pub e0: f64,
    pub emin: f64,
    pub nu: f64,
    pub penal: f64,
}

impl Default for MaterialConfig {
    fn default() -> Self {
        let law = MaterialLaw::standard();
        Self {
            e0: law.e0(),
            emin: law.emin(),
            nu: law.nu(),
            penal: law.penal(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Edge {
    Left,
    Right,
    Bottom,
    Top,
}

/// Either a whole edge or a single node, with the constrained components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupportConfig {
    pub edge: Option<Edge>,
    pub node: Option<[usize; 2]>,
    pub dofs: Vec<Component>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadConfig {
    #[serde(default = "one")]
    pub weight: f64,
    pub forces: Vec<ForceConfig>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceConfig {
    pub node: [usize; 2],
    pub dof: Component,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    #[default]
    Logarithmic,
    Linear,
}

/// Volume control. With `enabled = false` the run holds `v_f` fixed;
/// otherwise it grows from `v0` towards `v_f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrowthConfig {
    pub enabled: bool,
    pub schedule: ScheduleKind,
    pub v0: f64,
    pub v_f: f64,
    /// Increment per iteration for the linear schedule.
    pub step: f64,
    pub form: VolumeUpdateForm,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            schedule: ScheduleKind::Logarithmic,
            v0: 0.3,
            v_f: 0.5,
            step: 0.01,
            form: VolumeUpdateForm::Exponential,
        }
    }
}

/// Enabled direction pairs, as a bit mask or by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DirectionsConfig {
    Mask(u8),
    Names(Vec<String>),
}

impl Default for DirectionsConfig {
    fn default() -> Self {
        DirectionsConfig::Mask(DirectionMask::ALL.bits())
    }
}

impl DirectionsConfig {
    pub fn mask(&self) -> Result<DirectionMask> {
        match self {
            DirectionsConfig::Mask(bits) => DirectionMask::new(*bits),
            DirectionsConfig::Names(names) => {
                let mut mask = DirectionMask::new(0)?;
                for name in names {
                    let pair = match name.as_str() {
                        "horizontal" => DirectionMask::HORIZONTAL,
                        "vertical" => DirectionMask::VERTICAL,
                        "rising_diagonal" => DirectionMask::RISING_DIAGONAL,
                        "falling_diagonal" => DirectionMask::FALLING_DIAGONAL,
                        "all" => DirectionMask::ALL,
                        other => {
                            return Err(Error::Config(format!(
                                "unknown direction pair `{other}`"
                            )))
                        }
                    };
                    mask = mask.union(pair);
                }
                Ok(mask)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErosionConfig {
    pub enabled: bool,
    pub r: usize,
    pub threshold_hi: f64,
    pub rho_erased: f64,
    pub directions: DirectionsConfig,
    pub cadence: usize,
    pub activation_iter: usize,
    pub metric: StepMetric,
}

impl Default for ErosionConfig {
    fn default() -> Self {
        let spec = ErosionSpec::new(3);
        Self {
            enabled: false,
            r: spec.radius,
            threshold_hi: spec.threshold_hi,
            rho_erased: spec.rho_erased,
            directions: DirectionsConfig::default(),
            cadence: spec.cadence,
            activation_iter: spec.activation_iter,
            metric: spec.metric,
        }
    }
}

impl ErosionConfig {
    pub fn spec(&self, density_floor: f64) -> Result<Option<ErosionSpec>> {
        if !self.enabled {
            return Ok(None);
        }
        let spec = ErosionSpec {
            radius: self.r,
            threshold_hi: self.threshold_hi,
            rho_erased: self.rho_erased,
            directions: self.directions.mask()?,
            cadence: self.cadence,
            activation_iter: self.activation_iter,
            metric: self.metric,
            density_floor,
        };
        spec.validate()?;
        Ok(Some(spec))
    }

    /// Radius recorded in manifests and dataset indices; 0 when disabled.
    pub fn radius(&self) -> usize {
        if self.enabled {
            self.r
        } else {
            0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Write a density snapshot every this many iterations; 0 disables.
    pub snapshot_every: usize,
    pub fields: Vec<FieldKind>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            snapshot_every: 10,
            fields: FieldKind::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitConfig {
    /// Density file used as the starting field.
    pub field: Option<PathBuf>,
    /// Amplitude of seeded uniform noise added to the starting field.
    pub perturbation: f64,
}

/// A validated configuration with fixtures expanded.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub config: RunConfig,
    pub problem: Problem,
    pub optimizer: OptimizerConfig,
    pub erosion: Option<ErosionSpec>,
    /// Starting field file, resolved against the config's directory.
    pub initial_field: Option<PathBuf>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(config_err("config is empty"));
        }
        let config: RunConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads and validates a config file; also returns its text.
    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config = Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => config_err(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        Ok((config, text))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err(e.to_string()))
    }

    pub fn mesh(&self) -> Result<GridMesh> {
        let (nelx, nely) = match (self.mesh, self.fixture) {
            (Some(m), _) => (m.nelx, m.nely),
            (None, Some(f)) => f.default_mesh(),
            (None, None) => return Err(config_err("no [mesh] and no fixture given")),
        };
        GridMesh::new(nelx, nely).map_err(|e| config_err(e.to_string()))
    }

    pub fn material(&self) -> Result<MaterialLaw> {
        match (self.material, self.fixture) {
            (Some(m), _) => MaterialLaw::new(m.e0, m.emin, m.nu, m.penal),
            (None, Some(f)) => Ok(f.default_material()),
            (None, None) => Ok(MaterialLaw::standard()),
        }
        .map_err(|e| config_err(e.to_string()))
    }

    fn node_in(mesh: &GridMesh, [ix, iy]: [usize; 2]) -> Result<()> {
        if mesh.contains_node(ix, iy) {
            Ok(())
        } else {
            Err(config_err(format!(
                "node ({ix}, {iy}) outside a {}x{} mesh",
                mesh.nelx(),
                mesh.nely()
            )))
        }
    }

    fn fixed_dofs(&self, mesh: &GridMesh) -> Result<Vec<usize>> {
        let mut fixed = Vec::new();
        for s in &self.supports {
            if s.dofs.is_empty() {
                return Err(config_err("support with no constrained components"));
            }
            let nodes: Vec<[usize; 2]> = match (s.edge, s.node) {
                (Some(edge), None) => match edge {
                    Edge::Left => (0..=mesh.nely()).map(|iy| [0, iy]).collect(),
                    Edge::Right => (0..=mesh.nely()).map(|iy| [mesh.nelx(), iy]).collect(),
                    Edge::Bottom => (0..=mesh.nelx()).map(|ix| [ix, 0]).collect(),
                    Edge::Top => (0..=mesh.nelx()).map(|ix| [ix, mesh.nely()]).collect(),
                },
                (None, Some(node)) => {
                    Self::node_in(mesh, node)?;
                    vec![node]
                }
                _ => return Err(config_err("a support needs exactly one of `edge` or `node`")),
            };
            for [ix, iy] in nodes {
                fixed.extend(s.dofs.iter().map(|&c| mesh.node_dof(ix, iy, c)));
            }
        }
        Ok(fixed)
    }

    fn load_cases(&self, mesh: &GridMesh) -> Result<(Vec<LoadCase>, Vec<f64>)> {
        if self.supports.is_empty() && self.loads.is_empty() {
            if let Some(f) = self.fixture {
                let cases = f.load_cases(mesh).map_err(|e| config_err(e.to_string()))?;
                let weights = vec![1.0; cases.len()];
                return Ok((cases, weights));
            }
        }
        if self.supports.is_empty() || self.loads.is_empty() {
            return Err(config_err(
                "give both [[supports]] and [[loads]], or neither when using a fixture",
            ));
        }
        let fixed = self.fixed_dofs(mesh)?;
        let mut cases = Vec::with_capacity(self.loads.len());
        let mut weights = Vec::with_capacity(self.loads.len());
        for load in &self.loads {
            let mut case = LoadCase::new(fixed.iter().copied());
            for f in &load.forces {
                Self::node_in(mesh, f.node)?;
                if !f.value.is_finite() {
                    return Err(config_err("non-finite force value"));
                }
                case = case.with_force(mesh.node_dof(f.node[0], f.node[1], f.dof), f.value);
            }
            cases.push(case);
            weights.push(load.weight);
        }
        Ok((cases, weights))
    }

    /// Schema checks that need no solve.
    pub fn validate(&self) -> Result<()> {
        let mesh = self.mesh()?;
        self.material()?;
        let (cases, weights) = self.load_cases(&mesh)?;
        Problem::with_weights(mesh, self.material()?, cases, weights)
            .map_err(|e| config_err(e.to_string()))?;
        self.optimizer
            .validate()
            .map_err(|e| config_err(e.to_string()))?;
        self.erosion
            .spec(self.optimizer.density_floor)
            .map_err(|e| config_err(e.to_string()))?;
        let g = &self.growth;
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        if !unit(g.v_f) {
            return Err(config_err(format!("growth.v_f = {} outside (0, 1]", g.v_f)));
        }
        if g.enabled {
            if !(g.v0 > 0.0 && g.v0 < 1.0) {
                return Err(config_err(format!("growth.v0 = {} outside (0, 1)", g.v0)));
            }
            if g.v_f <= g.v0 {
                return Err(config_err("growth.v_f must exceed growth.v0"));
            }
            if g.schedule == ScheduleKind::Linear && !(g.step > 0.0 && g.step.is_finite()) {
                return Err(config_err("growth.step must be positive"));
            }
        }
        if !(self.init.perturbation >= 0.0 && self.init.perturbation.is_finite()) {
            return Err(config_err("init.perturbation must be >= 0"));
        }
        if self.output.snapshot_every > 0 && self.output.snapshot_every > self.optimizer.max_iter {
            log::debug!("snapshot cadence exceeds max_iter; only the final field is written");
        }
        Ok(())
    }

    /// Expands fixtures and builds the problem. Relative paths in the config
    /// are taken relative to `base_dir`.
    pub fn resolve(&self, base_dir: &Path) -> Result<ResolvedRun> {
        let mesh = self.mesh()?;
        let (cases, weights) = self.load_cases(&mesh)?;
        let problem = Problem::with_weights(mesh, self.material()?, cases, weights)?;
        let erosion = self.erosion.spec(self.optimizer.density_floor)?;
        let initial_field = self.init.field.as_ref().map(|p| base_dir.join(p));
        Ok(ResolvedRun {
            config: self.clone(),
            problem,
            optimizer: self.optimizer,
            erosion,
            initial_field,
        })
    }

    /// Stable digest of everything that influences the computed history.
    /// Output settings are excluded; fixture shorthand and explicit
    /// equivalents hash alike.
    pub fn canonical_hash(&self, base_dir: &Path) -> Result<String> {
        let resolved = self.resolve(base_dir)?;
        let loads: Vec<_> = resolved
            .problem
            .loads
            .iter()
            .zip(&resolved.problem.weights)
            .map(|(l, w)| (l.forces.iter().collect::<Vec<_>>(), *w))
            .collect();
        let init_digest = match &resolved.initial_field {
            Some(p) => {
                let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
                Some(hex::encode(Sha256::digest(&bytes)))
            }
            None => None,
        };
        let growth = if self.growth.enabled {
            serde_json::to_value(self.growth)
        } else {
            serde_json::to_value(("fixed", self.growth.v_f))
        }
        .map_err(|e| config_err(e.to_string()))?;
        let canonical = serde_json::json!({
            "mesh": [resolved.problem.mesh.nelx(), resolved.problem.mesh.nely()],
            "material": resolved.problem.law,
            "fixed": resolved.problem.loads[0].fixed_dofs,
            "loads": loads,
            "optimizer": resolved.optimizer,
            "growth": growth,
            "erosion": resolved.erosion,
            "init": [serde_json::to_value(init_digest).unwrap_or_default(),
                     serde_json::to_value(self.init.perturbation).unwrap_or_default()],
            "seed": self.seed,
        });
        Ok(hex::encode(Sha256::digest(canonical.to_string().as_bytes())))
    }

    /// Output directory with the environment override applied to relative
    /// paths. Defaults to `runs/<fixture or "run">`.
    pub fn output_dir(&self) -> PathBuf {
        let dir = self.output.dir.clone().unwrap_or_else(|| {
            PathBuf::from("runs").join(self.fixture.map_or("run", |f| f.name()))
        });
        resolve_output(&dir)
    }
}

/// Applies the output-root environment override to a relative path.
pub fn resolve_output(dir: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if dir.is_relative() => PathBuf::from(root).join(dir),
        _ => dir.to_path_buf(),
    }
}

impl ResolvedRun {
    pub fn solid_compliance(&self) -> Result<f64> {
        self.problem.solid_compliance()
    }

    /// Volume schedule; growth schedules need the solid compliance.
    pub fn schedule(&self, c_min: Option<f64>) -> Result<VolumeSchedule> {
        let g = &self.config.growth;
        if !g.enabled {
            return Ok(VolumeSchedule::Fixed { volume: g.v_f });
        }
        Ok(match g.schedule {
            ScheduleKind::Linear => VolumeSchedule::Linear {
                start: g.v0,
                step: g.step,
                target: g.v_f,
            },
            ScheduleKind::Logarithmic => {
                let c_min = match c_min {
                    Some(c) => c,
                    None => self.solid_compliance()?,
                };
                VolumeSchedule::Logarithmic {
                    curve: GrowthCurve::new(g.v0, c_min)?,
                    v_final: g.v_f,
                    form: g.form,
                }
            }
        })
    }

    pub fn growth_curve(&self, c_min: f64) -> Result<Option<GrowthCurve>> {
        Ok(match self.schedule(Some(c_min))? {
            VolumeSchedule::Logarithmic { curve, .. } => Some(curve),
            _ => None,
        })
    }

    /// Builds the optimizer with its starting field.
    pub fn build(&self, schedule: VolumeSchedule) -> Result<Optimizer> {
        let floor = self.optimizer.density_floor;
        let perturbation = (self.config.init.perturbation > 0.0).then_some(Perturbation {
            amplitude: self.config.init.perturbation,
            seed: self.config.seed,
        });
        let field = match &self.initial_field {
            Some(path) => {
                let file = read_density(path)?;
                let mesh = &self.problem.mesh;
                if (file.nelx, file.nely) != (mesh.nelx(), mesh.nely()) {
                    return Err(Error::DimensionMismatch {
                        what: "initial density file",
                        expected: mesh.n_elements(),
                        actual: file.nelx * file.nely,
                    });
                }
                let values = file.to_element_order(mesh, floor);
                crate::fem::DensityField::from_physical(values)?
            }
            None => initial_field(
                &self.problem.mesh,
                schedule.initial_volume(),
                floor,
                perturbation,
            )?,
        };
        Optimizer::new(
            self.problem.clone(),
            self.optimizer,
            schedule,
            self.erosion,
            field,
        )
    }
}


/// Config for a built-in fixture with every other setting at its default.
pub fn fixture_config(fixture: Fixture) -> RunConfig {
    RunConfig {
        fixture: Some(fixture),
        ..Default::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_rejected() {
        assert!(matches!(RunConfig::from_toml_str(""), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml_str("seed = 3"), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml_str("fixture = \"threepoint\"\n[optimizer]\nrmn = 2.0\n");
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn explicit_setup_matches_fixture_hash() {
        let dir = Path::new(".");
        let short = RunConfig::from_toml_str("fixture = \"cantilever_tip\"\n").unwrap();
        let long = RunConfig::from_toml_str(
            r#"
[mesh]
nelx = 60
nely = 20

[[supports]]
edge = "right"
dofs = ["x", "y"]

[[loads]]
forces = [{ node = [0, 20], dof = "y", value = -1.0 }]

[output]
dir = "elsewhere"
"#,
        )
        .unwrap();
        assert_eq!(
            short.canonical_hash(dir).unwrap(),
            long.canonical_hash(dir).unwrap()
        );
        let mut other = short.clone();
        other.optimizer.rmin = 3.0;
        assert_ne!(
            short.canonical_hash(dir).unwrap(),
            other.canonical_hash(dir).unwrap()
        );
    }

    #[test]
    fn nodes_outside_mesh_are_rejected() {
        let text = r#"
[mesh]
nelx = 4
nely = 2
[[supports]]
node = [5, 0]
dofs = ["x"]
[[loads]]
forces = [{ node = [0, 0], dof = "y", value = 1.0 }]
"#;
        assert!(matches!(RunConfig::from_toml_str(text), Err(Error::Config(_))));
    }

    #[test]
    fn direction_names_build_masks() {
        let d = DirectionsConfig::Names(vec!["horizontal".into(), "vertical".into()]);
        assert_eq!(d.mask().unwrap().bits(), 0b0101_0101);
        assert!(DirectionsConfig::Names(vec!["up".into()]).mask().is_err());
    }

    #[test]
    fn growth_requires_room_to_grow() {
        let text = "fixture = \"threepoint\"\n[growth]\nenabled = true\nv0 = 0.5\nv_f = 0.4\n";
        assert!(RunConfig::from_toml_str(text).is_err());
    }
}
