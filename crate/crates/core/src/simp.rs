//! SIMP driver: optimality-criteria updates with a per-iteration volume
//! target, convolution filtering, periodic erosion and logarithmic growth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::erosion::{self, ErosionReport, ErosionSpec};
use crate::error::{Error, Result};
use crate::fem::{
    compliance, mean, DensityField, GridMesh, LoadCase, MaterialLaw, StiffnessSystem,
    DEFAULT_DENSITY_FLOOR,
};
use crate::filter::{ConvolutionFilter, FilterMode};
use crate::growth::{next_volume_with, GrowthCurve, InterpolationPlan, VolumeUpdateForm};

/// Tolerance on `|mean(rho) - v_target|` for an accepted OC step.
pub const VOLUME_TOLERANCE: f64 = 1e-4;

const BISECTION_TOLERANCE: f64 = 1e-12;
const LAMBDA_START: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub rmin: f64,
    pub filter_mode: FilterMode,
    pub move_limit: f64,
    pub oc_damping: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub density_floor: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            rmin: 2.0,
            filter_mode: FilterMode::Sensitivity,
            move_limit: 0.2,
            oc_damping: 0.5,
            tol: 0.01,
            max_iter: 200,
            density_floor: DEFAULT_DENSITY_FLOOR,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.rmin.is_finite() && self.rmin >= 1.0) {
            return bad(format!("rmin must be >= 1, got {}", self.rmin));
        }
        if !(self.move_limit > 0.0 && self.move_limit <= 1.0) {
            return bad(format!("move_limit must lie in (0, 1], got {}", self.move_limit));
        }
        if !(self.oc_damping > 0.0 && self.oc_damping.is_finite()) {
            return bad(format!("oc_damping must be positive, got {}", self.oc_damping));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be >= 1".into());
        }
        if !(self.density_floor > 0.0 && self.density_floor < 1.0) {
            return bad(format!("density_floor must lie in (0, 1), got {}", self.density_floor));
        }
        Ok(())
    }
}

/// Where the per-iteration volume target comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VolumeSchedule {
    Fixed {
        volume: f64,
    },
    /// `start + step * (iter - 1)`, capped at `target`.
    Linear {
        start: f64,
        step: f64,
        target: f64,
    },
    /// Targets from the growth curve, capped at `v_final`.
    Logarithmic {
        curve: GrowthCurve,
        v_final: f64,
        #[serde(default)]
        form: VolumeUpdateForm,
    },
}

impl VolumeSchedule {
    pub fn logarithmic(curve: GrowthCurve, v_final: f64) -> Self {
        VolumeSchedule::Logarithmic {
            curve,
            v_final,
            form: VolumeUpdateForm::Exponential,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| v > 0.0 && v <= 1.0;
        let ok = match *self {
            VolumeSchedule::Fixed { volume } => in_unit(volume),
            VolumeSchedule::Linear { start, step, target } => {
                in_unit(start) && in_unit(target) && step >= 0.0 && step.is_finite()
            }
            VolumeSchedule::Logarithmic { curve, v_final, .. } => {
                in_unit(v_final) && v_final > curve.v0()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid volume schedule {self:?}")))
        }
    }

    /// Volume used to build the starting field.
    pub fn initial_volume(&self) -> f64 {
        match *self {
            VolumeSchedule::Fixed { volume } => volume,
            VolumeSchedule::Linear { start, .. } => start,
            VolumeSchedule::Logarithmic { curve, .. } => curve.v0(),
        }
    }

    pub fn curve(&self) -> Option<&GrowthCurve> {
        match self {
            VolumeSchedule::Logarithmic { curve, .. } => Some(curve),
            _ => None,
        }
    }
}

/// Mesh, material and load cases. All cases share one set of supports so a
/// single factorization serves every solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub mesh: GridMesh,
    pub law: MaterialLaw,
    pub loads: Vec<LoadCase>,
    pub weights: Vec<f64>,
}

impl Problem {
    pub fn new(mesh: GridMesh, law: MaterialLaw, loads: Vec<LoadCase>) -> Result<Self> {
        let weights = vec![1.0; loads.len()];
        Self::with_weights(mesh, law, loads, weights)
    }

    pub fn with_weights(
        mesh: GridMesh,
        law: MaterialLaw,
        loads: Vec<LoadCase>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let Some(first) = loads.first() else {
            return Err(Error::InvalidParameter("no load cases".into()));
        };
        if weights.len() != loads.len() {
            return Err(Error::DimensionMismatch {
                what: "load weights",
                expected: loads.len(),
                actual: weights.len(),
            });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidParameter("load weights must be positive".into()));
        }
        for load in &loads {
            load.validate(&mesh)?;
            if load.fixed_dofs != first.fixed_dofs {
                return Err(Error::InvalidParameter(
                    "all load cases must share the same supports".into(),
                ));
            }
        }
        Ok(Self {
            mesh,
            law,
            loads,
            weights,
        })
    }

    fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Solves every load case for `densities`.
    pub fn analyze(&self, densities: &DensityField) -> Result<Analysis> {
        let system = StiffnessSystem::assemble(
            &self.mesh,
            &self.law,
            densities,
            self.loads[0].fixed_dofs.iter().copied(),
        )?;
        let n = self.mesh.n_elements();
        let mut objective = 0.0;
        let mut element_unit = vec![0.0; n];
        let mut displacements = Vec::with_capacity(self.loads.len());
        let mut per_case = Vec::with_capacity(self.loads.len());
        for (load, &w) in self.loads.iter().zip(&self.weights) {
            let u = system.solve(load)?;
            let c = compliance(&u, &self.mesh, &self.law, densities)?;
            objective += w * c.total;
            for (acc, ce) in element_unit.iter_mut().zip(&c.element_unit) {
                *acc += w * ce;
            }
            per_case.push(c.total);
            displacements.push(u);
        }
        Ok(Analysis {
            objective,
            mean_compliance: objective / self.weight_sum(),
            per_case,
            element_unit,
            displacements,
        })
    }

    /// Compliance of the all-solid domain, averaged over load cases.
    pub fn solid_compliance(&self) -> Result<f64> {
        let solid = DensityField::uniform(&self.mesh, 1.0)?;
        Ok(self.analyze(&solid)?.mean_compliance)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    /// Weighted sum of compliances.
    pub objective: f64,
    /// Weighted mean compliance, the `c` used by growth and history.
    pub mean_compliance: f64,
    pub per_case: Vec<f64>,
    /// Weighted sum over cases of `u_e^T k0 u_e`.
    pub element_unit: Vec<f64>,
    pub displacements: Vec<Vec<f64>>,
}

/// `dc_e = -p rho^(p-1) (E0 - Emin) u_e^T k0 u_e`, and `dv_e = 1`.
pub fn sensitivities(
    law: &MaterialLaw,
    densities: &DensityField,
    element_unit: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let dc = densities
        .physical()
        .iter()
        .zip(element_unit)
        .map(|(&rho, &ce)| -law.modulus_slope(rho) * ce)
        .collect();
    (dc, vec![1.0; element_unit.len()])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    /// Design change fell below `tol` with the volume target settled.
    Converged,
    /// Growth reached its final volume.
    VolumeReached,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    /// Volume after this iteration's update.
    pub v: f64,
    /// Weighted mean compliance solved at the start of this iteration, i.e.
    /// of the field before the update.
    pub c: f64,
    pub objective: f64,
    pub change: f64,
    pub v_target: f64,
    pub erased_count: usize,
    pub volume_removed: f64,
}

/// Receives the state after every iteration.
pub trait IterationSink {
    fn record(&mut self, record: &IterationRecord, densities: &DensityField) -> Result<()>;
}

impl<F> IterationSink for F
where
    F: FnMut(&IterationRecord, &DensityField) -> Result<()>,
{
    fn record(&mut self, record: &IterationRecord, densities: &DensityField) -> Result<()> {
        self(record, densities)
    }
}

/// Discards every record.
pub struct NullSink;

impl IterationSink for NullSink {
    fn record(&mut self, _: &IterationRecord, _: &DensityField) -> Result<()> {
        Ok(())
    }
}

/// Seeded uniform noise added to a starting field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub amplitude: f64,
    pub seed: u64,
}

pub fn initial_field(
    mesh: &GridMesh,
    volume: f64,
    floor: f64,
    perturbation: Option<Perturbation>,
) -> Result<DensityField> {
    let mut x = vec![volume; mesh.n_elements()];
    if let Some(p) = perturbation {
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        for v in &mut x {
            *v = (*v + p.amplitude * (rng.gen::<f64>() - 0.5)).clamp(floor, 1.0);
        }
    }
    DensityField::from_physical(x)
}

/// Result of one OC bisection.
#[derive(Debug, Clone)]
pub struct OcStep {
    pub design: Vec<f64>,
    pub physical: Vec<f64>,
    pub lambda: f64,
    /// The target lay outside the move-limited range; the nearest bound was
    /// taken.
    pub saturated: bool,
}

pub struct Optimizer {
    problem: Problem,
    config: OptimizerConfig,
    schedule: VolumeSchedule,
    erosion: Option<ErosionSpec>,
    filter: ConvolutionFilter,
    dv_design: Vec<f64>,
    densities: DensityField,
    iter: usize,
    last_target: f64,
    history: Vec<IterationRecord>,
}

impl Optimizer {
    pub fn new(
        problem: Problem,
        config: OptimizerConfig,
        schedule: VolumeSchedule,
        erosion: Option<ErosionSpec>,
        initial: DensityField,
    ) -> Result<Self> {
        config.validate()?;
        schedule.validate()?;
        if let Some(spec) = &erosion {
            spec.validate()?;
        }
        initial.check_mesh(&problem.mesh)?;
        let filter = ConvolutionFilter::new(&problem.mesh, config.rmin)?;
        let n = problem.mesh.n_elements();
        let dv_design = match config.filter_mode {
            FilterMode::Sensitivity => vec![1.0; n],
            FilterMode::Density => filter.chain(&vec![1.0; n]),
        };
        let densities = match config.filter_mode {
            FilterMode::Sensitivity => DensityField::from_physical(initial.design().to_vec())?,
            FilterMode::Density => {
                let phys = filter.density(initial.design());
                DensityField::new(initial.design().to_vec(), phys)?
            }
        };
        let last_target = densities.volume();
        Ok(Self {
            problem,
            config,
            schedule,
            erosion,
            filter,
            dv_design,
            densities,
            iter: 0,
            last_target,
            history: Vec::new(),
        })
    }

    /// Optimizer starting from the schedule's uniform initial volume.
    pub fn uniform(
        problem: Problem,
        config: OptimizerConfig,
        schedule: VolumeSchedule,
        erosion: Option<ErosionSpec>,
    ) -> Result<Self> {
        let field = initial_field(
            &problem.mesh,
            schedule.initial_volume(),
            config.density_floor,
            None,
        )?;
        Self::new(problem, config, schedule, erosion, field)
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn schedule(&self) -> &VolumeSchedule {
        &self.schedule
    }

    pub fn set_schedule(&mut self, schedule: VolumeSchedule) -> Result<()> {
        schedule.validate()?;
        self.schedule = schedule;
        Ok(())
    }

    pub fn densities(&self) -> &DensityField {
        &self.densities
    }

    pub fn iteration(&self) -> usize {
        self.iter
    }

    pub fn history(&self) -> &[IterationRecord] {
        &self.history
    }

    fn volume_target(&self, v: f64, c: f64) -> Result<f64> {
        Ok(match self.schedule {
            VolumeSchedule::Fixed { volume } => volume,
            VolumeSchedule::Linear { start, step, target } => {
                (start + step * (self.iter - 1) as f64).min(target)
            }
            VolumeSchedule::Logarithmic {
                curve,
                v_final,
                form,
            } => {
                let floor = self.last_target.max(v).min(1.0);
                next_volume_with(&curve, c, floor, form)?.min(v_final.max(floor))
            }
        })
    }

    fn physical_of(&self, design: &[f64]) -> Vec<f64> {
        match self.config.filter_mode {
            FilterMode::Sensitivity => design.to_vec(),
            FilterMode::Density => self.filter.density(design),
        }
    }

    /// Move-limited OC candidate for multiplier `lambda`; `lambda = 0`
    /// gives the upper move bound.
    fn candidate(&self, x: &[f64], dc: &[f64], lambda: f64) -> Vec<f64> {
        let (m, eta, floor) = (
            self.config.move_limit,
            self.config.oc_damping,
            self.config.density_floor,
        );
        x.iter()
            .zip(dc)
            .zip(&self.dv_design)
            .map(|((&xe, &dce), &dve)| {
                let lo = (xe - m).max(floor);
                let hi = (xe + m).min(1.0);
                if lambda == 0.0 {
                    return hi;
                }
                let b = (-dce).max(0.0) / (lambda * dve);
                (xe * b.powf(eta)).clamp(lo, hi)
            })
            .collect()
    }

    /// Bisection on the Lagrange multiplier so that the mean physical
    /// density meets `target`.
    pub fn oc_update(&self, x: &[f64], dc: &[f64], target: f64) -> Result<OcStep> {
        if !(target > 0.0 && target <= 1.0) {
            return Err(Error::Domain(format!("volume target {target} outside (0, 1]")));
        }
        let dc: Vec<f64> = if dc.iter().all(|d| *d == 0.0) {
            vec![-1.0; dc.len()]
        } else {
            dc.to_vec()
        };
        let volume_at = |lambda: f64| {
            let design = self.candidate(x, &dc, lambda);
            let physical = self.physical_of(&design);
            let v = mean(&physical);
            (design, physical, v)
        };
        let done = |design, physical, lambda, saturated| OcStep {
            design,
            physical,
            lambda,
            saturated,
        };

        let (d_hi, p_hi, v_hi) = volume_at(0.0);
        if v_hi <= target + VOLUME_TOLERANCE {
            return Ok(done(d_hi, p_hi, 0.0, v_hi < target - VOLUME_TOLERANCE));
        }
        let mut l1 = 0.0;
        let mut l2 = LAMBDA_START;
        loop {
            let (d, p, v) = volume_at(l2);
            if v < target {
                break;
            }
            if l2 > 1e300 {
                return Ok(done(d, p, l2, v > target + VOLUME_TOLERANCE));
            }
            l1 = l2;
            l2 *= 1e3;
        }
        while l2 - l1 > BISECTION_TOLERANCE * (l1 + l2) {
            let mid = 0.5 * (l1 + l2);
            if volume_at(mid).2 > target {
                l1 = mid;
            } else {
                l2 = mid;
            }
        }
        let (design, physical, v) = volume_at(l1);
        if (v - target).abs() > VOLUME_TOLERANCE {
            return Err(Error::BracketFailure {
                target,
                achieved: v,
            });
        }
        Ok(done(design, physical, l1, false))
    }

    /// One full iteration: solve, sensitivities, filter, erosion, OC.
    pub fn step(&mut self) -> Result<IterationRecord> {
        self.iter += 1;
        let iter = self.iter;
        let analysis = self.problem.analyze(&self.densities)?;
        let c = analysis.mean_compliance;
        if !c.is_finite() || !analysis.objective.is_finite() {
            return Err(Error::NonFiniteCompliance {
                iter,
                detail: format!(
                    "per-case compliance {:?}, volume {}",
                    analysis.per_case,
                    self.densities.volume()
                ),
            });
        }
        let v = self.densities.volume();

        let (dc_phys, _) = sensitivities(&self.problem.law, &self.densities, &analysis.element_unit);
        let dc = match self.config.filter_mode {
            FilterMode::Sensitivity => self.filter.sensitivity(self.densities.design(), &dc_phys),
            FilterMode::Density => self.filter.chain(&dc_phys),
        };

        let v_target = self.volume_target(v, c)?;

        let mut report = ErosionReport::default();
        if let Some(spec) = self.erosion.filter(|s| s.is_due(iter)) {
            let (eroded, r) = erosion::apply(&self.densities, &self.problem.mesh, &spec)?;
            if r.degenerate {
                log::warn!("erosion radius {} exceeds the domain; skipped", spec.radius);
            }
            self.densities = eroded;
            report = r;
        }

        let x = self.densities.design().to_vec();
        let step = self.oc_update(&x, &dc, v_target)?;
        if step.saturated {
            log::debug!("iteration {iter}: volume target {v_target} limited by move bounds");
        }
        let change = step
            .design
            .iter()
            .zip(&x)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        self.densities = DensityField::new(step.design, step.physical)?;
        self.last_target = self.last_target.max(v_target);

        let record = IterationRecord {
            iter,
            v: self.densities.volume(),
            c,
            objective: analysis.objective,
            change,
            v_target,
            erased_count: report.erased_count,
            volume_removed: report.volume_removed,
        };
        self.history.push(record.clone());
        Ok(record)
    }

    /// Installs `field` as the current state and records it as one iteration
    /// whose compliance is that of `field` itself.
    pub(crate) fn replace_state(&mut self, field: DensityField, analysis: &Analysis) -> IterationRecord {
        self.iter += 1;
        let change = field
            .design()
            .iter()
            .zip(self.densities.design())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let v = field.volume();
        self.densities = field;
        let record = IterationRecord {
            iter: self.iter,
            v,
            c: analysis.mean_compliance,
            objective: analysis.objective,
            change,
            v_target: v,
            erased_count: 0,
            volume_removed: 0.0,
        };
        self.history.push(record.clone());
        record
    }

    /// Whether the latest record satisfies the stopping rule.
    pub fn finished(&self) -> Option<RunStatus> {
        let last = self.history.last()?;
        let tol = self.config.tol;
        let status = match self.schedule {
            VolumeSchedule::Fixed { .. } => (last.change <= tol).then_some(RunStatus::Converged),
            VolumeSchedule::Linear { target, .. } => {
                (last.v_target >= target && last.change <= tol).then_some(RunStatus::Converged)
            }
            VolumeSchedule::Logarithmic { v_final, .. } => {
                if last.v >= v_final - VOLUME_TOLERANCE {
                    Some(RunStatus::VolumeReached)
                } else {
                    let prev = self
                        .history
                        .iter()
                        .rev()
                        .nth(1)
                        .map_or(0.0, |r| r.v_target);
                    let settled = last.v_target - prev <= VOLUME_TOLERANCE;
                    (last.change <= tol && settled).then_some(RunStatus::Converged)
                }
            }
        };
        status.or((self.iter >= self.config.max_iter).then_some(RunStatus::MaxIterations))
    }

    /// Iterates until the stopping rule fires, handing every state to `sink`.
    pub fn run(&mut self, sink: &mut dyn IterationSink) -> Result<RunStatus> {
        loop {
            let record = self.step()?;
            sink.record(&record, &self.densities)?;
            if let Some(status) = self.finished() {
                log::info!(
                    "stopped after {} iterations ({status:?}): v = {:.4}, c = {:.6}",
                    record.iter,
                    record.v,
                    record.c
                );
                return Ok(status);
            }
        }
    }
}

/// Consecutive low-change iterations after which a vertical jump counts as
/// stalled.
pub const STALL_WINDOW: usize = 50;

const LANDING_STEPS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanOutcome {
    pub mode: String,
    pub threshold: f64,
    pub source_v0: f64,
    pub target_v0: f64,
    /// Iteration at which the run left the source curve.
    pub switch_iter: Option<usize>,
    pub final_iter: usize,
    pub final_v: f64,
    pub final_c: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Approach,
    Jump,
}

/// Executes a chain of interpolation plans on a growth run.
pub struct PlanRunner<'a> {
    optimizer: &'a mut Optimizer,
    budget: usize,
}

impl<'a> PlanRunner<'a> {
    /// `budget` caps the iterations spent on each plan.
    pub fn new(optimizer: &'a mut Optimizer, budget: usize) -> Result<Self> {
        if optimizer.schedule().curve().is_none() {
            return Err(Error::InvalidParameter(
                "interpolation needs a run on a logarithmic growth curve".into(),
            ));
        }
        Ok(Self { optimizer, budget })
    }

    pub fn execute(
        &mut self,
        plans: &[InterpolationPlan],
        sink: &mut dyn IterationSink,
    ) -> Result<Vec<PlanOutcome>> {
        let mut outcomes = Vec::with_capacity(plans.len());
        for plan in plans {
            outcomes.push(self.execute_one(plan, sink)?);
        }
        Ok(outcomes)
    }

    fn execute_one(
        &mut self,
        plan: &InterpolationPlan,
        sink: &mut dyn IterationSink,
    ) -> Result<PlanOutcome> {
        let source = *self
            .optimizer
            .schedule()
            .curve()
            .expect("checked at construction");
        let target = *plan.target();
        let v_final = match self.optimizer.schedule() {
            VolumeSchedule::Logarithmic { v_final, .. } => *v_final,
            _ => 1.0,
        };
        let on_target = VolumeSchedule::logarithmic(target, v_final.max(target.v0() + 1e-9));

        let approach = match plan {
            InterpolationPlan::Horizontal { .. } => VolumeSchedule::logarithmic(source, v_final),
            InterpolationPlan::Vertical {
                volume_threshold, ..
            } => VolumeSchedule::logarithmic(source, *volume_threshold),
        };
        self.optimizer.set_schedule(approach)?;

        let outcome = |record: &IterationRecord, switch_iter| PlanOutcome {
            mode: plan.mode_name().to_string(),
            threshold: plan.threshold(),
            source_v0: source.v0(),
            target_v0: target.v0(),
            switch_iter,
            final_iter: record.iter,
            final_v: record.v,
            final_c: record.c,
            residual: target.residual(record.v, record.c),
        };

        let mut phase = Phase::Approach;
        let mut switch_iter = None;
        let mut stalled = 0;
        let mut last_c: Option<f64> = None;
        let mut previous: Option<DensityField> = None;
        let tol = self.optimizer.config().tol;

        for _ in 0..self.budget {
            let before = self.optimizer.densities().clone();
            let jumping = phase == Phase::Jump;
            let record = self.optimizer.step()?;
            sink.record(&record, self.optimizer.densities())?;
            let (v, c) = (record.v, record.c);

            if phase == Phase::Approach && plan.threshold_reached(v, c) {
                phase = Phase::Jump;
                switch_iter = Some(record.iter);
                let jump = match plan {
                    InterpolationPlan::Horizontal { .. } => on_target,
                    InterpolationPlan::Vertical {
                        volume_threshold, ..
                    } => VolumeSchedule::Fixed {
                        volume: *volume_threshold,
                    },
                };
                self.optimizer.set_schedule(jump)?;
                log::info!(
                    "{} jump at iteration {}: v = {v:.4}, c = {c:.6}",
                    plan.mode_name(),
                    record.iter
                );
            } else if phase == Phase::Jump && !plan.on_target(v, c) {
                if let InterpolationPlan::Vertical { .. } = plan {
                    // fixed-volume steps only lower c; a step that jumps across
                    // the target curve is resolved by a line search between
                    // the two fields that bracket it
                    if let (Some(prev), Some(prev_c)) = (&previous, last_c) {
                        let s_prev = 1.0 / prev_c - target.inverse_compliance(before.volume());
                        let s_now = 1.0 / c - target.inverse_compliance(before.volume());
                        if s_prev < 0.0 && s_now > 0.0 {
                            if let Some(landed) = self.land(prev, &before, &target)? {
                                sink.record(&landed, self.optimizer.densities())?;
                                self.optimizer.set_schedule(on_target)?;
                                return Ok(outcome(&landed, switch_iter));
                            }
                        }
                    }
                    let slow = last_c.is_some_and(|prev| ((c - prev) / prev).abs() < tol);
                    stalled = if slow { stalled + 1 } else { 0 };
                    if stalled >= STALL_WINDOW {
                        return Err(Error::StalledConvergence {
                            iterations: record.iter,
                            residual: target.residual(v, c),
                        });
                    }
                }
            }
            if phase == Phase::Jump && plan.on_target(v, c) {
                self.optimizer.set_schedule(on_target)?;
                return Ok(outcome(&record, switch_iter));
            }
            if jumping {
                last_c = Some(c);
                previous = Some(before);
            }
        }

        let last = self.optimizer.history().last().cloned();
        let (v, c) = last.map_or((f64::NAN, f64::NAN), |r| (r.v, r.c));
        let residual = target.residual(v, c);
        match plan {
            InterpolationPlan::Vertical { .. } if phase == Phase::Jump => {
                Err(Error::StalledConvergence {
                    iterations: self.optimizer.iteration(),
                    residual,
                })
            }
            _ => Err(Error::Unreachable(format!(
                "{} plan toward v0 = {} did not reach the target curve within {} iterations \
                 (v = {v:.4}, c = {c:.6}, residual {residual:.3e})",
                plan.mode_name(),
                target.v0(),
                self.budget
            ))),
        }
    }

    /// Bisects on the blend `(1 - t) a + t b` for a field on `target`.
    fn land(
        &mut self,
        a: &DensityField,
        b: &DensityField,
        target: &GrowthCurve,
    ) -> Result<Option<IterationRecord>> {
        let blend = |t: f64| {
            let mix = |x: &[f64], y: &[f64]| -> Vec<f64> {
                x.iter().zip(y).map(|(p, q)| (1.0 - t) * p + t * q).collect()
            };
            DensityField::new(mix(a.design(), b.design()), mix(a.physical(), b.physical()))
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..LANDING_STEPS {
            let t = 0.5 * (lo + hi);
            let field = blend(t)?;
            let analysis = self.optimizer.problem().analyze(&field)?;
            let (v, c) = (field.volume(), analysis.mean_compliance);
            let s = 1.0 / c - target.inverse_compliance(v);
            if s.abs() <= crate::growth::CURVE_TOLERANCE {
                log::info!("landed on target curve at blend {t:.4}: v = {v:.4}, c = {c:.6}");
                return Ok(Some(self.optimizer.replace_state(field, &analysis)));
            }
            if s < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
        }
        Ok(None)
    }
}
