use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use topogrow::fem::FieldKind;
use topogrow::freq::{band_query, BandGap, BandMode, FreqCurve};
use topogrow::growth::{interpolate_horizontal, interpolate_vertical, GrowthCurve, InterpolationPlan};
use topogrow::io::archive::{
    read_history, run_to_archive, ArchiveStatus, RunArchive, RunOutcome, FIELDS_DIR, HISTORY_FILE,
};
use topogrow::io::config::{fixture_config, resolve_output, RunConfig};
use topogrow::io::dataset::build_dataset;
use topogrow::io::fields::export_fields;
use topogrow::io::fixtures::Fixture;
use topogrow::io::tables::{band_rows, curve_rows, freq_rows, write_rows, RunRow};
use topogrow::fem::DensityField;
use topogrow::{Error, Result};

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_UNREACHABLE: u8 = 4;
const EXIT_IO: u8 = 5;
const EXIT_MAX_ITER: u8 = 6;

#[derive(Parser)]
#[command(name = "topogrow", version, about = "Topology optimization with logarithmic volume growth")]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration into an archive.
    Optimize {
        config: PathBuf,
        /// Archive directory; overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grow one run per starting volume and export the curve family.
    Curve(CurveArgs),
    /// Re-run a growth archive and jump between curves.
    Interpolate(InterpolateArgs),
    /// Collect final densities of archives into a training set.
    Dataset {
        #[arg(long)]
        out: PathBuf,
        /// Image size as WxH, e.g. 150x50.
        #[arg(long, value_parser = parse_size)]
        size: Option<(usize, usize)>,
        #[arg(required = true)]
        archives: Vec<PathBuf>,
    },
    /// Export field images of an archive's final state.
    Fields {
        archive: PathBuf,
        /// Field kinds to export (default: all).
        #[arg(long, value_delimiter = ',')]
        kinds: Vec<FieldKind>,
        /// Mask threshold as kind=value; repeatable.
        #[arg(long = "threshold", value_parser = parse_threshold)]
        thresholds: Vec<(FieldKind, f64)>,
        /// Output directory (default: <archive>/fields).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Normalized frequency curves and optional band-gap selection.
    Freq(FreqArgs),
}

#[derive(Args)]
struct CurveArgs {
    #[arg(long, default_value = "threepoint")]
    fixture: Fixture,
    /// Base configuration; its growth settings are overridden per run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', required = true)]
    v0: Vec<f64>,
    #[arg(long, default_value_t = 0.95)]
    v_final: f64,
    /// Compliance whose first crossing is reported per run.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct InterpolateArgs {
    /// Growth archive to start from.
    source: PathBuf,
    /// `horizontal:<c_t>:<v0>` or `vertical:<v_t>:<v0>`; repeat to chain.
    #[arg(long = "plan", required = true, value_parser = parse_plan)]
    plans: Vec<PlanSpec>,
    /// Iteration budget per plan.
    #[arg(long, default_value_t = 400)]
    budget: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FreqArgs {
    /// Analytic curves for these starting volumes.
    #[arg(long, value_delimiter = ',')]
    v0: Vec<f64>,
    /// Solid compliance for analytic curves; taken from the fixture if absent.
    #[arg(long)]
    c_min: Option<f64>,
    #[arg(long)]
    fixture: Option<Fixture>,
    /// Use run histories instead of analytic curves.
    #[arg(long = "archive")]
    archives: Vec<PathBuf>,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    /// Band as lo,hi in normalized frequency.
    #[arg(long, value_delimiter = ',')]
    band: Vec<f64>,
    #[arg(long, value_enum, default_value_t = ModeArg::Avoid)]
    mode: ModeArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Avoid,
    Target,
}

#[derive(Clone, Copy, Debug)]
enum PlanSpec {
    Horizontal { c_t: f64, v0: f64 },
    Vertical { v_t: f64, v0: f64 },
}

fn parse_plan(s: &str) -> std::result::Result<PlanSpec, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [mode, threshold, v0] = parts[..] else {
        return Err("expected mode:threshold:v0".into());
    };
    let threshold = f64::from_str(threshold).map_err(|e| e.to_string())?;
    let v0 = f64::from_str(v0).map_err(|e| e.to_string())?;
    match mode {
        "horizontal" | "h" => Ok(PlanSpec::Horizontal { c_t: threshold, v0 }),
        "vertical" | "v" => Ok(PlanSpec::Vertical { v_t: threshold, v0 }),
        other => Err(format!("unknown mode `{other}`")),
    }
}

fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let (w, h) = s.split_once('x').ok_or("expected WxH")?;
    Ok((
        w.parse().map_err(|e| format!("{e}"))?,
        h.parse().map_err(|e| format!("{e}"))?,
    ))
}

fn parse_threshold(s: &str) -> std::result::Result<(FieldKind, f64), String> {
    let (k, v) = s.split_once('=').ok_or("expected kind=value")?;
    let kind = FieldKind::from_str(k).map_err(|e| e.to_string())?;
    Ok((kind, v.parse().map_err(|e| format!("{e}"))?))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::InvalidMesh(_)
        | Error::InvalidMaterial(_)
        | Error::InvalidParameter(_)
        | Error::UnknownFieldKind(_)
        | Error::DegenerateCurve(_)
        | Error::Domain(_)
        | Error::DimensionMismatch { .. }
        | Error::Resize(_) => EXIT_CONFIG,
        Error::Unreachable(_) | Error::StalledConvergence { .. } => EXIT_UNREACHABLE,
        Error::Io { .. } | Error::Archive { .. } => EXIT_IO,
        _ => EXIT_SOLVER,
    }
}

fn outcome_code(outcome: &RunOutcome) -> u8 {
    match (&outcome.failure, outcome.manifest.status) {
        (Some(e), _) => exit_code(e),
        (None, ArchiveStatus::MaxIterations) => EXIT_MAX_ITER,
        _ => 0,
    }
}

fn report(outcome: &RunOutcome) {
    let m = &outcome.manifest;
    println!(
        "{}: {:?} after {} iterations, v = {:.4}, c = {:.6}",
        outcome.dir.display(),
        m.status,
        m.iterations,
        m.final_v,
        m.final_c
    );
    for p in &m.plans {
        println!(
            "  {} {} -> v0 {}: switch {:?}, final iter {}, residual {:.3e}",
            p.mode, p.threshold, p.target_v0, p.switch_iter, p.final_iter, p.residual
        );
    }
    if let Some(e) = &outcome.failure {
        eprintln!("error: {e}");
    }
}

fn base_dir(config: &Path) -> PathBuf {
    config
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn optimize(config_path: &Path, out: Option<&Path>) -> Result<u8> {
    let (config, _) = RunConfig::load(config_path)?;
    let dir = match out {
        Some(d) => resolve_output(d),
        None => config.output_dir(),
    };
    let outcome = run_to_archive(&config, &base_dir(config_path), &dir, &[], 0, None)?;
    report(&outcome);
    Ok(outcome_code(&outcome))
}

#[derive(Serialize)]
struct FanSummary {
    v0: f64,
    iterations: usize,
    final_v: f64,
    final_c: f64,
    iter_to_threshold: Option<usize>,
}

fn curve(args: &CurveArgs) -> Result<u8> {
    let (base, base_dir) = match &args.config {
        Some(p) => (RunConfig::load(p)?.0, self::base_dir(p)),
        None => (fixture_config(args.fixture), PathBuf::from(".")),
    };
    let mut configs = Vec::with_capacity(args.v0.len());
    for &v0 in &args.v0 {
        let mut cfg = base.clone();
        cfg.growth.enabled = true;
        cfg.growth.schedule = Default::default();
        cfg.growth.v0 = v0;
        cfg.growth.v_f = args.v_final;
        cfg.validate()?;
        configs.push(cfg);
    }
    let out = resolve_output(&args.out);
    std::fs::create_dir_all(&out).map_err(|e| Error::Io {
        path: out.clone(),
        source: e,
    })?;
    let outcomes: Vec<Result<RunOutcome>> = configs
        .par_iter()
        .map(|cfg| {
            let dir = out.join(format!("v0_{}", cfg.growth.v0));
            run_to_archive(cfg, &base_dir, &dir, &[], 0, None)
        })
        .collect();

    let mut code = 0;
    let mut curves = Vec::new();
    let mut runs = Vec::new();
    let mut summary = Vec::new();
    for (cfg, outcome) in configs.iter().zip(outcomes) {
        let outcome = outcome?;
        report(&outcome);
        code = code.max(outcome_code(&outcome));
        let m = &outcome.manifest;
        curves.push(GrowthCurve::new(cfg.growth.v0, m.c_min)?);
        let history = read_history(&outcome.dir.join(HISTORY_FILE))?;
        runs.extend(history.iter().map(|r| RunRow {
            v0: cfg.growth.v0,
            iter: r.iter,
            v: r.v,
            c: r.c,
            inv_c: 1.0 / r.c,
        }));
        summary.push(FanSummary {
            v0: cfg.growth.v0,
            iterations: m.iterations,
            final_v: m.final_v,
            final_c: m.final_c,
            iter_to_threshold: args
                .threshold
                .and_then(|t| history.iter().find(|r| r.c <= t).map(|r| r.iter)),
        });
    }
    write_rows(&out.join("curves.csv"), &curve_rows(&curves, args.samples)?)?;
    write_rows(&out.join("runs.csv"), &runs)?;
    write_rows(&out.join("summary.csv"), &summary)?;
    Ok(code)
}

fn build_plans(source: GrowthCurve, specs: &[PlanSpec]) -> Result<Vec<InterpolationPlan>> {
    let mut current = source;
    let mut plans = Vec::with_capacity(specs.len());
    for spec in specs {
        let plan = match *spec {
            PlanSpec::Horizontal { c_t, v0 } => {
                interpolate_horizontal(&current, c_t, &GrowthCurve::new(v0, current.c_min())?)?
            }
            PlanSpec::Vertical { v_t, v0 } => {
                interpolate_vertical(&current, v_t, &GrowthCurve::new(v0, current.c_min())?)?
            }
        };
        current = *plan.target();
        plans.push(plan);
    }
    Ok(plans)
}

fn interpolate(args: &InterpolateArgs) -> Result<u8> {
    let source = RunArchive::open(&args.source)?;
    source.verify()?;
    let config = &source.config;
    if !config.growth.enabled {
        return Err(Error::Config(
            "source archive is not a logarithmic growth run".into(),
        ));
    }
    let curve = GrowthCurve::new(config.growth.v0, source.manifest.c_min)?;
    let plans = build_plans(curve, &args.plans)?;
    let dir = resolve_output(&args.out);
    let outcome = run_to_archive(
        config,
        &source.dir,
        &dir,
        &plans,
        args.budget,
        Some(&source.dir),
    )?;
    report(&outcome);
    Ok(outcome_code(&outcome))
}

fn fields(
    archive: &Path,
    kinds: &[FieldKind],
    thresholds: &[(FieldKind, f64)],
    out: Option<&Path>,
) -> Result<u8> {
    let archive = RunArchive::open(archive)?;
    let resolved = archive.config.resolve(&archive.dir)?;
    let mesh = resolved.problem.mesh;
    if (archive.density.nelx, archive.density.nely) != (mesh.nelx(), mesh.nely()) {
        return Err(Error::Archive {
            path: archive.dir.clone(),
            reason: "density size differs from the config mesh".into(),
        });
    }
    let values = archive.density.to_element_order(&mesh, 0.0);
    let densities = DensityField::from_physical(values)?;
    let kinds = if kinds.is_empty() {
        FieldKind::ALL.to_vec()
    } else {
        kinds.to_vec()
    };
    let dir = out.map_or_else(|| archive.dir.join(FIELDS_DIR), resolve_output);
    for e in export_fields(&dir, &resolved.problem, &densities, &kinds, thresholds)? {
        match e.mask {
            Some(m) => println!(
                "{} case {}: max {:.6e}, mask > {} covers {} elements in {} components",
                e.kind, e.case, e.max_abs, m.threshold, m.area, m.components
            ),
            None => println!("{} case {}: max {:.6e}", e.kind, e.case, e.max_abs),
        }
    }
    Ok(0)
}

fn freq(args: &FreqArgs) -> Result<u8> {
    let mut curves = Vec::new();
    if !args.archives.is_empty() {
        for dir in &args.archives {
            let a = RunArchive::open(dir)?;
            let pairs: Vec<(f64, f64)> = a.history.iter().map(|r| (r.v, r.c)).collect();
            curves.push(FreqCurve::from_history(a.manifest.v0, a.manifest.c_min, &pairs)?);
        }
    }
    if !args.v0.is_empty() {
        let c_min = match (args.c_min, args.fixture) {
            (Some(c), _) => c,
            (None, Some(f)) => fixture_config(f)
                .resolve(Path::new("."))?
                .solid_compliance()?,
            (None, None) => 1.0,
        };
        for &v0 in &args.v0 {
            curves.push(FreqCurve::from_curve(&GrowthCurve::new(v0, c_min)?, args.samples)?);
        }
    }
    if curves.is_empty() {
        return Err(Error::Config("give --v0 or --archive".into()));
    }
    let out = resolve_output(&args.out);
    std::fs::create_dir_all(&out).map_err(|e| Error::Io {
        path: out.clone(),
        source: e,
    })?;
    write_rows(&out.join("freq.csv"), &freq_rows(&curves))?;
    if !args.band.is_empty() && args.band.len() != 2 {
        return Err(Error::Config("--band takes lo,hi".into()));
    }
    if let [lo, hi] = args.band[..] {
        let mode = match args.mode {
            ModeArg::Avoid => BandMode::Avoid,
            ModeArg::Target => BandMode::Target,
        };
        let segments = band_query(&curves, &BandGap::new(lo, hi)?, mode)?;
        for s in &segments {
            println!("v0 {}: [{:.4}, {:.4}]", s.v0, s.v_lo, s.v_hi);
        }
        if segments.is_empty() {
            println!("no volumes satisfy the band condition");
        }
        write_rows(&out.join("band.csv"), &band_rows(&segments, mode))?;
    }
    Ok(0)
}

fn dispatch(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Optimize { config, out } => optimize(config, out.as_deref()),
        Command::Curve(args) => curve(args),
        Command::Interpolate(args) => interpolate(args),
        Command::Dataset {
            out,
            size,
            archives,
        } => {
            let rows = build_dataset(archives, &resolve_output(out), *size)?;
            println!("{} rows written", rows.len());
            Ok(0)
        }
        Command::Fields {
            archive,
            kinds,
            thresholds,
            out,
        } => fields(archive, kinds, thresholds, out.as_deref()),
        Command::Freq(args) => freq(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
