//! The `cfreg` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 I/O error, 3 degenerate input.
//! Diagnostics go to standard error; results go to standard output or to the
//! files named by the flags.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::datasets::Dataset;
use crate::error::{Error, ErrorClass, Result};
use crate::features::{detect_keypoints, normals_and_fpfh, KeypointParams};
use crate::geom::RigidTransform;
use crate::harness::{
    run_experiment, write_csv, Algorithm, ExperimentConfig, ExperimentKind, OutlierShape, RotationMode,
};
use crate::icp::{register_icp, IcpParams};
use crate::io::{
    format_transform, fpfh_csv, keypoints_csv, normals_csv, read_cloud, write_cloud, write_text, write_transform,
    CloudFormat,
};
use crate::solver::{register_cf, register_cfk, Execution, SolverConfig, DEFAULT_BETA, DEFAULT_K};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;

pub fn exit_code(class: ErrorClass) -> i32 {
    match class {
        ErrorClass::Usage => EXIT_USAGE,
        ErrorClass::Io => EXIT_IO,
        ErrorClass::Degenerate => EXIT_DEGENERATE,
    }
}

#[derive(Debug, Parser)]
#[command(name = "cfreg", version, about = "Correspondence-free rigid point cloud registration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Register <SRC> onto <DST> and write the 4x4 transform.
    Register(RegisterArgs),
    /// Export normals and FPFH descriptors as CSV.
    Features(FeaturesArgs),
    /// Detect keypoints and export them as CSV.
    Keypoints(KeypointsArgs),
    /// Run one of the seeded studies.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AlgoArg {
    Cf,
    Cfk,
    Icp,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Cf => Algorithm::Cf,
            AlgoArg::Cfk => Algorithm::Cfk,
            AlgoArg::Icp => Algorithm::Icp,
        }
    }
}

#[derive(Debug, Args)]
struct RegisterArgs {
    src: PathBuf,
    dst: PathBuf,
    #[arg(long, value_enum, default_value = "cf")]
    algo: AlgoArg,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    beta: f64,
    /// Transform file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the source cloud moved by the estimate (.ply or .xyz).
    #[arg(long)]
    transformed: Option<PathBuf>,
    /// Write solver diagnostics as JSON.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
    /// Single-threaded, bit-reproducible numerics.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Debug, Args)]
struct FeaturesArgs {
    src: PathBuf,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    /// `index,nx,ny,nz,variation,valid`; standard output when no file is given.
    #[arg(long)]
    normals_out: Option<PathBuf>,
    /// `index,f0..f32`.
    #[arg(long)]
    fpfh_out: Option<PathBuf>,
    #[arg(long)]
    deterministic: bool,
}

#[derive(Debug, Args)]
struct KeypointsArgs {
    src: PathBuf,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    /// Minimum surface variation.
    #[arg(long)]
    tau: Option<f64>,
    /// Suppression radius in dataset units; defaults to a multiple of the median point spacing.
    #[arg(long)]
    nms: Option<f64>,
    #[arg(long)]
    max: Option<usize>,
    /// CSV file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Noise,
    Outliers,
    Accuracy,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RotationArg {
    Small,
    Large,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ShapeArg {
    Volume,
    Surface,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    kind: KindArg,
    /// bunny, dragon, armadillo or a cloud file path.
    #[arg(long, default_value = "bunny")]
    dataset: String,
    /// Trials per noise level, or in total.
    #[arg(long)]
    trials: Option<usize>,
    /// Use the original study's trial counts (30 per noise level, 100 for outliers).
    #[arg(long, conflicts_with = "trials")]
    full: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, value_delimiter = ',', default_values = ["cf", "cfk", "icp"])]
    algos: Vec<AlgoArg>,
    #[arg(long, value_enum, default_value = "large")]
    rotation: RotationArg,
    /// One rotation shared by every trial and noise level.
    #[arg(long)]
    fixed_rotation: bool,
    #[arg(long, value_delimiter = ',')]
    sigmas: Option<Vec<f64>>,
    #[arg(long, default_value_t = 500)]
    sample_size: usize,
    #[arg(long, default_value_t = 100)]
    outliers: usize,
    #[arg(long, default_value_t = 0.2)]
    outlier_radius: f64,
    #[arg(long, value_enum, default_value = "volume")]
    outlier_shape: ShapeArg,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    beta: f64,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    plot: Option<PathBuf>,
    /// Sequential numerics and an empty wall_ms column, for byte-identical CSV.
    #[arg(long)]
    deterministic: bool,
}

/// Parses `argv` (program name first) and runs the command. Returns the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(argv, &mut stdout.lock(), &mut stderr.lock())
}

/// [`cli_main`] with explicit output streams.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match cli.command {
        Command::Register(a) => register(a, out),
        Command::Features(a) => features(a, out),
        Command::Keypoints(a) => keypoints(a, out),
        Command::Experiment(a) => experiment(a, out, err),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "cfreg: {e}");
            exit_code(e.class())
        }
    }
}

fn execution(deterministic: bool) -> Execution {
    if deterministic {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| Error::Io { path: PathBuf::from("<stdout>"), source: e })
}

fn output_format(path: &Path) -> Result<CloudFormat> {
    CloudFormat::from_extension(path).ok_or_else(|| {
        Error::InvalidArgument(format!("cannot infer a cloud format from '{}'; use .ply or .xyz", path.display()))
    })
}

fn register(a: RegisterArgs, out: &mut dyn Write) -> Result<()> {
    if let Some(p) = &a.transformed {
        output_format(p)?;
    }
    let source = read_cloud(&a.src)?;
    let target = read_cloud(&a.dst)?;
    let exec = execution(a.deterministic);
    let cfg = SolverConfig { k: a.k, beta: a.beta, execution: exec, ..Default::default() };
    let result = match a.algo {
        AlgoArg::Cf => register_cf(&source, &target, &cfg)?,
        AlgoArg::Cfk => register_cfk(&source, &target, &cfg)?,
        AlgoArg::Icp => {
            let params = IcpParams { execution: exec, ..Default::default() };
            register_icp(&source, &target, &params, &RigidTransform::identity())?
        }
    };
    match &a.out {
        Some(p) => write_transform(&result.transform, p)?,
        None => emit(out, &format_transform(&result.transform))?,
    }
    if let Some(p) = &a.transformed {
        write_cloud(&source.transformed(&result.transform), p, output_format(p)?)?;
    }
    if let Some(p) = &a.diagnostics {
        let json = serde_json::to_string_pretty(&result.diagnostics).expect("diagnostics serialize");
        write_text(p, &(json + "\n"))?;
    }
    Ok(())
}

fn features(a: FeaturesArgs, out: &mut dyn Write) -> Result<()> {
    let cloud = read_cloud(&a.src)?;
    let cfg = SolverConfig { k: a.k, ..Default::default() };
    cfg.validate()?;
    if cloud.len() < a.k {
        return Err(Error::TooFewPoints { requested: a.k, available: cloud.len() });
    }
    let (normals, descriptors) = normals_and_fpfh(&cloud, a.k, !a.deterministic)?;
    match (&a.normals_out, &a.fpfh_out) {
        (None, None) => emit(out, &normals_csv(&normals))?,
        (n, f) => {
            if let Some(p) = n {
                write_text(p, &normals_csv(&normals))?;
            }
            if let Some(p) = f {
                write_text(p, &fpfh_csv(&descriptors))?;
            }
        }
    }
    Ok(())
}

fn keypoints(a: KeypointsArgs, out: &mut dyn Write) -> Result<()> {
    let cloud = read_cloud(&a.src)?;
    let defaults = KeypointParams::default();
    let params = KeypointParams {
        nms_radius: a.nms,
        threshold: a.tau.unwrap_or(defaults.threshold),
        max_keypoints: a.max.unwrap_or(defaults.max_keypoints),
        ..defaults
    };
    if let Some(r) = params.nms_radius {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidArgument(format!("--nms must be positive, got {r}")));
        }
    }
    if cloud.len() < a.k {
        return Err(Error::TooFewPoints { requested: a.k, available: cloud.len() });
    }
    let (normals, _) = normals_and_fpfh(&cloud, a.k, true)?;
    let kp = detect_keypoints(&cloud, &normals, &params)?;
    let text = keypoints_csv(&cloud, &kp);
    match &a.out {
        Some(p) => write_text(p, &text),
        None => emit(out, &text),
    }
}

fn experiment(a: ExperimentArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let kind = match a.kind {
        KindArg::Noise => ExperimentKind::Noise,
        KindArg::Outliers => ExperimentKind::Outliers,
        KindArg::Accuracy => ExperimentKind::Accuracy,
    };
    let defaults = ExperimentConfig::default();
    let mut algorithms: Vec<Algorithm> = Vec::new();
    for alg in a.algos.iter().map(|&x| Algorithm::from(x)) {
        if !algorithms.contains(&alg) {
            algorithms.push(alg);
        }
    }
    let cfg = ExperimentConfig {
        dataset: Dataset::parse(&a.dataset),
        sample_size: a.sample_size,
        rotation_mode: match a.rotation {
            RotationArg::Small => RotationMode::SmallCentered,
            RotationArg::Large => RotationMode::LargeOrigin,
        },
        sigmas: a.sigmas.unwrap_or(defaults.sigmas),
        outlier_count: a.outliers,
        outlier_radius: a.outlier_radius,
        outlier_shape: match a.outlier_shape {
            ShapeArg::Volume => OutlierShape::Volume,
            ShapeArg::Surface => OutlierShape::Surface,
        },
        trials: match (a.full, a.trials) {
            (true, _) => kind.full_trials(),
            (false, Some(n)) => n,
            (false, None) => defaults.trials,
        },
        master_seed: a.seed,
        algorithms,
        solver: SolverConfig { k: a.k, beta: a.beta, ..Default::default() },
        icp: IcpParams::default(),
        fixed_rotation: a.fixed_rotation,
        deterministic: a.deterministic,
    };
    let report = run_experiment(kind, &cfg)?;
    let fallbacks = report.records.iter().filter(|r| r.fell_back).count();
    if fallbacks > 0 {
        let _ = writeln!(err, "cfreg: cfk fell back to cf in {fallbacks} trial(s) with too few keypoints");
    }
    if let Some(p) = &a.csv {
        write_csv(report.rows(), p)?;
    }
    if let Some(p) = &a.plot {
        write_text(p, &report.plot_svg(&cfg.dataset.label()))?;
    }
    let mut table = String::from("algorithm\tsigma\toutliers\ttrials\tavg_shift\trot_acc\tt_err\n");
    for s in &report.summary {
        let _ = writeln!(
            table,
            "{}\t{}\t{}\t{}\t{:.6}±{:.6}\t{:.6}±{:.6}\t{:.6}±{:.6}",
            s.algorithm,
            s.sigma,
            s.outliers,
            s.trials,
            s.avg_shift.mean,
            s.avg_shift.std,
            s.rot_acc.mean,
            s.rot_acc.std,
            s.t_err.mean,
            s.t_err.std
        );
    }
    emit(out, &table)
}
