//! Seeded experiment runners: noise sensitivity, outlier robustness and
//! rotation accuracy.
//!
//! # Seeding
//!
//! Every random draw derives from the master seed through [`split_seed`]:
//!
//! - outlier and accuracy trials: `trial_seed = split_seed(master, i)`;
//! - noise trials at level `l`: `split_seed(split_seed(master, 1000 + l), i)`;
//! - inside a trial, sub-stream 0 draws the (first) subsample, 1 the second
//!   subsample of the accuracy study, 2 the rotation and 3 the corruption;
//! - with a fixed rotation, the rotation vector comes from
//!   `split_seed(master, FIXED_ROTATION_STREAM)` and is shared by all trials.
//!
//! The generated data never depends on the algorithm list or on how trials are
//! scheduled, so adding an algorithm leaves the other rows unchanged.

pub mod plot;
pub mod protocol;
pub mod report;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use plot::{errorbar_svg, Series};
pub use protocol::{
    add_gaussian_noise, add_spherical_outliers, average_shift, make_transform, subsample, OutlierShape, RotationMode,
};
pub use report::{csv_string, parse_csv, read_csv, summarize, write_csv, CsvRow, Stats, SummaryStats, TrialRecord};

use crate::datasets::Dataset;
use crate::error::{Error, Result};
use crate::geom::{axis_angle_to_rotation, rotation_accuracy, PointCloud, RigidTransform};
use crate::icp::{register_icp, IcpParams};
use crate::rng::split_seed;
use crate::solver::{register_cf, register_cfk, Execution, RegistrationResult, SolverConfig};

/// Stream of the master seed reserved for the shared rotation.
pub const FIXED_ROTATION_STREAM: u64 = 999;
const NOISE_LEVEL_STREAM_BASE: u64 = 1000;

const STREAM_SUBSAMPLE: u64 = 0;
const STREAM_SUBSAMPLE_B: u64 = 1;
const STREAM_ROTATION: u64 = 2;
const STREAM_CORRUPTION: u64 = 3;

pub const DEFAULT_SIGMAS: [f64; 5] = [0.002, 0.005, 0.01, 0.015, 0.02];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentKind {
    Noise,
    Outliers,
    Accuracy,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Noise => "noise",
            ExperimentKind::Outliers => "outliers",
            ExperimentKind::Accuracy => "accuracy",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "noise" => Some(ExperimentKind::Noise),
            "outliers" => Some(ExperimentKind::Outliers),
            "accuracy" => Some(ExperimentKind::Accuracy),
            _ => None,
        }
    }

    /// Trial counts of the original study: 30 clouds per noise level and 100
    /// robustness runs. The accuracy study uses the desk-scale 20.
    pub fn full_trials(self) -> usize {
        match self {
            ExperimentKind::Noise => 30,
            ExperimentKind::Outliers => 100,
            ExperimentKind::Accuracy => 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    Cf,
    Cfk,
    Icp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Cf, Algorithm::Cfk, Algorithm::Icp];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Cf => "cf",
            Algorithm::Cfk => "cfk",
            Algorithm::Icp => "icp",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cf" => Some(Algorithm::Cf),
            "cfk" => Some(Algorithm::Cfk),
            "icp" => Some(Algorithm::Icp),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: Dataset,
    pub sample_size: usize,
    pub rotation_mode: RotationMode,
    /// Noise levels; only the noise study reads this.
    pub sigmas: Vec<f64>,
    pub outlier_count: usize,
    pub outlier_radius: f64,
    pub outlier_shape: OutlierShape,
    /// Trials per noise level, or in total for the other studies.
    pub trials: usize,
    pub master_seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub solver: SolverConfig,
    pub icp: IcpParams,
    /// Share one rotation across every trial and level.
    pub fixed_rotation: bool,
    /// Sequential numerics and no wall-clock column, for byte-identical output.
    pub deterministic: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: Dataset::Bunny,
            sample_size: 500,
            rotation_mode: RotationMode::LargeOrigin,
            sigmas: DEFAULT_SIGMAS.to_vec(),
            outlier_count: 100,
            outlier_radius: 0.2,
            outlier_shape: OutlierShape::Volume,
            trials: 20,
            master_seed: 0,
            algorithms: Algorithm::ALL.to_vec(),
            solver: SolverConfig::default(),
            icp: IcpParams::default(),
            fixed_rotation: false,
            deterministic: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        self.icp.validate()?;
        if self.sample_size < self.solver.k {
            return Err(Error::InvalidArgument(format!(
                "sample size {} is smaller than k = {}",
                self.sample_size, self.solver.k
            )));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("trial count must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidArgument("no algorithm selected".into()));
        }
        if let Some(s) = self.sigmas.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument(format!("noise sigma must be nonnegative, got {s}")));
        }
        if !(self.outlier_radius >= 0.0 && self.outlier_radius.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "outlier radius must be nonnegative, got {}",
                self.outlier_radius
            )));
        }
        Ok(())
    }

    fn execution(&self) -> Execution {
        if self.deterministic {
            Execution::Sequential
        } else {
            self.solver.execution
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub kind: ExperimentKind,
    /// Ordered by noise level, then trial, then algorithm.
    pub records: Vec<TrialRecord>,
    pub summary: Vec<SummaryStats>,
}

impl ExperimentReport {
    fn new(kind: ExperimentKind, records: Vec<TrialRecord>) -> Self {
        let summary = summarize(records.iter().map(|r| &r.row));
        Self { kind, records, summary }
    }

    pub fn rows(&self) -> impl Iterator<Item = &CsvRow> {
        self.records.iter().map(|r| &r.row)
    }

    pub fn csv(&self) -> String {
        csv_string(self.rows())
    }

    /// Mean ± std curves: average shift against sigma for the noise study,
    /// the study's headline metric per algorithm otherwise.
    pub fn plot_svg(&self, dataset: &str) -> String {
        let mut series: Vec<Series> = Vec::new();
        for (i, s) in self.summary.iter().enumerate() {
            let (x, stat) = match self.kind {
                ExperimentKind::Noise => (s.sigma, s.avg_shift),
                ExperimentKind::Outliers => (i as f64, s.avg_shift),
                ExperimentKind::Accuracy => (i as f64, s.rot_acc),
            };
            match series.iter_mut().find(|se| se.name == s.algorithm) {
                Some(se) => se.points.push((x, stat.mean, stat.std)),
                None => series.push(Series { name: s.algorithm.clone(), points: vec![(x, stat.mean, stat.std)] }),
            }
        }
        let (x_label, y_label) = match self.kind {
            ExperimentKind::Noise => ("noise sigma", "average shift"),
            ExperimentKind::Outliers => ("algorithm", "average shift"),
            ExperimentKind::Accuracy => ("algorithm", "rotation accuracy"),
        };
        errorbar_svg(&format!("{} ({dataset})", self.kind.name()), x_label, y_label, &series)
    }
}

/// One generated trial: source, target and the motion relating them.
struct TrialData {
    source: PointCloud,
    target: PointCloud,
    truth: RigidTransform,
    /// Points the average shift is measured on.
    inliers: PointCloud,
}

fn fixed_rotation(cfg: &ExperimentConfig) -> Option<crate::geom::Rotation3> {
    cfg.fixed_rotation.then(|| {
        let seed = split_seed(cfg.master_seed, FIXED_ROTATION_STREAM);
        axis_angle_to_rotation(&crate::geom::sample_rotation_vector(cfg.rotation_mode.magnitude(), seed))
    })
}

fn ground_truth(
    cfg: &ExperimentConfig,
    fixed: Option<crate::geom::Rotation3>,
    cloud: &PointCloud,
    seed: u64,
) -> RigidTransform {
    match fixed {
        Some(r) => cfg.rotation_mode.place(r, cloud),
        None => make_transform(cfg.rotation_mode, cloud, split_seed(seed, STREAM_ROTATION)),
    }
}

fn run_algorithm(alg: Algorithm, data: &TrialData, cfg: &ExperimentConfig) -> Result<(RegistrationResult, bool)> {
    let exec = cfg.execution();
    let solver = SolverConfig { execution: exec, ..cfg.solver };
    match alg {
        Algorithm::Cf => Ok((register_cf(&data.source, &data.target, &solver)?, false)),
        Algorithm::Cfk => match register_cfk(&data.source, &data.target, &solver) {
            Ok(r) => Ok((r, false)),
            Err(Error::TooFewKeypoints { .. }) => {
                let mut r = register_cf(&data.source, &data.target, &solver)?;
                r.diagnostics.algorithm = "cfk".into();
                Ok((r, true))
            }
            Err(e) => Err(e),
        },
        Algorithm::Icp => {
            let params = IcpParams { execution: exec, ..cfg.icp };
            Ok((register_icp(&data.source, &data.target, &params, &RigidTransform::identity())?, false))
        }
    }
}

struct RowContext<'a> {
    kind: ExperimentKind,
    dataset: &'a str,
    trial: usize,
    seed: u64,
    sigma: f64,
    outliers: usize,
}

fn evaluate(data: &TrialData, ctx: &RowContext<'_>, cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.algorithms
        .iter()
        .map(|&alg| {
            let (res, fell_back) = run_algorithm(alg, data, cfg)?;
            let est = res.transform;
            let row = CsvRow {
                experiment: ctx.kind.name().into(),
                dataset: ctx.dataset.into(),
                algorithm: alg.name().into(),
                trial: ctx.trial,
                seed: ctx.seed,
                sigma: ctx.sigma,
                outliers: ctx.outliers,
                rotation_mode: cfg.rotation_mode.name().into(),
                avg_shift: average_shift(&est, &data.truth, &data.inliers)?,
                rot_acc: rotation_accuracy(&data.truth.rotation, &est.rotation),
                t_err: (est.translation - data.truth.translation).norm(),
                wall_ms: (!cfg.deterministic).then_some(res.diagnostics.timings.total_ms),
            };
            Ok(TrialRecord {
                row,
                ground_truth: data.truth,
                estimate: est,
                timings: res.diagnostics.timings,
                fell_back,
            })
        })
        .collect()
}

/// Runs `trial(i, seed)` for every trial, in parallel, and concatenates the
/// records in trial order.
fn run_trials<F>(cfg: &ExperimentConfig, parent_seed: u64, trial: F) -> Result<Vec<TrialRecord>>
where
    F: Fn(usize, u64) -> Result<Vec<TrialRecord>> + Sync,
{
    let per_trial: Vec<Result<Vec<TrialRecord>>> =
        (0..cfg.trials).into_par_iter().map(|i| trial(i, split_seed(parent_seed, i as u64))).collect();
    let mut out = Vec::with_capacity(cfg.trials * cfg.algorithms.len());
    for r in per_trial {
        out.extend(r?);
    }
    Ok(out)
}

fn load(cfg: &ExperimentConfig) -> Result<(PointCloud, String)> {
    cfg.validate()?;
    let cloud = cfg.dataset.load()?;
    if cloud.len() < cfg.sample_size {
        return Err(Error::TooFewPoints { requested: cfg.sample_size, available: cloud.len() });
    }
    Ok((cloud, cfg.dataset.label()))
}

/// Noise sensitivity: the target is the moved source plus Gaussian noise, one
/// batch of trials per sigma.
pub fn run_noise_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let (cloud, dataset) = load(cfg)?;
    if cfg.sigmas.is_empty() {
        return Err(Error::InvalidArgument("noise experiment needs at least one sigma".into()));
    }
    let fixed = fixed_rotation(cfg);
    let mut records = Vec::new();
    for (level, &sigma) in cfg.sigmas.iter().enumerate() {
        let level_seed = split_seed(cfg.master_seed, NOISE_LEVEL_STREAM_BASE + level as u64);
        records.extend(run_trials(cfg, level_seed, |trial, seed| {
            let (source, _) = subsample(&cloud, cfg.sample_size, split_seed(seed, STREAM_SUBSAMPLE))?;
            let truth = ground_truth(cfg, fixed, &source, seed);
            let target = add_gaussian_noise(&source.transformed(&truth), sigma, split_seed(seed, STREAM_CORRUPTION))?;
            let data = TrialData { inliers: source.clone(), source, target, truth };
            let ctx = RowContext { kind: ExperimentKind::Noise, dataset: &dataset, trial, seed, sigma, outliers: 0 };
            evaluate(&data, &ctx, cfg)
        })?);
    }
    Ok(ExperimentReport::new(ExperimentKind::Noise, records))
}

/// Outlier robustness: the target is the moved source with outliers appended
/// in a ball around its centroid. Inlier `i` of the target is source point `i`.
pub fn run_outlier_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let (cloud, dataset) = load(cfg)?;
    let fixed = fixed_rotation(cfg);
    let records = run_trials(cfg, cfg.master_seed, |trial, seed| {
        let (source, _) = subsample(&cloud, cfg.sample_size, split_seed(seed, STREAM_SUBSAMPLE))?;
        let truth = ground_truth(cfg, fixed, &source, seed);
        let target = add_spherical_outliers(
            &source.transformed(&truth),
            cfg.outlier_count,
            cfg.outlier_radius,
            cfg.outlier_shape,
            split_seed(seed, STREAM_CORRUPTION),
        )?;
        let data = TrialData { inliers: source.clone(), source, target, truth };
        let ctx = RowContext {
            kind: ExperimentKind::Outliers,
            dataset: &dataset,
            trial,
            seed,
            sigma: 0.0,
            outliers: cfg.outlier_count,
        };
        evaluate(&data, &ctx, cfg)
    })?;
    Ok(ExperimentReport::new(ExperimentKind::Outliers, records))
}

/// Rotation accuracy on clean data: source and target are independent
/// subsamples of the dataset, so no point pair corresponds exactly.
pub fn run_accuracy_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let (cloud, dataset) = load(cfg)?;
    let fixed = fixed_rotation(cfg);
    let records = run_trials(cfg, cfg.master_seed, |trial, seed| {
        let (source, _) = subsample(&cloud, cfg.sample_size, split_seed(seed, STREAM_SUBSAMPLE))?;
        let (other, _) = subsample(&cloud, cfg.sample_size, split_seed(seed, STREAM_SUBSAMPLE_B))?;
        let truth = ground_truth(cfg, fixed, &source, seed);
        let data = TrialData { inliers: source.clone(), target: other.transformed(&truth), source, truth };
        let ctx =
            RowContext { kind: ExperimentKind::Accuracy, dataset: &dataset, trial, seed, sigma: 0.0, outliers: 0 };
        evaluate(&data, &ctx, cfg)
    })?;
    Ok(ExperimentReport::new(ExperimentKind::Accuracy, records))
}

pub fn run_experiment(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match kind {
        ExperimentKind::Noise => run_noise_experiment(cfg),
        ExperimentKind::Outliers => run_outlier_experiment(cfg),
        ExperimentKind::Accuracy => run_accuracy_experiment(cfg),
    }
}
