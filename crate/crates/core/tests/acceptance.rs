//! Acceptance suite. Runs every criterion in sequence (timings must not
//! compete with other work), prints one PASS/FAIL line each and exits nonzero
//! if any fails.
//!
//! `CFREG_ACCEPTANCE=5,6 cargo test --test acceptance` runs a subset.

use std::time::{Duration, Instant};

use cfreg::datasets::bunny;
use cfreg::features::normals_and_fpfh;
use cfreg::geom::{axis_angle_to_rotation, rotation_accuracy, Point3, PointCloud, RigidTransform, Rotation3};
use cfreg::harness::{
    run_accuracy_experiment, run_noise_experiment, run_outlier_experiment, subsample, Algorithm, ExperimentConfig,
    ExperimentReport, RotationMode, SummaryStats,
};
use cfreg::kdtree::KdTree3;
use cfreg::linalg::svd3;
use cfreg::rng::{seeded_rng, split_seed};
use cfreg::solver::{
    accumulate_full_connection, accumulate_indexed, register_cf, solve_weighted_closed_form, Execution,
    PairAccumulator, SolverConfig,
};
use cfreg::RotationMagnitude;
use nalgebra::{Matrix3, Vector3};
use rand::seq::index::sample;
use rand::Rng;

// Tolerances and budgets, one block per criterion.
const C1_TRIALS: usize = 100;
const C1_N: usize = 50;
const C1_ROT_TOL: f64 = 1e-9;
const C1_T_TOL: f64 = 1e-9;
const C1_BUDGET: Duration = Duration::from_secs(1);

const C2_CASES: usize = 100;
const C2_N: usize = 30;
const C2_GRID_STEP_DEG: f64 = 10.0;

const C3_MATRICES: usize = 10_000;
const C3_RECON_TOL: f64 = 1e-10;
const C3_ORTHO_TOL: f64 = 1e-10;
const C3_SIGMA_TOL: f64 = 1e-9;

const C4_TRIPLES: usize = 200;
const C4_MAX_CLOUD: usize = 5000;

const C5_TRIALS: usize = 20;
const C5_CF_MAX: f64 = 0.5;
const C5_CFK_MAX: f64 = 0.7;
const C5_ICP_FACTOR: f64 = 2.0;
const C5_BUDGET: Duration = Duration::from_secs(300);

const C6_TRIALS: usize = 20;
const C6_CF_MAX: f64 = 0.03;
const C6_BUDGET: Duration = Duration::from_secs(300);

const C7_SIGMAS: [f64; 3] = [0.002, 0.01, 0.02];
const C7_TRIALS: usize = 10;

const C8_SCALE: f64 = 10.0;
const C8_ROT_TOL: f64 = 1e-6;
const C8_T_TOL: f64 = 1e-6;

const C9_MIN_FRACTION: f64 = 0.95;
const C9_REL_CHANGE: f64 = 0.05;

const C10_SIZES: [usize; 3] = [500, 1000, 2000];
const C10_KEYPOINT_CLOUD: usize = 4000;
const C10_KEYPOINT_COUNTS: [usize; 3] = [500, 1000, 2000];
const C10_RUNS: usize = 5;
const C10_RATIO: (f64, f64) = (3.0, 6.0);

const C11_TRIALS: usize = 2;

const MASTER_SEED: u64 = 2021;
const SAMPLE: usize = 500;

type Runner = fn(&ExperimentConfig) -> cfreg::Result<ExperimentReport>;

type Criterion = (u32, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_points(rng: &mut impl Rng, n: usize, half: f64) -> Vec<Point3> {
    (0..n)
        .map(|_| {
            Point3::new(rng.random_range(-half..half), rng.random_range(-half..half), rng.random_range(-half..half))
        })
        .collect()
}

fn random_rotation(rng: &mut impl Rng) -> Rotation3 {
    axis_angle_to_rotation(&RotationMagnitude::Large.sample(rng))
}

fn exact_recovery() -> Outcome {
    let start = Instant::now();
    let mut rng = seeded_rng(1);
    let (mut worst_r, mut worst_t) = (0.0f64, 0.0f64);
    for _ in 0..C1_TRIALS {
        let p = random_points(&mut rng, C1_N, 1.0);
        let truth = RigidTransform::new(random_rotation(&mut rng), Vector3::from(random_points(&mut rng, 1, 5.0)[0]));
        let mut acc = PairAccumulator::new();
        for x in &p {
            acc.add_pair(x, &truth.apply(x), 1.0);
        }
        let est = solve_weighted_closed_form(&acc).expect("solve").transform;
        worst_r = worst_r.max(rotation_accuracy(&truth.rotation, &est.rotation));
        worst_t = worst_t.max((est.translation - truth.translation).norm());
    }
    let elapsed = start.elapsed();
    outcome(
        worst_r < C1_ROT_TOL && worst_t < C1_T_TOL && elapsed < C1_BUDGET,
        format!("max rot_acc {worst_r:.2e}, max t_err {worst_t:.2e}, {:.1} ms", elapsed.as_secs_f64() * 1e3),
    )
}

/// `Σ w‖R(p − p̄) − (q − q̄)‖²` with uniform weights, the cost at the best
/// translation for `r`.
fn centered_cost(r: &Matrix3<f64>, p: &[Point3], q: &[Point3]) -> f64 {
    let pm = p.iter().sum::<Point3>() / p.len() as f64;
    let qm = q.iter().sum::<Point3>() / q.len() as f64;
    p.iter().zip(q).map(|(a, b)| (r * (a - pm) - (b - qm)).norm_squared()).sum()
}

fn euler_zyz(a: f64, b: f64, c: f64) -> Matrix3<f64> {
    let rz = |t: f64| Matrix3::new(t.cos(), -t.sin(), 0.0, t.sin(), t.cos(), 0.0, 0.0, 0.0, 1.0);
    let ry = |t: f64| Matrix3::new(t.cos(), 0.0, t.sin(), 0.0, 1.0, 0.0, -t.sin(), 0.0, t.cos());
    rz(a) * ry(b) * rz(c)
}

fn reflection_handling() -> Outcome {
    let step = C2_GRID_STEP_DEG.to_radians();
    let grid: Vec<Matrix3<f64>> = {
        let n_full = (360.0 / C2_GRID_STEP_DEG) as usize;
        let n_half = (180.0 / C2_GRID_STEP_DEG) as usize;
        let mut g = Vec::new();
        for i in 0..n_full {
            for j in 0..=n_half {
                for k in 0..n_full {
                    g.push(euler_zyz(i as f64 * step, j as f64 * step, k as f64 * step));
                }
            }
        }
        g
    };
    let mut rng = seeded_rng(2);
    let (mut cases, mut proper, mut optimal, mut attempts) = (0, 0, 0, 0);
    let mut worst_gap = f64::NEG_INFINITY;
    while cases < C2_CASES {
        attempts += 1;
        assert!(attempts < 100 * C2_CASES, "could not construct reflected cases");
        let coplanar = cases % 2 == 1;
        let mut p = random_points(&mut rng, C2_N, 1.0);
        if coplanar {
            for x in &mut p {
                x.z = 0.0;
            }
        }
        // Mirror, then move rigidly, then perturb slightly.
        let mirror = if coplanar {
            Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 1.0))
        } else {
            Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0))
        };
        let m = random_rotation(&mut rng).matrix() * mirror;
        let t = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let q: Vec<Point3> = p.iter().map(|x| m * x + t + random_points(&mut rng, 1, 0.01)[0]).collect();
        let mut acc = PairAccumulator::new();
        for (a, b) in p.iter().zip(&q) {
            acc.add_pair(a, b, 1.0);
        }
        let res = solve_weighted_closed_form(&acc).expect("solve");
        if !res.diagnostics.reflection_corrected {
            continue;
        }
        cases += 1;
        let r = res.transform.rotation.matrix();
        if (r.determinant() - 1.0).abs() < 1e-9 {
            proper += 1;
        }
        let cost = centered_cost(r, &p, &q);
        let best_grid = grid.iter().map(|g| centered_cost(g, &p, &q)).fold(f64::INFINITY, f64::min);
        worst_gap = worst_gap.max(cost - best_grid);
        if cost <= best_grid * (1.0 + 1e-12) {
            optimal += 1;
        }
    }
    outcome(
        proper == C2_CASES && optimal == C2_CASES,
        format!(
            "det +1 in {proper}/{C2_CASES}, cost <= grid minimum in {optimal}/{C2_CASES} ({} grid rotations, max cost - grid min {worst_gap:.3e})",
            grid.len()
        ),
    )
}

fn svd_numerics() -> Outcome {
    let mut rng = seeded_rng(3);
    let (mut recon, mut ortho, mut sigma) = (0.0f64, 0.0f64, 0.0f64);
    let id = Matrix3::identity();
    for _ in 0..C3_MATRICES {
        let h = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let s = svd3(&h);
        recon = recon.max((s.reconstruct() - h).norm() / h.norm());
        ortho = ortho.max((s.u.transpose() * s.u - id).norm()).max((s.v.transpose() * s.v - id).norm());
        // Oracle: square roots of the eigenvalues of HᵀH from nalgebra.
        let mut ev: Vec<f64> = (h.transpose() * h).symmetric_eigenvalues().iter().map(|e| e.max(0.0).sqrt()).collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        for (got, want) in s.singular_values.iter().zip(&ev) {
            sigma = sigma.max((got - want).abs());
        }
    }
    outcome(
        recon <= C3_RECON_TOL && ortho <= C3_ORTHO_TOL && sigma <= C3_SIGMA_TOL,
        format!("max relative reconstruction {recon:.2e}, orthonormality {ortho:.2e}, singular values {sigma:.2e}"),
    )
}

fn knn_exactness() -> Outcome {
    let mut rng = seeded_rng(4);
    let mut mismatches = 0;
    for trial in 0..C4_TRIPLES {
        let n = rng.random_range(1..=C4_MAX_CLOUD);
        // Every other cloud sits on a small integer lattice, which forces ties
        // and duplicate points.
        let points: Vec<Point3> = if trial % 2 == 0 {
            (0..n)
                .map(|_| {
                    Point3::new(
                        rng.random_range(0..8) as f64,
                        rng.random_range(0..8) as f64,
                        rng.random_range(0..8) as f64,
                    )
                })
                .collect()
        } else {
            random_points(&mut rng, n, 1.0)
        };
        let query = if rng.random_bool(0.5) {
            points[rng.random_range(0..n)]
        } else if trial % 2 == 0 {
            Point3::new(rng.random_range(0..8) as f64 + 0.5, rng.random_range(0..8) as f64, 3.0)
        } else {
            random_points(&mut rng, 1, 1.2)[0]
        };
        let k = rng.random_range(1..=n.min(200));
        let tree = KdTree3::from_points(&points).expect("tree");
        let got: Vec<(usize, f64)> =
            tree.knn(&query, k).expect("knn").iter().map(|nb| (nb.index, nb.dist_sq)).collect();
        let mut brute: Vec<(usize, f64)> =
            points.iter().enumerate().map(|(i, p)| (i, (p - query).norm_squared())).collect();
        brute.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        brute.truncate(k);
        if got != brute {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{} of {C4_TRIPLES} queries identical to brute force", C4_TRIPLES - mismatches))
}

fn summary<'a>(report: &'a ExperimentReport, alg: &str, sigma: f64) -> &'a SummaryStats {
    report
        .summary
        .iter()
        .find(|s| s.algorithm == alg && s.sigma == sigma)
        .unwrap_or_else(|| panic!("no summary for {alg} at sigma {sigma}"))
}

fn base_config() -> ExperimentConfig {
    ExperimentConfig {
        sample_size: SAMPLE,
        rotation_mode: RotationMode::LargeOrigin,
        master_seed: MASTER_SEED,
        ..Default::default()
    }
}

fn accuracy_large_rotation() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig { trials: C5_TRIALS, algorithms: Algorithm::ALL.to_vec(), ..base_config() };
    let r = run_accuracy_experiment(&cfg).expect("accuracy experiment");
    let elapsed = start.elapsed();
    let (cf, cfk, icp) = (summary(&r, "cf", 0.0), summary(&r, "cfk", 0.0), summary(&r, "icp", 0.0));
    let fallbacks = r.records.iter().filter(|x| x.fell_back).count();
    let checks = [
        cf.rot_acc.mean <= C5_CF_MAX,
        cfk.rot_acc.mean <= C5_CFK_MAX,
        icp.rot_acc.mean >= C5_ICP_FACTOR * cf.rot_acc.mean,
        elapsed <= C5_BUDGET,
    ];
    outcome(
        checks.iter().all(|c| *c),
        format!(
            "cf {:.3}±{:.3} (<= {C5_CF_MAX}: {}), cfk {:.3}±{:.3} (<= {C5_CFK_MAX}: {}, {fallbacks} fallbacks), icp {:.3}±{:.3} (>= {C5_ICP_FACTOR}x cf: {}), {:.1} s",
            cf.rot_acc.mean,
            cf.rot_acc.std,
            checks[0],
            cfk.rot_acc.mean,
            cfk.rot_acc.std,
            checks[1],
            icp.rot_acc.mean,
            icp.rot_acc.std,
            checks[2],
            elapsed.as_secs_f64()
        ),
    )
}

fn outlier_robustness() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        trials: C6_TRIALS,
        outlier_count: 100,
        outlier_radius: 0.2,
        algorithms: vec![Algorithm::Cf, Algorithm::Icp],
        ..base_config()
    };
    let r = run_outlier_experiment(&cfg).expect("outlier experiment");
    let elapsed = start.elapsed();
    let (cf, icp) = (summary(&r, "cf", 0.0), summary(&r, "icp", 0.0));
    outcome(
        cf.avg_shift.mean <= C6_CF_MAX && cf.avg_shift.mean <= icp.avg_shift.mean && elapsed <= C6_BUDGET,
        format!(
            "cf avg shift {:.4}±{:.4}, icp {:.4}±{:.4}, {:.1} s",
            cf.avg_shift.mean,
            cf.avg_shift.std,
            icp.avg_shift.mean,
            icp.avg_shift.std,
            elapsed.as_secs_f64()
        ),
    )
}

fn noise_shape() -> Outcome {
    let cfg = ExperimentConfig {
        trials: C7_TRIALS,
        sigmas: C7_SIGMAS.to_vec(),
        fixed_rotation: true,
        algorithms: vec![Algorithm::Cf, Algorithm::Icp],
        ..base_config()
    };
    let r = run_noise_experiment(&cfg).expect("noise experiment");
    let cf: Vec<&SummaryStats> = C7_SIGMAS.iter().map(|&s| summary(&r, "cf", s)).collect();
    let icp: Vec<&SummaryStats> = C7_SIGMAS.iter().map(|&s| summary(&r, "icp", s)).collect();
    let finite = cf.iter().all(|s| s.avg_shift.mean.is_finite());
    let monotone = cf.windows(2).all(|w| {
        let pooled = ((w[0].avg_shift.std.powi(2) + w[1].avg_shift.std.powi(2)) / 2.0).sqrt();
        w[1].avg_shift.mean >= w[0].avg_shift.mean - pooled
    });
    let icp_worse = cf.iter().zip(&icp).all(|(c, i)| i.avg_shift.mean > c.avg_shift.mean);
    let curve =
        |v: &[&SummaryStats]| v.iter().map(|s| format!("{:.4}", s.avg_shift.mean)).collect::<Vec<_>>().join("/");
    outcome(
        finite && monotone && icp_worse,
        format!(
            "cf {} icp {} at sigma {:?} (finite {finite}, monotone {monotone}, icp worse {icp_worse})",
            curve(&cf),
            curve(&icp),
            C7_SIGMAS
        ),
    )
}

fn bunny_pair(seed: u64) -> (PointCloud, PointCloud, RigidTransform) {
    let cloud = bunny().expect("bunny");
    let (a, _) = subsample(&cloud, SAMPLE, split_seed(seed, 0)).expect("subsample");
    let (b, _) = subsample(&cloud, SAMPLE, split_seed(seed, 1)).expect("subsample");
    let truth =
        RigidTransform::new(random_rotation(&mut seeded_rng(split_seed(seed, 2))), Vector3::new(0.05, -0.1, 0.2));
    (a, b.transformed(&truth), truth)
}

fn scale_property() -> Outcome {
    let (p, q, _) = bunny_pair(8);
    let cfg = SolverConfig::default().sequential();
    let base = register_cf(&p, &q, &cfg).expect("cf").transform;
    let scaled = register_cf(&p.scaled(C8_SCALE), &q.scaled(C8_SCALE), &cfg).expect("cf").transform;
    let rot = rotation_accuracy(&base.rotation, &scaled.rotation);
    let t = (scaled.translation - base.translation * C8_SCALE).norm();
    outcome(
        rot <= C8_ROT_TOL && t <= C8_T_TOL * C8_SCALE,
        format!("rotation change {rot:.2e}, translation change {t:.2e} at s = {C8_SCALE}"),
    )
}

fn descriptor_invariance() -> Outcome {
    let (p, _, truth) = bunny_pair(9);
    let moved = p.transformed(&truth);
    let (_, f) = normals_and_fpfh(&p, 150, true).expect("fpfh");
    let (_, g) = normals_and_fpfh(&moved, 150, true).expect("fpfh");
    let stable = (0..p.len())
        .filter(|&i| {
            let (a, b) = (f.get(i), g.get(i));
            a.distance_sq(b).sqrt() < C9_REL_CHANGE * a.norm()
        })
        .count();
    let frac = stable as f64 / p.len() as f64;
    outcome(frac >= C9_MIN_FRACTION, format!("{stable}/{} points ({:.1}%) changed by < 5%", p.len(), 100.0 * frac))
}

fn median_time(mut run: impl FnMut()) -> f64 {
    run(); // warm-up
    let mut times: Vec<f64> = (0..C10_RUNS)
        .map(|_| {
            let s = Instant::now();
            run();
            s.elapsed().as_secs_f64()
        })
        .collect();
    times.sort_by(f64::total_cmp);
    times[C10_RUNS / 2]
}

fn complexity() -> Outcome {
    let cloud = bunny().expect("bunny");
    let cfg = SolverConfig { execution: Execution::Sequential, ..Default::default() };
    let in_band = |r: f64| (C10_RATIO.0..=C10_RATIO.1).contains(&r);

    let mut full = Vec::new();
    for &n in &C10_SIZES {
        let (a, _) = subsample(&cloud, n, 100 + n as u64).expect("subsample");
        let (b, _) = subsample(&cloud, n, 200 + n as u64).expect("subsample");
        let (_, fa) = normals_and_fpfh(&a, cfg.k, true).expect("fpfh");
        let (_, fb) = normals_and_fpfh(&b, cfg.k, true).expect("fpfh");
        full.push(median_time(|| {
            std::hint::black_box(accumulate_full_connection(&a, &b, &fa, &fb, &cfg).expect("accumulate"));
        }));
    }

    let (a, _) = subsample(&cloud, C10_KEYPOINT_CLOUD, 300).expect("subsample");
    let (b, _) = subsample(&cloud, C10_KEYPOINT_CLOUD, 301).expect("subsample");
    let (_, fa) = normals_and_fpfh(&a, cfg.k, true).expect("fpfh");
    let (_, fb) = normals_and_fpfh(&b, cfg.k, true).expect("fpfh");
    let mut kp = Vec::new();
    for &n in &C10_KEYPOINT_COUNTS {
        let pick = |seed: u64| {
            let mut idx = sample(&mut seeded_rng(seed), C10_KEYPOINT_CLOUD, n).into_vec();
            idx.sort_unstable();
            idx
        };
        let (ia, ib) = (pick(400 + n as u64), pick(500 + n as u64));
        kp.push(median_time(|| {
            std::hint::black_box(accumulate_indexed(&a, &b, &fa, &fb, Some(&ia), Some(&ib), &cfg).expect("accumulate"));
        }));
    }

    let ratios = |t: &[f64]| t.windows(2).map(|w| w[1] / w[0]).collect::<Vec<f64>>();
    let (rf, rk) = (ratios(&full), ratios(&kp));
    let fmt = |r: &[f64]| r.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>().join(", ");
    outcome(
        rf.iter().chain(&rk).all(|r| in_band(*r)),
        format!(
            "full-connection ratios [{}] for N = {:?}; keypoint ratios [{}] for n = {:?} (N = {C10_KEYPOINT_CLOUD}); median of {C10_RUNS}",
            fmt(&rf),
            C10_SIZES,
            fmt(&rk),
            C10_KEYPOINT_COUNTS
        ),
    )
}

fn determinism() -> Outcome {
    let cfg = ExperimentConfig { trials: C11_TRIALS, deterministic: true, sigmas: vec![0.005, 0.02], ..base_config() };
    let runners: [(&str, Runner); 3] =
        [("noise", run_noise_experiment), ("outliers", run_outlier_experiment), ("accuracy", run_accuracy_experiment)];
    let mut same = Vec::new();
    for (name, run) in runners {
        let a = run(&cfg).expect("run").csv();
        let b = run(&cfg).expect("run").csv();
        same.push((name, a == b && !a.is_empty()));
    }
    outcome(
        same.iter().all(|s| s.1),
        same.iter()
            .map(|(n, s)| format!("{n} {}", if *s { "identical" } else { "DIFFERENT" }))
            .collect::<Vec<_>>()
            .join(", "),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        (1, "exact recovery", exact_recovery),
        (2, "reflection handling", reflection_handling),
        (3, "svd3 numerics", svd_numerics),
        (4, "k-NN exactness", knn_exactness),
        (5, "accuracy, large rotation", accuracy_large_rotation),
        (6, "outlier robustness", outlier_robustness),
        (7, "noise-sensitivity shape", noise_shape),
        (8, "scale property", scale_property),
        (9, "descriptor rigid invariance", descriptor_invariance),
        (10, "complexity", complexity),
        (11, "determinism", determinism),
    ];
    let selected: Option<Vec<u32>> =
        std::env::var("CFREG_ACCEPTANCE").ok().map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    // `cargo test` forwards harness flags such as --nocapture; only --list matters here.
    if std::env::args().any(|a| a == "--list") {
        for (id, name, _) in &criteria {
            println!("criterion {id}: {name}: test");
        }
        return;
    }
    let mut failed = 0;
    for (id, name, run) in criteria {
        if selected.as_ref().is_some_and(|s| !s.contains(&id)) {
            continue;
        }
        let out = run();
        if !out.pass {
            failed += 1;
        }
        println!("criterion {id:>2} [{name}]: {} ({})", if out.pass { "PASS" } else { "FAIL" }, out.detail);
    }
    if failed > 0 {
        println!("acceptance: {failed} criterion(s) failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
