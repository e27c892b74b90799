use std::time::Instant;

use crate::error::{Error, Result};
use crate::features::{detect_keypoints, normals_and_fpfh, DescriptorSet, KeypointSet, NormalSet};
use crate::geom::PointCloud;
use crate::solver::{accumulate_indexed, solve_weighted_closed_form, RegistrationResult, SolverConfig};

fn ms_since(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// A cloud with its normals and descriptors computed for a given `k`.
#[derive(Debug, Clone)]
pub struct PreparedCloud {
    pub cloud: PointCloud,
    pub normals: NormalSet,
    pub descriptors: DescriptorSet,
    pub elapsed_ms: f64,
}

pub fn prepare_cloud(cloud: &PointCloud, cfg: &SolverConfig) -> Result<PreparedCloud> {
    cfg.validate()?;
    if cloud.len() < cfg.k {
        return Err(Error::TooFewPoints { requested: cfg.k, available: cloud.len() });
    }
    let start = Instant::now();
    let (normals, descriptors) = normals_and_fpfh(cloud, cfg.k, cfg.execution.is_parallel())?;
    Ok(PreparedCloud { cloud: cloud.clone(), normals, descriptors, elapsed_ms: ms_since(start) })
}

/// Full-connection registration of `source` onto `target`.
///
/// Runs normals → FPFH → pair weights → closed-form solve, once. The returned
/// transform maps `source` into the frame of `target`.
pub fn register_cf(source: &PointCloud, target: &PointCloud, cfg: &SolverConfig) -> Result<RegistrationResult> {
    let start = Instant::now();
    let src = prepare_cloud(source, cfg)?;
    let tgt = prepare_cloud(target, cfg)?;
    let mut res = solve_on(&src, &tgt, None, None, cfg)?;
    res.diagnostics.algorithm = "cf".into();
    res.diagnostics.timings.features_ms = src.elapsed_ms + tgt.elapsed_ms;
    res.diagnostics.timings.total_ms = ms_since(start);
    Ok(res)
}

/// Full-connection registration restricted to detected keypoints of both clouds.
///
/// Descriptors come from the full clouds and are sampled at the keypoints.
pub fn register_cfk(source: &PointCloud, target: &PointCloud, cfg: &SolverConfig) -> Result<RegistrationResult> {
    let start = Instant::now();
    let src = prepare_cloud(source, cfg)?;
    let tgt = prepare_cloud(target, cfg)?;
    let kp_start = Instant::now();
    let src_kp = detect_keypoints(&src.cloud, &src.normals, &cfg.keypoints)?;
    let tgt_kp = detect_keypoints(&tgt.cloud, &tgt.normals, &cfg.keypoints)?;
    let keypoints_ms = ms_since(kp_start);
    let mut res = register_keypoints_prepared(&src, &tgt, &src_kp, &tgt_kp, cfg)?;
    res.diagnostics.timings.features_ms = src.elapsed_ms + tgt.elapsed_ms;
    res.diagnostics.timings.keypoints_ms = keypoints_ms;
    res.diagnostics.timings.total_ms = ms_since(start);
    Ok(res)
}

pub(crate) fn register_keypoints_prepared(
    src: &PreparedCloud,
    tgt: &PreparedCloud,
    src_kp: &KeypointSet,
    tgt_kp: &KeypointSet,
    cfg: &SolverConfig,
) -> Result<RegistrationResult> {
    if src_kp.len() < 3 || tgt_kp.len() < 3 {
        return Err(Error::TooFewKeypoints { source_count: src_kp.len(), target_count: tgt_kp.len() });
    }
    let mut res = solve_on(src, tgt, Some(&src_kp.indices), Some(&tgt_kp.indices), cfg)?;
    res.diagnostics.algorithm = "cfk".into();
    res.diagnostics.source_keypoints = Some(src_kp.len());
    res.diagnostics.target_keypoints = Some(tgt_kp.len());
    Ok(res)
}

/// The pipeline with pair accumulation restricted to the given index sets.
///
/// Passing every index reproduces [`register_cf`] exactly.
pub fn register_on_indices(
    source: &PointCloud,
    target: &PointCloud,
    source_indices: &[usize],
    target_indices: &[usize],
    cfg: &SolverConfig,
) -> Result<RegistrationResult> {
    let src = prepare_cloud(source, cfg)?;
    let tgt = prepare_cloud(target, cfg)?;
    let mut res = solve_on(&src, &tgt, Some(source_indices), Some(target_indices), cfg)?;
    res.diagnostics.algorithm = "cf-subset".into();
    res.diagnostics.source_keypoints = Some(source_indices.len());
    res.diagnostics.target_keypoints = Some(target_indices.len());
    Ok(res)
}

pub(crate) fn solve_on(
    src: &PreparedCloud,
    tgt: &PreparedCloud,
    src_idx: Option<&[usize]>,
    tgt_idx: Option<&[usize]>,
    cfg: &SolverConfig,
) -> Result<RegistrationResult> {
    let acc_start = Instant::now();
    let acc = accumulate_indexed(&src.cloud, &tgt.cloud, &src.descriptors, &tgt.descriptors, src_idx, tgt_idx, cfg)?;
    let accumulate_ms = ms_since(acc_start);
    let mut res = solve_weighted_closed_form(&acc)?;
    res.diagnostics.timings.accumulate_ms = accumulate_ms;
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{Point3, RigidTransform};
    use crate::rng::seeded_rng;
    use rand::Rng;

    fn bumpy(n: usize, seed: u64) -> PointCloud {
        let mut rng = seeded_rng(seed);
        PointCloud::new(
            (0..n)
                .map(|_| {
                    let x: f64 = rng.random_range(-1.0..1.0);
                    let y: f64 = rng.random_range(-1.0..1.0);
                    Point3::new(x, y, 0.4 * (3.0 * x).sin() + 0.3 * (2.0 * y * y).cos() + 0.2 * x * y)
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn too_small_for_k() {
        let c = bumpy(20, 1);
        let cfg = SolverConfig { k: 30, ..SolverConfig::default() };
        assert!(matches!(register_cf(&c, &c, &cfg), Err(Error::TooFewPoints { .. })));
    }

    #[test]
    fn self_registration_is_identity() {
        let c = bumpy(300, 2);
        let cfg = SolverConfig { k: 30, ..SolverConfig::default() };
        let res = register_cf(&c, &c, &cfg).unwrap();
        let t = res.transform;
        assert!((t.rotation.matrix() - nalgebra::Matrix3::identity()).norm() < 1e-9);
        assert!(t.translation.norm() < 1e-9);
        assert_eq!(res.diagnostics.pair_count, 300 * 300);
    }

    #[test]
    fn all_indices_reproduce_cf_bit_for_bit() {
        let a = bumpy(200, 3);
        let b = a.transformed(&RigidTransform::from_translation(nalgebra::Vector3::new(0.1, 0.0, 0.2)));
        let cfg = SolverConfig { k: 20, ..SolverConfig::default() }.sequential();
        let all: Vec<usize> = (0..200).collect();
        let cf = register_cf(&a, &b, &cfg).unwrap();
        let sub = register_on_indices(&a, &b, &all, &all, &cfg).unwrap();
        assert_eq!(cf.transform, sub.transform);
        assert_eq!(cf.diagnostics.total_weight, sub.diagnostics.total_weight);
        assert_eq!(cf.diagnostics.singular_values, sub.diagnostics.singular_values);
    }

    #[test]
    fn flat_cloud_has_no_keypoints() {
        let mut rng = seeded_rng(4);
        let flat = PointCloud::new(
            (0..300).map(|_| Point3::new(rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), 0.0)).collect(),
        )
        .unwrap();
        let cfg = SolverConfig { k: 20, ..SolverConfig::default() };
        assert!(matches!(register_cfk(&flat, &flat, &cfg), Err(Error::TooFewKeypoints { .. })));
    }
}
