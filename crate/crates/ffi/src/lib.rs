//! C ABI over `cfreg`.
//!
//! Clouds and results are opaque heap handles released with their `_free`
//! function. Every fallible call returns a [`CfregStatus`]; on failure
//! [`cfreg_last_error_message`] describes the cause. Panics never cross the
//! boundary: they are caught and reported as `CFREG_STATUS_PANIC`.
//!
//! Matrices are row-major `double` arrays (16 entries for transforms, 9 for
//! rotations).

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use cfreg::features::KeypointParams;
use cfreg::{
    register_cf, register_cfk, register_icp, rotation_accuracy, Error, ErrorClass, Execution, IcpParams, PointCloud,
    RegistrationResult, RigidTransform, Rotation3, SolverConfig,
};
use nalgebra::{Matrix3, Matrix4};

/// Status code returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfregStatus {
    Ok = 0,
    /// Invalid argument or configuration.
    Usage = 1,
    /// File missing, unreadable or malformed.
    Io = 2,
    /// Input too degenerate to register (empty, too few keypoints, ...).
    Degenerate = 3,
    /// A required pointer was null.
    NullPointer = 4,
    /// An internal panic was caught.
    Panic = 5,
}

impl From<ErrorClass> for CfregStatus {
    fn from(c: ErrorClass) -> Self {
        match c {
            ErrorClass::Usage => CfregStatus::Usage,
            ErrorClass::Io => CfregStatus::Io,
            ErrorClass::Degenerate => CfregStatus::Degenerate,
        }
    }
}

/// Opaque point cloud.
pub struct CfregCloud(PointCloud);

/// Opaque registration result.
pub struct CfregResult(RegistrationResult);

/// Settings for CF and CFK.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CfregSolverConfig {
    /// Feature-distance scale in the pair weight.
    pub beta: f64,
    /// Neighbors for normals and descriptors.
    pub k: usize,
    /// Lower bound on every pair weight, in [0, 1].
    pub weight_floor: f64,
    /// Keypoint surface-variation threshold.
    pub keypoint_threshold: f64,
    /// Keypoint suppression radius; 0 picks a multiple of the point spacing.
    pub keypoint_nms_radius: f64,
    pub keypoint_nms_spacing_factor: f64,
    pub keypoint_max: usize,
    /// Nonzero for single-threaded, bit-reproducible numerics.
    pub deterministic: c_int,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct CfregIcpConfig {
    pub max_correspondence_distance: f64,
    pub max_iterations: usize,
    pub transformation_epsilon: f64,
    pub euclidean_fitness_epsilon: f64,
    pub deterministic: c_int,
}

/// Flattened diagnostics. Fields that do not apply to the algorithm are 0.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CfregDiagnostics {
    pub total_weight: f64,
    pub pair_count: u64,
    pub effective_pairs: f64,
    pub singular_values: [f64; 3],
    pub reflection_corrected: c_int,
    pub ill_conditioned: c_int,
    pub source_keypoints: usize,
    pub target_keypoints: usize,
    pub icp_iterations: usize,
    pub icp_converged: c_int,
    pub icp_lost_correspondences: c_int,
    pub icp_final_mse: f64,
    pub total_ms: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn execution(deterministic: c_int) -> Execution {
    if deterministic != 0 {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

/// Runs `body`, converting errors and panics into a status and a message.
fn guard(body: impl FnOnce() -> Result<(), CfregStatus>) -> CfregStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_last_error("");
            CfregStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("internal panic: {msg}"));
            CfregStatus::Panic
        }
    }
}

fn fail(e: Error) -> CfregStatus {
    set_last_error(&e.to_string());
    e.class().into()
}

fn null(what: &str) -> CfregStatus {
    set_last_error(&format!("{what} is null"));
    CfregStatus::NullPointer
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, CfregStatus> {
    // SAFETY: the caller passes either null or a pointer obtained from this library.
    unsafe { p.as_ref() }.ok_or_else(|| null(what))
}

unsafe fn store<T>(out: *mut *mut T, value: T) {
    // SAFETY: `out` was checked non-null by the caller.
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn cfreg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cfreg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn cfreg_solver_config_default() -> CfregSolverConfig {
    let s = SolverConfig::default();
    CfregSolverConfig {
        beta: s.beta,
        k: s.k,
        weight_floor: s.weight_floor,
        keypoint_threshold: s.keypoints.threshold,
        keypoint_nms_radius: 0.0,
        keypoint_nms_spacing_factor: s.keypoints.nms_spacing_factor,
        keypoint_max: s.keypoints.max_keypoints,
        deterministic: 0,
    }
}

#[no_mangle]
pub extern "C" fn cfreg_icp_config_default() -> CfregIcpConfig {
    let p = IcpParams::default();
    CfregIcpConfig {
        max_correspondence_distance: p.max_correspondence_distance,
        max_iterations: p.max_iterations,
        transformation_epsilon: p.transformation_epsilon,
        euclidean_fitness_epsilon: p.euclidean_fitness_epsilon,
        deterministic: 0,
    }
}

fn solver_config(c: &CfregSolverConfig) -> SolverConfig {
    SolverConfig {
        beta: c.beta,
        k: c.k,
        weight_floor: c.weight_floor,
        keypoints: KeypointParams {
            nms_radius: (c.keypoint_nms_radius > 0.0).then_some(c.keypoint_nms_radius),
            nms_spacing_factor: c.keypoint_nms_spacing_factor,
            threshold: c.keypoint_threshold,
            max_keypoints: c.keypoint_max,
        },
        execution: execution(c.deterministic),
    }
}

/// Copies `n` points from `xyz` (`3n` doubles, x y z per point) into a new cloud.
///
/// # Safety
/// `xyz` must point to `3n` readable doubles (it may be null when `n` is 0) and
/// `out` to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn cfreg_cloud_from_xyz(xyz: *const f64, n: usize, out: *mut *mut CfregCloud) -> CfregStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let coords: &[f64] = if n == 0 {
            &[]
        } else if xyz.is_null() {
            return Err(null("xyz"));
        } else {
            let len = n.checked_mul(3).ok_or_else(|| fail(Error::InvalidArgument("point count overflows".into())))?;
            // SAFETY: the caller guarantees 3n readable doubles.
            unsafe { std::slice::from_raw_parts(xyz, len) }
        };
        let points = coords.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect::<Vec<_>>();
        let cloud = PointCloud::from_xyz(&points).map_err(fail)?;
        unsafe { store(out, CfregCloud(cloud)) };
        Ok(())
    })
}

/// Reads a PLY or xyz file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cfreg_cloud_read(path: *const c_char, out: *mut *mut CfregCloud) -> CfregStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if path.is_null() {
            return Err(null("path"));
        }
        // SAFETY: checked non-null; the caller guarantees NUL termination.
        let path = unsafe { CStr::from_ptr(path) }
            .to_str()
            .map_err(|_| fail(Error::InvalidArgument("path is not valid UTF-8".into())))?;
        let cloud = cfreg::io::read_cloud(Path::new(path)).map_err(fail)?;
        unsafe { store(out, CfregCloud(cloud)) };
        Ok(())
    })
}

/// Number of points; 0 for a null handle.
///
/// # Safety
/// `cloud` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cfreg_cloud_len(cloud: *const CfregCloud) -> usize {
    // SAFETY: null or a live handle per the contract.
    unsafe { cloud.as_ref() }.map_or(0, |c| c.0.len())
}

/// Writes the points as `3 * len` doubles into `out`, which holds `capacity`
/// points.
///
/// # Safety
/// `cloud` must be a live handle and `out` writable for `3 * capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn cfreg_cloud_copy_xyz(cloud: *const CfregCloud, out: *mut f64, capacity: usize) -> CfregStatus {
    guard(|| {
        let cloud = unsafe { deref(cloud, "cloud") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let n = cloud.0.len();
        if capacity < n {
            return Err(fail(Error::InvalidArgument(format!("buffer holds {capacity} points but the cloud has {n}"))));
        }
        // SAFETY: capacity >= n points of writable storage per the contract.
        let dst = unsafe { std::slice::from_raw_parts_mut(out, 3 * n) };
        for (chunk, p) in dst.chunks_exact_mut(3).zip(cloud.0.iter()) {
            chunk.copy_from_slice(&[p.x, p.y, p.z]);
        }
        Ok(())
    })
}

/// # Safety
/// `cloud` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn cfreg_cloud_free(cloud: *mut CfregCloud) {
    if !cloud.is_null() {
        // SAFETY: created by Box::into_raw in this library.
        drop(unsafe { Box::from_raw(cloud) });
    }
}

unsafe fn register_with(
    source: *const CfregCloud,
    target: *const CfregCloud,
    out: *mut *mut CfregResult,
    run: impl FnOnce(&PointCloud, &PointCloud) -> cfreg::Result<RegistrationResult>,
) -> CfregStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let src = unsafe { deref(source, "source") }?;
        let tgt = unsafe { deref(target, "target") }?;
        let res = run(&src.0, &tgt.0).map_err(fail)?;
        unsafe { store(out, CfregResult(res)) };
        Ok(())
    })
}

/// Full-connection registration of `source` onto `target`. A null `config`
/// uses the defaults.
///
/// # Safety
/// Handles must be live, `config` null or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cfreg_register_cf(
    source: *const CfregCloud,
    target: *const CfregCloud,
    config: *const CfregSolverConfig,
    out: *mut *mut CfregResult,
) -> CfregStatus {
    // SAFETY: null or valid per the contract.
    let cfg = unsafe { config.as_ref() }.copied().unwrap_or_else(|| cfreg_solver_config_default());
    unsafe { register_with(source, target, out, |s, t| register_cf(s, t, &solver_config(&cfg))) }
}

/// Keypoint-restricted registration. Fails with `CFREG_STATUS_DEGENERATE`
/// when either cloud has fewer than three keypoints.
///
/// # Safety
/// As [`cfreg_register_cf`].
#[no_mangle]
pub unsafe extern "C" fn cfreg_register_cfk(
    source: *const CfregCloud,
    target: *const CfregCloud,
    config: *const CfregSolverConfig,
    out: *mut *mut CfregResult,
) -> CfregStatus {
    let cfg = unsafe { config.as_ref() }.copied().unwrap_or_else(|| cfreg_solver_config_default());
    unsafe { register_with(source, target, out, |s, t| register_cfk(s, t, &solver_config(&cfg))) }
}

/// Point-to-point ICP from `init` (16 row-major doubles; null for identity).
///
/// # Safety
/// As [`cfreg_register_cf`]; `init` null or 16 readable doubles.
#[no_mangle]
pub unsafe extern "C" fn cfreg_register_icp(
    source: *const CfregCloud,
    target: *const CfregCloud,
    config: *const CfregIcpConfig,
    init: *const f64,
    out: *mut *mut CfregResult,
) -> CfregStatus {
    let cfg = unsafe { config.as_ref() }.copied().unwrap_or_else(|| cfreg_icp_config_default());
    let init = if init.is_null() {
        Ok(RigidTransform::identity())
    } else {
        // SAFETY: 16 readable doubles per the contract.
        let m = Matrix4::from_row_slice(unsafe { std::slice::from_raw_parts(init, 16) });
        RigidTransform::from_homogeneous(&m, cfreg::geom::ROTATION_CHECK_TOL)
    };
    let params = IcpParams {
        max_correspondence_distance: cfg.max_correspondence_distance,
        max_iterations: cfg.max_iterations,
        transformation_epsilon: cfg.transformation_epsilon,
        euclidean_fitness_epsilon: cfg.euclidean_fitness_epsilon,
        execution: execution(cfg.deterministic),
    };
    unsafe {
        register_with(source, target, out, |s, t| {
            let init = init?;
            register_icp(s, t, &params, &init)
        })
    }
}

/// Writes the estimated 4x4 transform, row-major, into `out[16]`.
///
/// # Safety
/// `result` must be live and `out` writable for 16 doubles.
#[no_mangle]
pub unsafe extern "C" fn cfreg_result_matrix(result: *const CfregResult, out: *mut f64) -> CfregStatus {
    guard(|| {
        let r = unsafe { deref(result, "result") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let h = r.0.transform.to_homogeneous();
        // SAFETY: 16 writable doubles per the contract.
        let dst = unsafe { std::slice::from_raw_parts_mut(out, 16) };
        for i in 0..4 {
            for j in 0..4 {
                dst[4 * i + j] = h[(i, j)];
            }
        }
        Ok(())
    })
}

/// # Safety
/// `result` must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cfreg_result_diagnostics(
    result: *const CfregResult,
    out: *mut CfregDiagnostics,
) -> CfregStatus {
    guard(|| {
        let r = unsafe { deref(result, "result") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let d = &r.0.diagnostics;
        let mut flat = CfregDiagnostics {
            total_weight: d.total_weight,
            pair_count: d.pair_count,
            effective_pairs: d.effective_pairs,
            singular_values: d.singular_values,
            reflection_corrected: d.reflection_corrected.into(),
            ill_conditioned: d.ill_conditioned.into(),
            source_keypoints: d.source_keypoints.unwrap_or(0),
            target_keypoints: d.target_keypoints.unwrap_or(0),
            total_ms: d.timings.total_ms,
            ..Default::default()
        };
        if let Some(icp) = &d.icp {
            flat.icp_iterations = icp.iterations;
            flat.icp_converged = icp.converged.into();
            flat.icp_lost_correspondences = icp.lost_correspondences.into();
            flat.icp_final_mse = icp.final_mse;
        }
        // SAFETY: checked non-null.
        unsafe { ptr::write(out, flat) };
        Ok(())
    })
}

/// # Safety
/// `result` must be null or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn cfreg_result_free(result: *mut CfregResult) {
    if !result.is_null() {
        // SAFETY: created by Box::into_raw in this library.
        drop(unsafe { Box::from_raw(result) });
    }
}

/// `‖I − R_pred R_gtᵀ‖_F` for two row-major 3x3 rotations.
///
/// # Safety
/// `r_gt` and `r_pred` must hold 9 doubles each; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cfreg_rotation_accuracy(r_gt: *const f64, r_pred: *const f64, out: *mut f64) -> CfregStatus {
    guard(|| {
        if r_gt.is_null() || r_pred.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let load = |p: *const f64| {
            // SAFETY: 9 readable doubles per the contract.
            let m = Matrix3::from_row_slice(unsafe { std::slice::from_raw_parts(p, 9) });
            Rotation3::from_matrix(m, cfreg::geom::ROTATION_CHECK_TOL).map_err(fail)
        };
        let v = rotation_accuracy(&load(r_gt)?, &load(r_pred)?);
        unsafe { *out = v };
        Ok(())
    })
}
