use std::time::Instant;

use nalgebra::Matrix3;

use crate::error::{Error, Result};
use crate::geom::{RigidTransform, Rotation3};
use crate::linalg::svd3;
use crate::solver::{Diagnostics, PairAccumulator, RegistrationResult, Timings};

/// `σ₁/σ₀` below this marks the cross-covariance as rank ≤ 1.
pub const ILL_CONDITIONED_RATIO: f64 = 1e-9;

/// Optimal rigid transform for the accumulated weighted pairs.
///
/// With weighted means `p̄ = S_p/S_w` and `q̄ = S_q/S_w`, the centered
/// cross-covariance is `H = S_pq − S_w·p̄·q̄ᵀ`. For `H = U·Σ·Vᵀ` the rotation is
/// `R = V·Uᵀ`, with the last column of `V` negated first if that product would
/// be a reflection, and `t = q̄ − R·p̄`.
pub fn solve_weighted_closed_form(acc: &PairAccumulator) -> Result<RegistrationResult> {
    let start = Instant::now();
    if acc.total_weight.is_nan() || acc.total_weight <= 0.0 || !acc.is_finite() {
        return Err(Error::Degenerate(format!("accumulator has total weight {}", acc.total_weight)));
    }
    let p_mean = acc.sum_p / acc.total_weight;
    let q_mean = acc.sum_q / acc.total_weight;
    let h = acc.sum_pq - (p_mean * acc.total_weight) * q_mean.transpose();

    let svd = svd3(&h);
    let mut v = svd.v;
    let reflection_corrected = svd.det_u * svd.det_v < 0.0;
    if reflection_corrected {
        v.column_mut(2).neg_mut();
    }
    let r: Matrix3<f64> = v * svd.u.transpose();
    let rotation = Rotation3::from_matrix_unchecked(r);
    let translation = q_mean - r * p_mean;

    let sv = svd.singular_values;
    let ill_conditioned = sv[0] == 0.0 || sv[1] / sv[0] < ILL_CONDITIONED_RATIO;

    Ok(RegistrationResult {
        transform: RigidTransform::new(rotation, translation),
        diagnostics: Diagnostics {
            algorithm: "closed-form".into(),
            total_weight: acc.total_weight,
            pair_count: acc.pair_count,
            effective_pairs: acc.effective_pairs(),
            singular_values: [sv[0], sv[1], sv[2]],
            reflection_corrected,
            ill_conditioned,
            source_keypoints: None,
            target_keypoints: None,
            icp: None,
            timings: Timings { solve_ms: start.elapsed().as_secs_f64() * 1e3, ..Timings::default() },
        },
    })
}
