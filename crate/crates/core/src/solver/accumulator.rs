use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::fpfh::{squared_distance, Histogram};
use crate::features::{DescriptorSet, FpfhDescriptor};
use crate::geom::{Point3, PointCloud};
use crate::solver::SolverConfig;

/// Rows per parallel work unit. Fixed so parallel results do not depend on
/// the thread count.
const ROW_CHUNK: usize = 16;

/// `exp(-‖f_p − f_q‖² / β)`.
#[inline]
pub fn pair_weight(f_p: &FpfhDescriptor, f_q: &FpfhDescriptor, beta: f64) -> f64 {
    (-f_p.distance_sq(f_q) / beta).exp()
}

/// Weighted sums over point pairs, sufficient for the closed-form solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairAccumulator {
    /// Σw
    pub total_weight: f64,
    /// Σw²
    pub total_weight_sq: f64,
    /// Σw·p
    pub sum_p: Vector3<f64>,
    /// Σw·q
    pub sum_q: Vector3<f64>,
    /// Σw·p·qᵀ
    pub sum_pq: Matrix3<f64>,
    pub pair_count: u64,
}

impl Default for PairAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl PairAccumulator {
    pub fn new() -> Self {
        Self {
            total_weight: 0.0,
            total_weight_sq: 0.0,
            sum_p: Vector3::zeros(),
            sum_q: Vector3::zeros(),
            sum_pq: Matrix3::zeros(),
            pair_count: 0,
        }
    }

    pub fn add_pair(&mut self, p: &Point3, q: &Point3, w: f64) {
        self.total_weight += w;
        self.total_weight_sq += w * w;
        self.sum_p += p * w;
        self.sum_q += q * w;
        self.sum_pq += (p * w) * q.transpose();
        self.pair_count += 1;
    }

    /// Adds all pairs `(p, q_j)` for one source point at once, given the row
    /// sums `Σ_j w_j`, `Σ_j w_j²` and `Σ_j w_j q_j`.
    fn add_row(&mut self, p: &Point3, row_w: f64, row_w_sq: f64, row_q: &Vector3<f64>, pairs: u64) {
        self.total_weight += row_w;
        self.total_weight_sq += row_w_sq;
        self.sum_p += p * row_w;
        self.sum_q += row_q;
        self.sum_pq += p * row_q.transpose();
        self.pair_count += pairs;
    }

    pub fn merge(&mut self, other: &PairAccumulator) {
        self.total_weight += other.total_weight;
        self.total_weight_sq += other.total_weight_sq;
        self.sum_p += other.sum_p;
        self.sum_q += other.sum_q;
        self.sum_pq += other.sum_pq;
        self.pair_count += other.pair_count;
    }

    pub fn effective_pairs(&self) -> f64 {
        if self.total_weight_sq > 0.0 {
            self.total_weight * self.total_weight / self.total_weight_sq
        } else {
            0.0
        }
    }

    pub fn is_finite(&self) -> bool {
        self.total_weight.is_finite()
            && self.sum_p.iter().all(|v| v.is_finite())
            && self.sum_q.iter().all(|v| v.is_finite())
            && self.sum_pq.iter().all(|v| v.is_finite())
    }
}

/// Accumulates all `|P|·|Q|` pairs.
pub fn accumulate_full_connection(
    source: &PointCloud,
    target: &PointCloud,
    source_features: &DescriptorSet,
    target_features: &DescriptorSet,
    cfg: &SolverConfig,
) -> Result<PairAccumulator> {
    accumulate_indexed(source, target, source_features, target_features, None, None, cfg)
}

/// Accumulates pairs between the selected index sets (`None` selects every point).
pub fn accumulate_indexed(
    source: &PointCloud,
    target: &PointCloud,
    source_features: &DescriptorSet,
    target_features: &DescriptorSet,
    source_indices: Option<&[usize]>,
    target_indices: Option<&[usize]>,
    cfg: &SolverConfig,
) -> Result<PairAccumulator> {
    cfg.validate()?;
    if source.len() != source_features.len() || target.len() != target_features.len() {
        return Err(Error::InvalidArgument(format!(
            "descriptor count mismatch: source {}/{}, target {}/{}",
            source.len(),
            source_features.len(),
            target.len(),
            target_features.len()
        )));
    }
    let all_src: Vec<usize>;
    let src_idx = match source_indices {
        Some(idx) => idx,
        None => {
            all_src = (0..source.len()).collect();
            &all_src
        }
    };
    let all_tgt: Vec<usize>;
    let tgt_idx = match target_indices {
        Some(idx) => idx,
        None => {
            all_tgt = (0..target.len()).collect();
            &all_tgt
        }
    };
    if src_idx.is_empty() || tgt_idx.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if let Some(&bad) = src_idx.iter().find(|&&i| i >= source.len()) {
        return Err(Error::InvalidArgument(format!("source index {bad} out of range")));
    }
    if let Some(&bad) = tgt_idx.iter().find(|&&j| j >= target.len()) {
        return Err(Error::InvalidArgument(format!("target index {bad} out of range")));
    }

    let tgt_points: Vec<Point3> = tgt_idx.iter().map(|&j| target[j]).collect();
    let tgt_feats: Vec<Histogram> = tgt_idx.iter().map(|&j| target_features.get(j).0).collect();
    let beta = cfg.beta;
    let floor = cfg.weight_floor;

    let accumulate_rows = |rows: &[usize]| {
        let mut acc = PairAccumulator::new();
        for &i in rows {
            let f_p = &source_features.get(i).0;
            let mut row_w = 0.0;
            let mut row_w_sq = 0.0;
            let mut row_q = Vector3::zeros();
            for (q, f_q) in tgt_points.iter().zip(&tgt_feats) {
                let w = (-squared_distance(f_p, f_q) / beta).exp().max(floor);
                row_w += w;
                row_w_sq += w * w;
                row_q += q * w;
            }
            acc.add_row(&source[i], row_w, row_w_sq, &row_q, tgt_points.len() as u64);
        }
        acc
    };

    let acc = if cfg.execution.is_parallel() {
        let partials: Vec<PairAccumulator> = src_idx.par_chunks(ROW_CHUNK).map(accumulate_rows).collect();
        partials.iter().fold(PairAccumulator::new(), |mut acc, part| {
            acc.merge(part);
            acc
        })
    } else {
        accumulate_rows(src_idx)
    };

    if !acc.is_finite() {
        return Err(Error::Degenerate("non-finite pair statistics".into()));
    }
    if acc.total_weight <= 0.0 {
        return Err(Error::Degenerate("all pair weights underflowed to zero; raise beta or set a weight floor".into()));
    }
    Ok(acc)
}
