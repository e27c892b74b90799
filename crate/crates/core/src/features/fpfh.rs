//! Fast Point Feature Histograms.
//!
//! Each point pair contributes the Darboux-frame triple (α, φ, θ). The
//! descriptor layout is `[α bins | φ bins | θ bins]`, 11 bins per block,
//! and each block of a non-isolated point sums to 100.

use std::f64::consts::PI;

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::normals::{neighborhoods, normals_from_neighborhoods, NormalSet};
use crate::geom::{Point3, PointCloud};
use crate::kdtree::{KdTree3, Neighbor};

pub const BINS_PER_FEATURE: usize = 11;
pub const DESCRIPTOR_DIM: usize = 3 * BINS_PER_FEATURE;
pub const BLOCK_TOTAL: f64 = 100.0;

pub type Histogram = [f64; DESCRIPTOR_DIM];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpfhDescriptor(pub Histogram);

impl FpfhDescriptor {
    pub fn zeros() -> Self {
        Self([0.0; DESCRIPTOR_DIM])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|v| *v == 0.0)
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn distance_sq(&self, other: &FpfhDescriptor) -> f64 {
        squared_distance(&self.0, &other.0)
    }

    pub fn block_sums(&self) -> [f64; 3] {
        let mut sums = [0.0; 3];
        for (b, sum) in sums.iter_mut().enumerate() {
            *sum = self.0[b * BINS_PER_FEATURE..(b + 1) * BINS_PER_FEATURE].iter().sum();
        }
        sums
    }
}

#[inline]
pub(crate) fn squared_distance(a: &Histogram, b: &Histogram) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Descriptors for every point of one cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet {
    pub descriptors: Vec<FpfhDescriptor>,
    pub k: usize,
    /// Caller-supplied label of the source cloud.
    pub cloud_label: String,
}

impl DescriptorSet {
    pub fn len(&self) -> usize {
        self.descriptors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.descriptors.is_empty()
    }

    pub fn get(&self, i: usize) -> &FpfhDescriptor {
        &self.descriptors[i]
    }
}

/// Darboux-frame features of an oriented point pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairFeatures {
    /// Cosine in `[-1, 1]`.
    pub alpha: f64,
    /// Cosine in `[-1, 1]`.
    pub phi: f64,
    /// Angle in `[-π, π]`.
    pub theta: f64,
    pub distance: f64,
}

const PAIR_TIE_TOL: f64 = 1e-12;

/// Returns `None` for coincident points.
///
/// The source of the frame is whichever point's normal makes the smaller angle
/// with the connecting line, which makes the triple symmetric in the pair.
pub fn pair_features(p1: &Point3, n1: &Vector3<f64>, p2: &Point3, n2: &Vector3<f64>) -> Option<PairFeatures> {
    let mut dp = p2 - p1;
    let distance = dp.norm();
    if distance == 0.0 {
        return None;
    }
    dp /= distance;
    let angle1 = n1.dot(&dp);
    let angle2 = n2.dot(&dp);
    // The source normal makes the smaller angle with the line, i.e. has the
    // larger |cos|. Near-ties (parallel normals) are broken toward the
    // larger φ, which unlike raw rounding is the same in every frame.
    let diff = angle1.abs() - angle2.abs();
    let swap = if diff.abs() <= PAIR_TIE_TOL { -angle2 > angle1 } else { diff < 0.0 };
    let (src_n, tgt_n, phi) = if swap {
        dp = -dp;
        (n2, n1, -angle2)
    } else {
        (n1, n2, angle1)
    };
    let v = dp.cross(src_n);
    let v_norm = v.norm();
    if v_norm == 0.0 {
        return Some(PairFeatures { alpha: 0.0, phi, theta: 0.0, distance });
    }
    let v = v / v_norm;
    let w = src_n.cross(&v);
    Some(PairFeatures { alpha: v.dot(tgt_n), phi, theta: w.dot(tgt_n).atan2(src_n.dot(tgt_n)), distance })
}

#[inline]
fn bin(value: f64, lo: f64, hi: f64) -> usize {
    let b = ((value - lo) / (hi - lo) * BINS_PER_FEATURE as f64).floor();
    if b.is_nan() || b < 0.0 {
        0
    } else {
        (b as usize).min(BINS_PER_FEATURE - 1)
    }
}

/// `θ` wraps at ±π, where anti-parallel normals put it. Rounding noise there
/// would flip the pair between the first and last bins, so values within
/// `THETA_WRAP_TOL` of −π are moved to +π.
const THETA_WRAP_TOL: f64 = 1e-9;

#[inline]
fn unwrap_theta(theta: f64) -> f64 {
    if theta < -PI + THETA_WRAP_TOL {
        PI
    } else {
        theta
    }
}

/// Simplified point feature histogram of `index` against `neighbor_indices`.
///
/// The point itself, coincident neighbors and neighbors without a valid normal
/// are skipped. Each block sums to 100 when at least one pair counts, and the
/// histogram is all-zero otherwise.
pub fn compute_spfh(cloud: &PointCloud, normals: &NormalSet, index: usize, neighbor_indices: &[usize]) -> Histogram {
    let mut hist = [0.0; DESCRIPTOR_DIM];
    if !normals.valid[index] {
        return hist;
    }
    let p = &cloud[index];
    let n = &normals.normals[index];
    let mut count = 0usize;
    for &j in neighbor_indices {
        if j == index || !normals.valid[j] {
            continue;
        }
        let Some(f) = pair_features(p, n, &cloud[j], &normals.normals[j]) else {
            continue;
        };
        hist[bin(f.alpha, -1.0, 1.0)] += 1.0;
        hist[BINS_PER_FEATURE + bin(f.phi, -1.0, 1.0)] += 1.0;
        hist[2 * BINS_PER_FEATURE + bin(unwrap_theta(f.theta), -PI, PI)] += 1.0;
        count += 1;
    }
    if count > 0 {
        let scale = BLOCK_TOTAL / count as f64;
        hist.iter_mut().for_each(|h| *h *= scale);
    }
    hist
}

/// Options for [`compute_fpfh_with`].
#[derive(Debug, Clone, Copy)]
pub struct FpfhOptions {
    pub parallel: bool,
}

impl Default for FpfhOptions {
    fn default() -> Self {
        Self { parallel: true }
    }
}

/// FPFH for every point using its `k` nearest neighbors (the point included).
pub fn compute_fpfh(cloud: &PointCloud, normals: &NormalSet, k: usize) -> Result<DescriptorSet> {
    compute_fpfh_with(cloud, normals, k, FpfhOptions::default())
}

pub fn compute_fpfh_with(
    cloud: &PointCloud,
    normals: &NormalSet,
    k: usize,
    opts: FpfhOptions,
) -> Result<DescriptorSet> {
    if normals.len() != cloud.len() {
        return Err(Error::InvalidArgument(format!("{} normals for {} points", normals.len(), cloud.len())));
    }
    let tree = KdTree3::build(cloud)?;
    let nbrs = neighborhoods(&tree, k, opts.parallel)?;
    Ok(fpfh_from_neighborhoods(cloud, normals, &nbrs, k, opts.parallel))
}

/// Normals and descriptors from a single neighborhood pass, as the registration
/// pipeline uses them.
pub fn normals_and_fpfh(cloud: &PointCloud, k: usize, parallel: bool) -> Result<(NormalSet, DescriptorSet)> {
    let tree = KdTree3::build(cloud)?;
    let nbrs = neighborhoods(&tree, k, parallel)?;
    let normals = normals_from_neighborhoods(cloud, &nbrs, k, parallel);
    let descriptors = fpfh_from_neighborhoods(cloud, &normals, &nbrs, k, parallel);
    Ok((normals, descriptors))
}

pub(crate) fn fpfh_from_neighborhoods(
    cloud: &PointCloud,
    normals: &NormalSet,
    nbrs: &[Vec<Neighbor>],
    k: usize,
    parallel: bool,
) -> DescriptorSet {
    let spfh_of = |(i, hood): (usize, &Vec<Neighbor>)| {
        let idx: Vec<usize> = hood.iter().map(|n| n.index).collect();
        compute_spfh(cloud, normals, i, &idx)
    };
    let spfh: Vec<Histogram> = if parallel {
        nbrs.par_iter().enumerate().map(spfh_of).collect()
    } else {
        nbrs.iter().enumerate().map(spfh_of).collect()
    };
    let combine = |(i, hood): (usize, &Vec<Neighbor>)| combine_fpfh(normals, &spfh, i, hood);
    let descriptors = if parallel {
        nbrs.par_iter().enumerate().map(combine).collect()
    } else {
        nbrs.iter().enumerate().map(combine).collect()
    };
    DescriptorSet { descriptors, k, cloud_label: String::new() }
}

/// `SPFH(p)` plus the inverse-distance-weighted mean of the neighbors' SPFH,
/// with each block renormalized to 100.
///
/// Normalizing the neighbor weights by their sum keeps the descriptor
/// independent of the cloud's scale.
fn combine_fpfh(normals: &NormalSet, spfh: &[Histogram], index: usize, hood: &[Neighbor]) -> FpfhDescriptor {
    if !normals.valid[index] {
        return FpfhDescriptor::zeros();
    }
    let mut neighbor_sum = [0.0; DESCRIPTOR_DIM];
    let mut weight_sum = 0.0;
    for nb in hood {
        if nb.index == index || nb.dist_sq == 0.0 || !normals.valid[nb.index] {
            continue;
        }
        let w = 1.0 / nb.dist_sq.sqrt();
        weight_sum += w;
        for (acc, v) in neighbor_sum.iter_mut().zip(&spfh[nb.index]) {
            *acc += w * v;
        }
    }
    let mut hist = spfh[index];
    if weight_sum > 0.0 {
        for (h, v) in hist.iter_mut().zip(&neighbor_sum) {
            *h += v / weight_sum;
        }
    }
    for block in hist.chunks_mut(BINS_PER_FEATURE) {
        let sum: f64 = block.iter().sum();
        if sum > 0.0 {
            let scale = BLOCK_TOTAL / sum;
            block.iter_mut().for_each(|v| *v *= scale);
        }
    }
    FpfhDescriptor(hist)
}
