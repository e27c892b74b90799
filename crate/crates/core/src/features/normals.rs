use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud};
use crate::kdtree::{KdTree3, Neighbor};
use crate::linalg::symmetric_eigen3;

/// Per-point unit normals and surface variation, aligned with the source cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalSet {
    pub normals: Vec<Vector3<f64>>,
    /// `λ_min / (λ₀ + λ₁ + λ₂)` of the neighborhood covariance, in `[0, 1/3]`.
    pub variation: Vec<f64>,
    /// `false` where every neighbor coincides with the point (no covariance).
    pub valid: Vec<bool>,
    pub k: usize,
}

impl NormalSet {
    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }

    pub fn invalid_count(&self) -> usize {
        self.valid.iter().filter(|v| !**v).count()
    }
}

pub fn estimate_normals(cloud: &PointCloud, k: usize) -> Result<NormalSet> {
    let tree = KdTree3::build(cloud)?;
    let neighborhoods = neighborhoods(&tree, k, true)?;
    Ok(normals_from_neighborhoods(cloud, &neighborhoods, k, true))
}

pub(crate) fn neighborhoods(tree: &KdTree3, k: usize, parallel: bool) -> Result<Vec<Vec<Neighbor>>> {
    if k < 3 {
        return Err(Error::InvalidArgument(format!("k must be at least 3, got {k}")));
    }
    tree.knn_all(k, parallel)
}

pub(crate) fn normals_from_neighborhoods(
    cloud: &PointCloud,
    neighborhoods: &[Vec<Neighbor>],
    k: usize,
    parallel: bool,
) -> NormalSet {
    let centroid = cloud.centroid();
    let fit = |(i, nbrs): (usize, &Vec<Neighbor>)| fit_normal(cloud, &centroid, i, nbrs);
    let fitted: Vec<(Vector3<f64>, f64, bool)> = if parallel {
        neighborhoods.par_iter().enumerate().map(fit).collect()
    } else {
        neighborhoods.iter().enumerate().map(fit).collect()
    };
    let mut set = NormalSet {
        normals: Vec::with_capacity(fitted.len()),
        variation: Vec::with_capacity(fitted.len()),
        valid: Vec::with_capacity(fitted.len()),
        k,
    };
    for (n, var, ok) in fitted {
        set.normals.push(n);
        set.variation.push(var);
        set.valid.push(ok);
    }
    set
}

fn fit_normal(cloud: &PointCloud, centroid: &Point3, index: usize, nbrs: &[Neighbor]) -> (Vector3<f64>, f64, bool) {
    let n = nbrs.len() as f64;
    let mean = nbrs.iter().fold(Point3::zeros(), |acc, nb| acc + cloud[nb.index]) / n;
    let mut cov = Matrix3::zeros();
    for nb in nbrs {
        let d = cloud[nb.index] - mean;
        cov += d * d.transpose();
    }
    cov /= n;
    let eig = symmetric_eigen3(&cov);
    let trace = eig.values.sum();
    if trace <= 0.0 {
        return (Vector3::z(), 0.0, false);
    }
    let lambda_min = eig.values[2].max(0.0);
    let variation = (lambda_min / trace).min(1.0 / 3.0);
    let mut normal = eig.vectors.column(2).into_owned();
    normal /= normal.norm();
    (orient(normal, &(cloud[index] - centroid)), variation, true)
}

/// Flips `normal` to point away from the cloud centroid; exact ties fall back to
/// a positive z, then y, then x component.
fn orient(normal: Vector3<f64>, outward: &Vector3<f64>) -> Vector3<f64> {
    let dot = normal.dot(outward);
    let flip = if dot != 0.0 {
        dot < 0.0
    } else if normal.z != 0.0 {
        normal.z < 0.0
    } else if normal.y != 0.0 {
        normal.y < 0.0
    } else {
        normal.x < 0.0
    };
    if flip {
        -normal
    } else {
        normal
    }
}
