//! Data generation for the experiments: subsampling, ground-truth motions,
//! noise and outliers, and the average-shift metric.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{axis_angle_to_rotation, Point3, PointCloud, RigidTransform, Rotation3, RotationMagnitude};
use crate::rng::seeded_rng;

/// How the ground-truth motion is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RotationMode {
    /// Small rotation about the cloud's centroid.
    SmallCentered,
    /// Large rotation about the dataset origin.
    LargeOrigin,
}

impl RotationMode {
    pub fn magnitude(self) -> RotationMagnitude {
        match self {
            RotationMode::SmallCentered => RotationMagnitude::Small,
            RotationMode::LargeOrigin => RotationMagnitude::Large,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RotationMode::SmallCentered => "small-centered",
            RotationMode::LargeOrigin => "large-origin",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "small" | "small-centered" => Some(RotationMode::SmallCentered),
            "large" | "large-origin" => Some(RotationMode::LargeOrigin),
            _ => None,
        }
    }

    /// Places `rotation` according to the mode: about `cloud`'s centroid
    /// (`t = c − R·c`) or about the origin (`t = 0`).
    pub fn place(self, rotation: Rotation3, cloud: &PointCloud) -> RigidTransform {
        match self {
            RotationMode::SmallCentered => {
                let c = cloud.centroid();
                RigidTransform::new(rotation, c - rotation.rotate(&c))
            }
            RotationMode::LargeOrigin => RigidTransform::from_rotation(rotation),
        }
    }
}

/// Outlier placement inside or on the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutlierShape {
    /// Uniform over the ball's volume.
    Volume,
    /// Uniform over the sphere's surface.
    Surface,
}

/// Uniform sample of `n` points without replacement, in original order.
///
/// Returns the sampled cloud and the sorted source indices.
pub fn subsample(cloud: &PointCloud, n: usize, seed: u64) -> Result<(PointCloud, Vec<usize>)> {
    if n > cloud.len() {
        return Err(Error::TooFewPoints { requested: n, available: cloud.len() });
    }
    let indices: Vec<usize> = if n == cloud.len() {
        (0..n).collect()
    } else {
        let mut idx = sample(&mut seeded_rng(seed), cloud.len(), n).into_vec();
        idx.sort_unstable();
        idx
    };
    Ok((cloud.select(&indices), indices))
}

/// Random ground-truth motion for `mode`; see [`RotationMode::place`].
pub fn make_transform(mode: RotationMode, cloud: &PointCloud, seed: u64) -> RigidTransform {
    let v = mode.magnitude().sample(&mut seeded_rng(seed));
    mode.place(axis_angle_to_rotation(&v), cloud)
}

/// Adds independent `N(0, σ²)` noise to every coordinate.
pub fn add_gaussian_noise(cloud: &PointCloud, sigma: f64, seed: u64) -> Result<PointCloud> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!("noise sigma must be nonnegative, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(cloud.clone());
    }
    let normal = Normal::new(0.0, sigma).expect("sigma checked above");
    let mut rng = seeded_rng(seed);
    let points = cloud
        .iter()
        .map(|p| p + Point3::new(normal.sample(&mut rng), normal.sample(&mut rng), normal.sample(&mut rng)))
        .collect();
    PointCloud::new(points)
}

/// Appends `count` points drawn uniformly in (or on) the sphere of `radius`
/// around the cloud's centroid. Existing points keep their indices.
pub fn add_spherical_outliers(
    cloud: &PointCloud,
    count: usize,
    radius: f64,
    shape: OutlierShape,
    seed: u64,
) -> Result<PointCloud> {
    if count == 0 {
        return Ok(cloud.clone());
    }
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    if !(radius >= 0.0 && radius.is_finite()) {
        return Err(Error::InvalidArgument(format!("outlier radius must be nonnegative, got {radius}")));
    }
    let center = cloud.centroid();
    let mut rng = seeded_rng(seed);
    let outliers: Vec<Point3> = (0..count)
        .map(|_| {
            let dir = random_direction(&mut rng);
            let r = match shape {
                OutlierShape::Volume => radius * rng.random::<f64>().cbrt(),
                OutlierShape::Surface => radius,
            };
            center + dir * r
        })
        .collect();
    Ok(cloud.extended(&PointCloud::new(outliers)?))
}

fn random_direction(rng: &mut impl Rng) -> Point3 {
    loop {
        let v = Point3::new(StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// Mean of `‖T_est(p) − T_gt(p)‖` over `points`.
pub fn average_shift(estimate: &RigidTransform, truth: &RigidTransform, points: &PointCloud) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let total: f64 = points.iter().map(|p| (estimate.apply(p) - truth.apply(p)).norm()).sum();
    Ok(total / points.len() as f64)
}

/// Expected distance from the center for a volume-uniform ball sample.
pub const BALL_MEAN_RADIUS_FACTOR: f64 = 0.75;
