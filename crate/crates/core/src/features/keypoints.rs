use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::normals::NormalSet;
use crate::geom::PointCloud;
use crate::kdtree::KdTree3;

pub const MIN_KEYPOINT_CLOUD: usize = 50;

/// Surface-variation keypoint detector settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeypointParams {
    /// Suppression radius; `None` uses `nms_spacing_factor` × median 1-NN spacing.
    pub nms_radius: Option<f64>,
    pub nms_spacing_factor: f64,
    /// Minimum surface variation.
    pub threshold: f64,
    pub max_keypoints: usize,
}

impl Default for KeypointParams {
    fn default() -> Self {
        Self { nms_radius: None, nms_spacing_factor: 4.0, threshold: 0.02, max_keypoints: 200 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeypointSet {
    /// Unique, ascending indices into the source cloud.
    pub indices: Vec<usize>,
    pub params: KeypointParams,
    /// The suppression radius actually used.
    pub nms_radius: f64,
}

impl KeypointSet {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    /// No point passed the threshold; callers should fall back to the full cloud.
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Median distance from each point to its nearest other point.
pub fn median_spacing(cloud: &PointCloud, tree: &KdTree3) -> Result<f64> {
    if cloud.len() < 2 {
        return Err(Error::TooFewPoints { requested: 2, available: cloud.len() });
    }
    let mut d: Vec<f64> = cloud.iter().map(|p| tree.knn(p, 2).map(|nn| nn[1].dist_sq.sqrt())).collect::<Result<_>>()?;
    d.sort_by(f64::total_cmp);
    let mid = d.len() / 2;
    Ok(if d.len() % 2 == 0 { 0.5 * (d[mid - 1] + d[mid]) } else { d[mid] })
}

/// Points whose surface variation exceeds the threshold and is maximal within
/// the suppression radius, strongest first, capped at `max_keypoints`.
///
/// Equal variations are ranked by lower index, so the result is deterministic.
pub fn detect_keypoints(cloud: &PointCloud, normals: &NormalSet, params: &KeypointParams) -> Result<KeypointSet> {
    if cloud.len() < MIN_KEYPOINT_CLOUD {
        return Err(Error::TooFewPoints { requested: MIN_KEYPOINT_CLOUD, available: cloud.len() });
    }
    if normals.len() != cloud.len() {
        return Err(Error::InvalidArgument(format!("{} normals for {} points", normals.len(), cloud.len())));
    }
    let tree = KdTree3::build(cloud)?;
    let radius = match params.nms_radius {
        Some(r) if r > 0.0 => r,
        Some(r) => return Err(Error::InvalidArgument(format!("suppression radius {r} must be positive"))),
        None => params.nms_spacing_factor * median_spacing(cloud, &tree)?,
    };
    let var = &normals.variation;
    let beats = |i: usize, j: usize| var[i] > var[j] || (var[i] == var[j] && i < j);

    let mut maxima: Vec<usize> = (0..cloud.len())
        .filter(|&i| normals.valid[i] && var[i] > params.threshold)
        .filter(|&i| {
            let mut is_max = true;
            tree.for_each_within(&cloud[i], radius * radius, |nb| {
                if nb.index != i && normals.valid[nb.index] && beats(nb.index, i) {
                    is_max = false;
                }
            });
            is_max
        })
        .collect();
    maxima.sort_by(|&a, &b| var[b].total_cmp(&var[a]).then(a.cmp(&b)));
    maxima.truncate(params.max_keypoints);
    maxima.sort_unstable();

    Ok(KeypointSet { indices: maxima, params: *params, nms_radius: radius })
}
