//! Feature-weighted full-connection registration.
//!
//! Every source point is connected to every target point with weight
//! `exp(-‖f(p) − f(q)‖² / β)`. The weighted least-squares problem over all
//! pairs is solved in one step with the weighted SVD (Procrustes) solution.
//! Pairs are never materialized: the solve only needs the sufficient
//! statistics collected by [`PairAccumulator`].

mod accumulator;
mod closed_form;
mod pipeline;

pub use accumulator::{accumulate_full_connection, accumulate_indexed, pair_weight, PairAccumulator};
pub use closed_form::{solve_weighted_closed_form, ILL_CONDITIONED_RATIO};
pub use pipeline::{prepare_cloud, register_cf, register_cfk, register_on_indices, PreparedCloud};

pub use crate::linalg::{svd3, SvdResult};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::KeypointParams;
use crate::geom::RigidTransform;

pub const DEFAULT_BETA: f64 = 100.0;
pub const DEFAULT_K: usize = 150;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Execution {
    /// Single-threaded, bit-reproducible.
    Sequential,
    /// Per-point work and pair accumulation spread over the rayon pool.
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        matches!(self, Execution::Parallel)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Feature-distance scale in the pair weight.
    pub beta: f64,
    /// Neighbor count for normals and descriptors.
    pub k: usize,
    pub keypoints: KeypointParams,
    /// Lower bound applied to every pair weight.
    pub weight_floor: f64,
    pub execution: Execution,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            beta: DEFAULT_BETA,
            k: DEFAULT_K,
            keypoints: KeypointParams::default(),
            weight_floor: 0.0,
            execution: Execution::Parallel,
        }
    }
}

impl SolverConfig {
    pub fn sequential(mut self) -> Self {
        self.execution = Execution::Sequential;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("beta must be positive, got {}", self.beta)));
        }
        if self.k < 3 {
            return Err(Error::InvalidArgument(format!("k must be at least 3, got {}", self.k)));
        }
        if !(self.weight_floor >= 0.0 && self.weight_floor <= 1.0) {
            return Err(Error::InvalidArgument(format!("weight floor must lie in [0, 1], got {}", self.weight_floor)));
        }
        Ok(())
    }
}

/// Wall-clock breakdown in milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub features_ms: f64,
    pub keypoints_ms: f64,
    pub accumulate_ms: f64,
    pub solve_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcpDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    /// Mean squared correspondence distance at each iteration.
    pub mse_history: Vec<f64>,
    pub final_mse: f64,
    /// Stopped because no pair fell inside the correspondence gate.
    pub lost_correspondences: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub algorithm: String,
    pub total_weight: f64,
    pub pair_count: u64,
    /// Kish effective sample size `(Σw)² / Σw²`.
    pub effective_pairs: f64,
    pub singular_values: [f64; 3],
    pub reflection_corrected: bool,
    pub ill_conditioned: bool,
    pub source_keypoints: Option<usize>,
    pub target_keypoints: Option<usize>,
    pub icp: Option<IcpDiagnostics>,
    pub timings: Timings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationResult {
    /// Maps the source cloud into the target frame.
    pub transform: RigidTransform,
    pub diagnostics: Diagnostics,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_validation() {
        let cfg = SolverConfig::default();
        assert_eq!(cfg.beta, 100.0);
        assert_eq!(cfg.k, 150);
        assert_eq!(cfg.weight_floor, 0.0);
        assert!(cfg.validate().is_ok());
        assert!(SolverConfig { beta: 0.0, ..cfg }.validate().is_err());
        assert!(SolverConfig { k: 2, ..cfg }.validate().is_err());
        assert!(SolverConfig { weight_floor: -1.0, ..cfg }.validate().is_err());
    }
}
