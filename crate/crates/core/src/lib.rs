//! Rigid point-set registration with a one-step, correspondence-free
//! full-connection solver.
//!
//! Every source point is paired with every target point, each pair weighted by
//! the similarity of their FPFH descriptors, and the weighted least-squares
//! rigid transform is solved in closed form. [`solver::register_cf`] runs the
//! full pipeline, [`solver::register_cfk`] restricts it to keypoints, and
//! [`icp::register_icp`] is the iterative baseline.

pub mod cli;
pub mod datasets;
pub mod error;
pub mod features;
pub mod geom;
pub mod harness;
pub mod icp;
pub mod io;
pub mod kdtree;
pub mod linalg;
pub mod rng;
pub mod solver;

pub use error::{Error, ErrorClass, Result};
pub use geom::{
    axis_angle_to_rotation, rotation_accuracy, rotation_to_axis_angle, sample_rotation_vector, AxisAngle, Point3,
    PointCloud, RigidTransform, Rotation3, RotationMagnitude,
};
pub use icp::{register_icp, IcpParams};
pub use solver::{register_cf, register_cfk, Diagnostics, Execution, RegistrationResult, SolverConfig};
