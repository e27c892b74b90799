//! Points, rotations and rigid transforms.
//!
//! Rotations are stored as 3×3 matrices acting on column vectors, so
//! `RigidTransform::apply(p)` is `R·p + t`.

use std::f64::consts::PI;
use std::ops::Index;

use nalgebra::{Matrix3, Matrix4, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::seeded_rng;

pub type Point3 = Vector3<f64>;

/// Tolerance used when validating user-supplied rotation matrices.
pub const ROTATION_CHECK_TOL: f64 = 1e-6;

/// Ordered list of finite 3D points.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Point3>,
}

impl PointCloud {
    /// Builds a cloud, rejecting NaN and infinite coordinates.
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if let Some(index) = points.iter().position(|p| !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite())) {
            return Err(Error::NonFinitePoint { index });
        }
        Ok(Self { points })
    }

    pub fn from_xyz(coords: &[[f64; 3]]) -> Result<Self> {
        Self::new(coords.iter().map(|c| Point3::new(c[0], c[1], c[2])).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Point3> {
        self.points.iter()
    }

    pub fn into_points(self) -> Vec<Point3> {
        self.points
    }

    /// Unweighted mean of all points; the origin for an empty cloud.
    pub fn centroid(&self) -> Point3 {
        if self.points.is_empty() {
            return Point3::zeros();
        }
        let sum = self.points.iter().fold(Point3::zeros(), |acc, p| acc + p);
        sum / self.points.len() as f64
    }

    pub fn transformed(&self, transform: &RigidTransform) -> PointCloud {
        PointCloud { points: self.points.iter().map(|p| transform.apply(p)).collect() }
    }

    pub fn scaled(&self, factor: f64) -> PointCloud {
        PointCloud { points: self.points.iter().map(|p| p * factor).collect() }
    }

    /// Points at the given indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud { points: indices.iter().map(|&i| self.points[i]).collect() }
    }

    /// Appends the points of `other` after the existing ones.
    pub fn extended(&self, other: &PointCloud) -> PointCloud {
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        PointCloud { points }
    }
}

impl Index<usize> for PointCloud {
    type Output = Point3;

    fn index(&self, index: usize) -> &Point3 {
        &self.points[index]
    }
}

impl<'a> IntoIterator for &'a PointCloud {
    type Item = &'a Point3;
    type IntoIter = std::slice::Iter<'a, Point3>;

    fn into_iter(self) -> Self::IntoIter {
        self.points.iter()
    }
}

/// Proper rotation matrix (orthonormal, determinant +1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rotation3(Matrix3<f64>);

impl Rotation3 {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Accepts `m` if `mᵀm = I` and `det m = 1`, both within `tol`.
    pub fn from_matrix(m: Matrix3<f64>, tol: f64) -> Result<Self> {
        check_rotation(&m, tol)?;
        Ok(Self(m))
    }

    pub(crate) fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn compose(&self, other: &Rotation3) -> Self {
        Self(self.0 * other.0)
    }

    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0 * v
    }

    /// Largest absolute deviation of `RᵀR` from identity, and `|det R - 1|`.
    pub fn orthonormality_error(&self) -> (f64, f64) {
        let gram = self.0.transpose() * self.0 - Matrix3::identity();
        (gram.abs().max(), (self.0.determinant() - 1.0).abs())
    }
}

fn check_rotation(m: &Matrix3<f64>, tol: f64) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NotARotation("non-finite entry".into()));
    }
    let gram_err = (m.transpose() * m - Matrix3::identity()).abs().max();
    if gram_err > tol {
        return Err(Error::NotARotation(format!("orthogonality error {gram_err:.3e} exceeds {tol:.0e}")));
    }
    let det = m.determinant();
    if (det - 1.0).abs() > tol {
        return Err(Error::NotARotation(format!("determinant {det:.6}")));
    }
    Ok(())
}

/// Rotation vector: the direction is the axis, the length is the angle in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisAngle(pub Vector3<f64>);

impl AxisAngle {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self(Vector3::new(x, y, z))
    }

    pub fn angle(&self) -> f64 {
        self.0.norm()
    }

    pub fn vector(&self) -> &Vector3<f64> {
        &self.0
    }
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rodrigues' formula. The zero vector maps to the identity.
pub fn axis_angle_to_rotation(v: &AxisAngle) -> Rotation3 {
    let theta = v.angle();
    if theta == 0.0 {
        return Rotation3::identity();
    }
    let k = skew(&(v.0 / theta));
    let m = Matrix3::identity() + k * theta.sin() + k * k * (1.0 - theta.cos());
    Rotation3(m)
}

/// Canonical rotation vector with angle in `[0, π]`.
///
/// At π the axis sign is ambiguous; the axis whose largest-magnitude
/// component is positive is returned. Angles within rounding of π
/// (`sin θ ≤ 1e-12`) are treated as π.
pub fn rotation_to_axis_angle(r: &Rotation3) -> Result<AxisAngle> {
    let m = r.matrix();
    check_rotation(m, ROTATION_CHECK_TOL)?;

    // vee(R - Rᵀ)/2 = sin(θ)·axis
    let s = Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) * 0.5;
    let c = ((m.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let sin_theta = s.norm();
    let theta = sin_theta.atan2(c);
    if theta == 0.0 {
        return Ok(AxisAngle(Vector3::zeros()));
    }
    if c >= 0.0 {
        return Ok(AxisAngle(s * (theta / sin_theta)));
    }

    // Near π: (R + Rᵀ)/2 = c·I + (1 - c)·aaᵀ, so aaᵀ is read off the symmetric part.
    let sym = (m + m.transpose()) * 0.5;
    let outer = (sym - Matrix3::identity() * c) / (1.0 - c);
    let diag = outer.diagonal();
    let col = diag.imax();
    let mut axis = outer.column(col).into_owned();
    axis /= axis.norm();
    // Within rounding of π the antisymmetric part carries no usable sign.
    let dot = if sin_theta > PI_SIGN_TOL { axis.dot(&s) } else { 0.0 };
    if dot < 0.0 || (dot == 0.0 && largest_component(&axis) < 0.0) {
        axis = -axis;
    }
    Ok(AxisAngle(axis * theta))
}

const PI_SIGN_TOL: f64 = 1e-12;

fn largest_component(v: &Vector3<f64>) -> f64 {
    v[v.iamax()]
}

/// Rotation `R` plus translation `t`, acting as `p ↦ R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: Rotation3,
    pub translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn new(rotation: Rotation3, translation: Vector3<f64>) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self::new(Rotation3::identity(), Vector3::zeros())
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self::new(Rotation3::identity(), t)
    }

    pub fn from_rotation(r: Rotation3) -> Self {
        Self::new(r, Vector3::zeros())
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        self.rotation.matrix() * p + self.translation
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation.compose(&other.rotation),
            translation: self.rotation.matrix() * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.inverse();
        RigidTransform { rotation: rt, translation: -(rt.matrix() * self.translation) }
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut h = Matrix4::identity();
        h.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rotation.matrix());
        h.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        h
    }

    /// Parses a homogeneous matrix, validating the rotation block with `tol`.
    pub fn from_homogeneous(h: &Matrix4<f64>, tol: f64) -> Result<Self> {
        let bottom = h.fixed_view::<1, 4>(3, 0);
        if (bottom[0].abs() + bottom[1].abs() + bottom[2].abs() + (bottom[3] - 1.0).abs()) > tol {
            return Err(Error::NotARotation("bottom row of homogeneous matrix is not (0, 0, 0, 1)".into()));
        }
        let r = Rotation3::from_matrix(h.fixed_view::<3, 3>(0, 0).into_owned(), tol)?;
        let t: Vector3<f64> = h.fixed_view::<3, 1>(0, 3).into_owned();
        if t.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite translation".into()));
        }
        Ok(Self::new(r, t))
    }
}

/// Interval family for random rotation vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RotationMagnitude {
    /// Each component uniform in `[-π/8, π/8)`.
    Small,
    /// Each component uniform in `[-π/2, π/2)`.
    Large,
}

impl RotationMagnitude {
    pub fn half_width(self) -> f64 {
        match self {
            RotationMagnitude::Small => PI / 8.0,
            RotationMagnitude::Large => PI / 2.0,
        }
    }

    /// Draws the three components independently and uniformly.
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> AxisAngle {
        let h = self.half_width();
        AxisAngle::new(rng.random_range(-h..h), rng.random_range(-h..h), rng.random_range(-h..h))
    }
}

pub fn sample_rotation_vector(mode: RotationMagnitude, seed: u64) -> AxisAngle {
    mode.sample(&mut seeded_rng(seed))
}

/// `‖I − R_pred·R_gtᵀ‖_F`.
pub fn rotation_accuracy(r_gt: &Rotation3, r_pred: &Rotation3) -> f64 {
    (Matrix3::identity() - r_pred.matrix() * r_gt.matrix().transpose()).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn quarter_turn_z() -> Matrix3<f64> {
        Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0)
    }

    fn random_transform(seed: u64) -> RigidTransform {
        let mut rng = seeded_rng(seed);
        let r = axis_angle_to_rotation(&RotationMagnitude::Large.sample(&mut rng));
        let t = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        RigidTransform::new(r, t)
    }

    #[test]
    fn zero_vector_is_identity() {
        let r = axis_angle_to_rotation(&AxisAngle::new(0.0, 0.0, 0.0));
        assert_eq!(*r.matrix(), Matrix3::identity());
    }

    #[test]
    fn quarter_turn_about_z() {
        let r = axis_angle_to_rotation(&AxisAngle::new(0.0, 0.0, PI / 2.0));
        assert_relative_eq!(*r.matrix(), quarter_turn_z(), epsilon = 1e-15);
        let v = rotation_to_axis_angle(&r).unwrap();
        assert_relative_eq!(v.0, Vector3::new(0.0, 0.0, PI / 2.0), epsilon = 1e-15);
    }

    #[test]
    fn identity_maps_to_zero_vector() {
        let v = rotation_to_axis_angle(&Rotation3::identity()).unwrap();
        assert_eq!(v.0, Vector3::zeros());
    }

    #[test]
    fn round_trip_over_random_vectors() {
        let mut rng = seeded_rng(11);
        for _ in 0..1000 {
            let dir =
                Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0f64..1.0));
            if dir.norm() < 1e-3 {
                continue;
            }
            let angle = rng.random_range(1e-6..PI - 1e-6);
            let v = AxisAngle(dir.normalize() * angle);
            let back = rotation_to_axis_angle(&axis_angle_to_rotation(&v)).unwrap();
            assert!((back.0 - v.0).norm() < 1e-10, "{v:?} -> {back:?}");
        }
    }

    #[test]
    fn angle_pi_axis_sign_is_deterministic() {
        let axes = [
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(-1.0, 0.0, 0.0),
            Vector3::new(0.3, -0.9, 0.1),
            Vector3::new(-0.2, 0.5, -0.8),
        ];
        for axis in axes {
            let axis = axis.normalize();
            let r = axis_angle_to_rotation(&AxisAngle(axis * PI));
            let v = rotation_to_axis_angle(&r).unwrap();
            assert!((v.angle() - PI).abs() < 1e-9);
            assert!(largest_component(&v.0) > 0.0, "{v:?}");
            let rebuilt = axis_angle_to_rotation(&v);
            assert!((rebuilt.matrix() - r.matrix()).abs().max() < 1e-9);
        }
    }

    #[test]
    fn rejects_non_rotations() {
        let scaled = Rotation3::from_matrix_unchecked(Matrix3::identity() * 2.0);
        assert!(matches!(rotation_to_axis_angle(&scaled), Err(Error::NotARotation(_))));
        let reflection = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(Rotation3::from_matrix(reflection, 1e-6).is_err());
    }

    #[test]
    fn apply_and_group_operations() {
        let p = Point3::new(0.3, -1.2, 2.0);
        assert_eq!(RigidTransform::identity().apply(&p), p);
        let shift = RigidTransform::from_translation(Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(shift.apply(&Point3::zeros()), Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(RigidTransform::identity().inverse(), RigidTransform::identity());

        for seed in 0..50 {
            let t = random_transform(seed);
            assert_eq!(t.compose(&RigidTransform::identity()), t);
            let round = t.compose(&t.inverse()).apply(&p);
            assert!((round - p).norm() < 1e-12);
            let id = t.inverse().compose(&t);
            assert!((id.to_homogeneous() - Matrix4::identity()).abs().max() < 1e-12);
            let q = Point3::new(-0.5, 0.25, 4.0);
            let other = random_transform(seed + 1000);
            let lhs = t.compose(&other).apply(&q);
            let rhs = t.apply(&other.apply(&q));
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn homogeneous_round_trip() {
        let t = random_transform(5);
        let back = RigidTransform::from_homogeneous(&t.to_homogeneous(), 1e-9).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn sampled_components_stay_in_interval() {
        for seed in 0..500 {
            let small = sample_rotation_vector(RotationMagnitude::Small, seed);
            assert!(small.0.iter().all(|c| (-PI / 8.0..PI / 8.0).contains(c)));
            let large = sample_rotation_vector(RotationMagnitude::Large, seed);
            assert!(large.0.iter().all(|c| (-PI / 2.0..PI / 2.0).contains(c)));
        }
        assert_eq!(
            sample_rotation_vector(RotationMagnitude::Large, 42),
            sample_rotation_vector(RotationMagnitude::Large, 42)
        );
    }

    #[test]
    fn accuracy_examples() {
        let r = axis_angle_to_rotation(&AxisAngle::new(0.1, 0.2, 0.3));
        assert!(rotation_accuracy(&r, &r) < 1e-15);
        let flip = Rotation3::from_matrix(Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0)), 1e-12).unwrap();
        assert_relative_eq!(rotation_accuracy(&Rotation3::identity(), &flip), 8f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn accuracy_matches_elementwise_sum() {
        let mut rng = seeded_rng(3);
        for _ in 0..200 {
            let a = axis_angle_to_rotation(&RotationMagnitude::Large.sample(&mut rng));
            let b = axis_angle_to_rotation(&RotationMagnitude::Large.sample(&mut rng));
            let (ga, gb) = (a.matrix(), b.matrix());
            let mut sum = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    let mut prod = 0.0;
                    for l in 0..3 {
                        prod += gb[(i, l)] * ga[(j, l)];
                    }
                    let id = if i == j { 1.0 } else { 0.0 };
                    sum += (id - prod) * (id - prod);
                }
            }
            assert!((rotation_accuracy(&a, &b) - sum.sqrt()).abs() < 1e-12);
        }
    }

    fn arb_axis_angle(max: f64) -> impl Strategy<Value = AxisAngle> {
        (-max..max, -max..max, -max..max).prop_map(|(x, y, z)| AxisAngle::new(x, y, z))
    }

    proptest! {
        #[test]
        fn rodrigues_round_trip(v in arb_axis_angle(1.8)) {
            let n = v.angle();
            prop_assume!(n > 1e-9 && n < PI - 1e-6);
            let back = rotation_to_axis_angle(&axis_angle_to_rotation(&v)).unwrap();
            prop_assert!((back.0 - v.0).norm() < 1e-9);
        }

        #[test]
        fn produced_rotations_are_proper(v in arb_axis_angle(4.0)) {
            let (gram, det) = axis_angle_to_rotation(&v).orthonormality_error();
            prop_assert!(gram < 1e-9 && det < 1e-9);
        }

        #[test]
        fn accuracy_symmetric_and_left_invariant(
            a in arb_axis_angle(1.5), b in arb_axis_angle(1.5), q in arb_axis_angle(1.5)
        ) {
            let (ra, rb, rq) = (
                axis_angle_to_rotation(&a),
                axis_angle_to_rotation(&b),
                axis_angle_to_rotation(&q),
            );
            let base = rotation_accuracy(&ra, &rb);
            prop_assert!((base - rotation_accuracy(&rb, &ra)).abs() < 1e-12);
            let shifted = rotation_accuracy(&rq.compose(&ra), &rq.compose(&rb));
            prop_assert!((base - shifted).abs() < 1e-12);
        }
    }
}
