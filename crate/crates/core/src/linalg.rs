//! Fixed-size 3×3 decompositions.
//!
//! Both routines use cyclic Jacobi rotations on a symmetric matrix; the SVD
//! diagonalizes `HᵀH` and then recovers `U` by orthogonalizing the columns of
//! `H·V`, which keeps `U` orthonormal even when `H` is rank deficient.

use nalgebra::{Matrix3, Vector3};

/// Off-diagonal Frobenius norm, relative to the full norm, at which sweeps stop.
pub const JACOBI_TOL: f64 = 1e-14;
pub const JACOBI_MAX_SWEEPS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetricEigen3 {
    /// Eigenvalues, descending.
    pub values: Vector3<f64>,
    /// Column `i` is the unit eigenvector of `values[i]`.
    pub vectors: Matrix3<f64>,
    pub sweeps: usize,
}

/// Eigen-decomposition of a symmetric 3×3 matrix. Only the upper triangle is read.
pub fn symmetric_eigen3(m: &Matrix3<f64>) -> SymmetricEigen3 {
    let mut a =
        Matrix3::new(m[(0, 0)], m[(0, 1)], m[(0, 2)], m[(0, 1)], m[(1, 1)], m[(1, 2)], m[(0, 2)], m[(1, 2)], m[(2, 2)]);
    let mut v = Matrix3::identity();
    let scale = a.norm();
    let mut sweeps = 0;

    while sweeps < JACOBI_MAX_SWEEPS {
        let off = (a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2)).sqrt();
        if off <= JACOBI_TOL * scale || off == 0.0 {
            break;
        }
        sweeps += 1;
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let apq = a[(p, q)];
            if apq == 0.0 {
                continue;
            }
            let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
            let t = if theta.abs() > 1e150 {
                0.5 / theta
            } else {
                theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
            };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            rotate(&mut a, &mut v, p, q, c, s);
        }
    }

    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| a[(j, j)].total_cmp(&a[(i, i)]).then(i.cmp(&j)));
    let values = Vector3::new(a[(order[0], order[0])], a[(order[1], order[1])], a[(order[2], order[2])]);
    let vectors = Matrix3::from_columns(&[
        v.column(order[0]).into_owned(),
        v.column(order[1]).into_owned(),
        v.column(order[2]).into_owned(),
    ]);
    SymmetricEigen3 { values, vectors, sweeps }
}

/// Applies the Jacobi rotation `J(p, q, c, s)`: `a ← Jᵀ·a·J`, `v ← v·J`.
fn rotate(a: &mut Matrix3<f64>, v: &mut Matrix3<f64>, p: usize, q: usize, c: f64, s: f64) {
    for k in 0..3 {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..3 {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    // Exact zero keeps later sweeps from revisiting round-off.
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    for k in 0..3 {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// `H = U·diag(σ)·Vᵀ` with `σ` nonnegative and descending.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvdResult {
    pub u: Matrix3<f64>,
    pub singular_values: Vector3<f64>,
    pub v: Matrix3<f64>,
    pub det_u: f64,
    pub det_v: f64,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Matrix3<f64> {
        self.u * Matrix3::from_diagonal(&self.singular_values) * self.v.transpose()
    }
}

/// Relative size below which a Gram-Schmidt residual counts as zero.
const RANK_TOL: f64 = 1e-13;

pub fn svd3(h: &Matrix3<f64>) -> SvdResult {
    let eig = symmetric_eigen3(&(h.transpose() * h));
    let v = eig.vectors;
    let b = h * v;
    let (b0, b1, b2) = (b.column(0).into_owned(), b.column(1).into_owned(), b.column(2).into_owned());

    let n0 = b0.norm();
    let mut sigma = Vector3::zeros();
    let (u0, u1) = if n0 == 0.0 {
        (Vector3::x(), Vector3::y())
    } else {
        let u0 = b0 / n0;
        sigma[0] = n0;
        let mut r = b1 - u0 * u0.dot(&b1);
        r -= u0 * u0.dot(&r);
        // A residual at rounding level of `b0` carries no direction.
        let n1 = r.norm();
        let mut u1 = if n1 > RANK_TOL * n0 { r / n1 } else { any_orthogonal(&u0) };
        sigma[1] = u1.dot(&b1);
        if sigma[1] < 0.0 {
            u1 = -u1;
            sigma[1] = -sigma[1];
        }
        (u0, u1)
    };
    let mut u2 = u0.cross(&u1);
    u2 /= u2.norm();
    sigma[2] = u2.dot(&b2);
    if sigma[2] < 0.0 {
        u2 = -u2;
        sigma[2] = -sigma[2];
    }
    let mut u = Matrix3::from_columns(&[u0, u1, u2]);
    let mut v = v;

    // Round-off can swap nearly equal values; keep the (σ, u, v) triples sorted.
    for i in 0..2 {
        for j in 0..2 - i {
            if sigma[j] < sigma[j + 1] {
                sigma.swap_rows(j, j + 1);
                u.swap_columns(j, j + 1);
                v.swap_columns(j, j + 1);
            }
        }
    }

    SvdResult { det_u: u.determinant(), det_v: v.determinant(), u, singular_values: sigma, v }
}

fn any_orthogonal(u: &Vector3<f64>) -> Vector3<f64> {
    let axis = u.iamin();
    let mut e = Vector3::zeros();
    e[axis] = 1.0;
    let r = e - u * u.dot(&e);
    r / r.norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded_rng;
    use rand::Rng;

    fn random_matrix(rng: &mut impl Rng) -> Matrix3<f64> {
        Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0))
    }

    fn orthonormality(m: &Matrix3<f64>) -> f64 {
        (m.transpose() * m - Matrix3::identity()).abs().max()
    }

    #[test]
    fn identity_and_diagonal() {
        let s = svd3(&Matrix3::identity());
        assert_eq!(s.singular_values, Vector3::new(1.0, 1.0, 1.0));
        let d = Matrix3::from_diagonal(&Vector3::new(3.0, 2.0, 1.0));
        let s = svd3(&d);
        assert_eq!(s.singular_values, Vector3::new(3.0, 2.0, 1.0));
        for i in 0..3 {
            // Columns are ± the unit axes, with matching signs in U and V.
            assert!((s.u[(i, i)].abs() - 1.0).abs() < 1e-15);
            assert_eq!(s.u[(i, i)], s.v[(i, i)]);
        }
    }

    #[test]
    fn zero_matrix() {
        let s = svd3(&Matrix3::zeros());
        assert_eq!(s.singular_values, Vector3::zeros());
        assert_eq!(s.u, Matrix3::identity());
        assert_eq!(s.v, Matrix3::identity());
    }

    #[test]
    fn rank_one_and_two() {
        let a = Vector3::new(1.0, 2.0, -0.5);
        let b = Vector3::new(-0.3, 0.7, 0.2);
        let c = Vector3::new(0.9, 0.1, 0.4);
        for h in [a * b.transpose(), a * b.transpose() + c * a.transpose()] {
            let s = svd3(&h);
            let err = (s.reconstruct() - h).norm();
            assert!(
                err <= 1e-14 * h.norm().max(1.0),
                "err {err:e} sv {:?} u {} v {}",
                s.singular_values,
                orthonormality(&s.u),
                orthonormality(&s.v)
            );
            assert!(orthonormality(&s.u) < 1e-14);
            assert!(orthonormality(&s.v) < 1e-14);
            assert!(s.singular_values[2].abs() < 1e-14);
        }
    }

    #[test]
    fn random_matrices_reconstruct() {
        let mut rng = seeded_rng(9);
        for _ in 0..1000 {
            let h = random_matrix(&mut rng);
            let s = svd3(&h);
            assert!((s.reconstruct() - h).norm() <= 1e-10 * h.norm().max(1.0));
            assert!(orthonormality(&s.u) <= 1e-10);
            assert!(orthonormality(&s.v) <= 1e-10);
            let sv = s.singular_values;
            assert!(sv[0] >= sv[1] && sv[1] >= sv[2] && sv[2] >= 0.0);
            assert!((s.det_u - s.u.determinant()).abs() < 1e-15);
        }
    }

    #[test]
    fn eigen_matches_definition() {
        let mut rng = seeded_rng(10);
        for _ in 0..500 {
            let x = random_matrix(&mut rng);
            let m = x + x.transpose();
            let e = symmetric_eigen3(&m);
            for i in 0..3 {
                let v = e.vectors.column(i);
                assert!((m * v - v * e.values[i]).norm() < 1e-13);
            }
            assert!(orthonormality(&e.vectors) < 1e-13);
            assert!(e.values[0] >= e.values[1] && e.values[1] >= e.values[2]);
            assert!(e.sweeps <= JACOBI_MAX_SWEEPS);
        }
    }

    #[test]
    fn repeated_eigenvalue_is_deterministic() {
        // Eigenvalues (2, 1, 1): the degenerate pair still yields a fixed basis.
        let n = Vector3::new(1.0, 1.0, 0.0).normalize();
        let m = Matrix3::identity() + n * n.transpose();
        let a = symmetric_eigen3(&m);
        let b = symmetric_eigen3(&m);
        assert_eq!(a, b);
        assert!((a.values - Vector3::new(2.0, 1.0, 1.0)).norm() < 1e-14);
    }
}
