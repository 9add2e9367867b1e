//! Rotation-group primitives.
//!
//! Rotations are stored as plain 3×3 matrices wrapped in [`Rotation`]; the
//! wrapper only guarantees membership in SO(3) for values built through the
//! checked constructors or the group operations here.

use std::ops::Mul;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used by `vee` to accept roundoff in skew-symmetric input.
pub const SKEW_TOLERANCE: f64 = 1e-9;

/// Tolerance on `‖x‖ − 1` accepted by the quaternion conversion.
pub const QUATERNION_TOLERANCE: f64 = 1e-9;

/// Tolerance on orthonormality and determinant when validating external input.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

const EXP_SERIES_THRESHOLD: f64 = 1e-8;

/// An element of SO(3).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Validates `m` against [`ROTATION_TOLERANCE`].
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        let defect = rotation_defect(&m);
        if defect.is_finite() && defect <= ROTATION_TOLERANCE {
            Ok(Rotation(m))
        } else {
            Err(Error::NotARotation { defect })
        }
    }

    /// Wraps `m` without checking. Callers must guarantee `m ∈ SO(3)`.
    pub fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Rotation(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Matrix3<f64> {
        self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    pub fn column(&self, i: usize) -> Vector3<f64> {
        self.0.column(i).into_owned()
    }

    /// Largest deviation from orthonormality or unit determinant.
    pub fn defect(&self) -> f64 {
        rotation_defect(&self.0)
    }

    /// Row-major entries.
    pub fn to_row_major(&self) -> [f64; 9] {
        row_major(&self.0)
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<&Rotation> for &Rotation {
    type Output = Rotation;
    fn mul(self, rhs: &Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<Vector3<f64>> for Rotation {
    type Output = Vector3<f64>;
    fn mul(self, rhs: Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

fn rotation_defect(m: &Matrix3<f64>) -> f64 {
    let ortho = (m.transpose() * m - Matrix3::identity()).amax();
    let det = (m.determinant() - 1.0).abs();
    if ortho.is_nan() || det.is_nan() {
        f64::NAN
    } else {
        ortho.max(det)
    }
}

pub fn row_major(m: &Matrix3<f64>) -> [f64; 9] {
    [
        m[(0, 0)],
        m[(0, 1)],
        m[(0, 2)],
        m[(1, 0)],
        m[(1, 1)],
        m[(1, 2)],
        m[(2, 0)],
        m[(2, 1)],
        m[(2, 2)],
    ]
}

pub fn from_row_major(e: &[f64; 9]) -> Matrix3<f64> {
    Matrix3::from_row_slice(e)
}

/// Maps `v` to the skew matrix with `hat(v) * y = v × y`.
pub fn hat(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`]. Input with a skew defect up to [`SKEW_TOLERANCE`] is
/// symmetrized first; anything larger is rejected.
pub fn vee(a: &Matrix3<f64>) -> Result<Vector3<f64>> {
    let defect = (a + a.transpose()).amax();
    if !(defect <= SKEW_TOLERANCE) {
        return Err(Error::NotSkewSymmetric { defect });
    }
    let k = (a - a.transpose()) * 0.5;
    Ok(Vector3::new(k[(2, 1)], k[(0, 2)], k[(1, 0)]))
}

/// Rodrigues' formula, with a second-order series near the identity.
pub fn exp_so3(v: &Vector3<f64>) -> Rotation {
    let theta = v.norm();
    let k = hat(v);
    let (a, b) = if theta < EXP_SERIES_THRESHOLD {
        (1.0 - theta * theta / 6.0, 0.5 - theta * theta / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / (theta * theta))
    };
    Rotation(Matrix3::identity() + k * a + k * k * b)
}

/// A unit quaternion `x = (q, q4)` with vector part `q` and scalar part `q4`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitQuaternion {
    vector: Vector3<f64>,
    scalar: f64,
}

impl UnitQuaternion {
    pub fn new(vector: Vector3<f64>, scalar: f64) -> Result<Self> {
        let norm = (vector.norm_squared() + scalar * scalar).sqrt();
        if !((norm - 1.0).abs() <= QUATERNION_TOLERANCE) {
            return Err(Error::NonUnitQuaternion { norm });
        }
        Ok(UnitQuaternion { vector, scalar })
    }

    pub fn vector(&self) -> &Vector3<f64> {
        &self.vector
    }

    pub fn scalar(&self) -> f64 {
        self.scalar
    }

    /// `Q(x) = (q4² − qᵀq) I + 2 q qᵀ + 2 q4 hat(q)`.
    pub fn to_rotation(&self) -> Rotation {
        let q = &self.vector;
        let q4 = self.scalar;
        Rotation(
            Matrix3::identity() * (q4 * q4 - q.norm_squared())
                + q * q.transpose() * 2.0
                + hat(q) * (2.0 * q4),
        )
    }
}

/// Converts `x = [q1, q2, q3, q4]` (scalar last) to a rotation matrix.
pub fn quat_to_rotation(x: [f64; 4]) -> Result<Rotation> {
    Ok(UnitQuaternion::new(Vector3::new(x[0], x[1], x[2]), x[3])?.to_rotation())
}

/// `F = U·diag(S)·Vᵀ` with `U, V ∈ SO(3)` and `s1 ≥ s2 ≥ s3 ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProperSvd {
    pub u: Rotation,
    pub s: Vector3<f64>,
    pub v: Rotation,
}

impl ProperSvd {
    pub fn reconstruct(&self) -> Matrix3<f64> {
        self.u.matrix() * Matrix3::from_diagonal(&self.s) * self.v.matrix().transpose()
    }

    /// The polar factor `U·Vᵀ`.
    pub fn polar(&self) -> Rotation {
        self.u * self.v.transpose()
    }
}

/// Proper singular value decomposition of a matrix with positive determinant.
pub fn proper_svd(f: &Matrix3<f64>) -> Result<ProperSvd> {
    let det = f.determinant();
    if !(det > 0.0) {
        return Err(Error::NonPositiveDeterminant { det });
    }
    let (mut u, s, mut v) = raw_svd(f);
    if s[0] == 0.0 || s[2] <= s[0] * 1e-15 {
        return Err(Error::RankDeficient { smallest: s[2] });
    }
    // det U · det V = sign(det F) = +1, so both flip together.
    if u.determinant() < 0.0 {
        u = -u;
        v = -v;
    }
    Ok(ProperSvd {
        u: Rotation(u),
        s,
        v: Rotation(v),
    })
}

/// Signed variant of [`proper_svd`] for any finite `F`: `U, V ∈ SO(3)` and
/// `s1 ≥ s2 ≥ |s3|`, with `s3` carrying the sign of `det F`.
pub fn signed_svd(f: &Matrix3<f64>) -> Result<ProperSvd> {
    if !f.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let (mut u, mut s, mut v) = raw_svd(f);
    if u.determinant() < 0.0 {
        let c = -u.column(2);
        u.set_column(2, &c);
        s[2] = -s[2];
    }
    if v.determinant() < 0.0 {
        let c = -v.column(2);
        v.set_column(2, &c);
        s[2] = -s[2];
    }
    Ok(ProperSvd {
        u: Rotation(u),
        s,
        v: Rotation(v),
    })
}

/// Orthogonal factors and descending singular values; ties keep column order.
///
/// One-sided Jacobi: rotate column pairs of `F·V` until they are orthogonal.
/// Accurate to rounding even when singular values nearly coincide.
pub(crate) fn raw_svd(f: &Matrix3<f64>) -> (Matrix3<f64>, Vector3<f64>, Matrix3<f64>) {
    let mut a = *f;
    let mut v = Matrix3::identity();
    for _ in 0..JACOBI_SWEEPS {
        let mut rotated = false;
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let alpha = a.column(p).norm_squared();
            let beta = a.column(q).norm_squared();
            let gamma = a.column(p).dot(&a.column(q));
            if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                continue;
            }
            rotated = true;
            let zeta = (beta - alpha) / (2.0 * gamma);
            let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
            let c = 1.0 / (1.0 + t * t).sqrt();
            let s = c * t;
            for m in [&mut a, &mut v] {
                let cp = m.column(p).into_owned();
                let cq = m.column(q).into_owned();
                m.set_column(p, &(cp * c - cq * s));
                m.set_column(q, &(cp * s + cq * c));
            }
        }
        if !rotated {
            break;
        }
    }

    let norms = Vector3::new(a.column(0).norm(), a.column(1).norm(), a.column(2).norm());
    let mut order = [0usize, 1, 2];
    order.sort_by(|&x, &y| norms[y].partial_cmp(&norms[x]).unwrap_or(std::cmp::Ordering::Equal));

    let mut vs = Matrix3::zeros();
    let mut ss = Vector3::zeros();
    let mut cols = [Vector3::zeros(); 3];
    for (dst, &src) in order.iter().enumerate() {
        vs.set_column(dst, &v.column(src));
        ss[dst] = norms[src];
        cols[dst] = a.column(src).into_owned();
    }

    // Columns with vanishing norm carry no direction; complete the basis.
    let u1 = if ss[0] > 0.0 { cols[0] / ss[0] } else { Vector3::x() };
    let mut u2 = cols[1] - u1 * u1.dot(&cols[1]);
    if u2.norm() <= f64::EPSILON * ss[0] || u2.norm() == 0.0 {
        u2 = u1.cross(&if u1.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() });
    }
    let u2 = u2.normalize();
    let w = u1.cross(&u2);
    let u3 = if cols[2].dot(&w) < 0.0 { -w } else { w };
    (Matrix3::from_columns(&[u1, u2, u3]), ss, vs)
}

const JACOBI_SWEEPS: usize = 60;

/// Geodesic distance between two attitudes in degrees, in `[0, 180]`.
pub fn attitude_error_deg(r1: &Rotation, r2: &Rotation) -> f64 {
    let c = ((r1.matrix().transpose() * r2.matrix()).trace() - 1.0) / 2.0;
    c.clamp(-1.0, 1.0).acos().to_degrees()
}

/// Haar-uniform rotation from a uniform point on the 3-sphere.
pub fn random_rotation_uniform<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
    loop {
        let x: [f64; 4] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let n = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        if n > 1e-12 {
            let q = Vector3::new(x[0], x[1], x[2]) / n;
            return UnitQuaternion {
                vector: q,
                scalar: x[3] / n,
            }
            .to_rotation();
        }
    }
}

/// Rotation by `angle` radians about coordinate axis `i`.
pub fn axis_rotation(i: usize, angle: f64) -> Rotation {
    let mut v = Vector3::zeros();
    v[i] = angle;
    exp_so3(&v)
}
