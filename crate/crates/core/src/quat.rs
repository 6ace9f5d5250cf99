//! Quaternion algebra on `[w, x, y, z]` 4-vectors.
//!
//! Besides the Hamilton product this module provides the left/right
//! multiplication matrices `M(a)` and `W(a)`, which turn quaternion products
//! into matrix-vector products:
//!
//! ```text
//! a ⊗ b = M(a) b = W(b) a
//! ```
//!
//! Both matrices are orthogonal up to scale (`M(a)ᵀ M(a) = ‖a‖² I`), and this
//! is what makes the per-vertex subproblems of the solver small closed-form
//! quadratic programs.

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul, Neg, Sub};

pub type Vec3 = Vector3<f64>;
pub type Vec4 = Vector4<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Mat4 = Matrix4<f64>;

/// Tolerance used when accepting an already-normalized quaternion.
pub const UNIT_TOL: f64 = 1e-9;

/// `D = diag(1, -1, -1, -1)`, so that `D q = q*`.
pub fn conj_matrix() -> Mat4 {
    Mat4::from_diagonal(&Vec4::new(1.0, -1.0, -1.0, -1.0))
}

/// A general (not necessarily unit) quaternion.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const IDENTITY: Quat = Quat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };
    pub const ZERO: Quat = Quat { w: 0.0, x: 0.0, y: 0.0, z: 0.0 };

    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quat { w, x, y, z }
    }

    /// Pure quaternion `[0, v]`.
    pub fn pure(v: &Vec3) -> Self {
        Quat::new(0.0, v.x, v.y, v.z)
    }

    pub fn from_vec4(v: &Vec4) -> Self {
        Quat::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_vec4(self) -> Vec4 {
        Vec4::new(self.w, self.x, self.y, self.z)
    }

    pub fn vector(self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn conj(self) -> Self {
        Quat::new(self.w, -self.x, -self.y, -self.z)
    }

    pub fn dot(self, other: Quat) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn scale(self, s: f64) -> Self {
        Quat::new(self.w * s, self.x * s, self.y * s, self.z * s)
    }

    pub fn is_finite(self) -> bool {
        self.w.is_finite() && self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Left multiplication matrix: `self ⊗ b = M(self) b`.
    pub fn m_matrix(self) -> Mat4 {
        let Quat { w: a0, x: a1, y: a2, z: a3 } = self;
        Mat4::new(
            a0, -a1, -a2, -a3, //
            a1, a0, -a3, a2, //
            a2, a3, a0, -a1, //
            a3, -a2, a1, a0,
        )
    }

    /// Right multiplication matrix: `b ⊗ self = W(self) b`.
    pub fn w_matrix(self) -> Mat4 {
        let Quat { w: a0, x: a1, y: a2, z: a3 } = self;
        Mat4::new(
            a0, -a1, -a2, -a3, //
            a1, a0, a3, -a2, //
            a2, -a3, a0, a1, //
            a3, a2, -a1, a0,
        )
    }
}

/// Hamilton product `[a₀b₀ − a·b, a₀b + b₀a + a×b]`.
pub fn quat_mul(a: Quat, b: Quat) -> Quat {
    Quat::new(
        a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        a.w * b.x + b.w * a.x + a.y * b.z - a.z * b.y,
        a.w * b.y + b.w * a.y + a.z * b.x - a.x * b.z,
        a.w * b.z + b.w * a.z + a.x * b.y - a.y * b.x,
    )
}

pub fn quat_conj(a: Quat) -> Quat {
    a.conj()
}

pub fn m_matrix(a: Quat) -> Mat4 {
    a.m_matrix()
}

pub fn w_matrix(a: Quat) -> Mat4 {
    a.w_matrix()
}

impl Mul for Quat {
    type Output = Quat;
    fn mul(self, rhs: Quat) -> Quat {
        quat_mul(self, rhs)
    }
}

impl Add for Quat {
    type Output = Quat;
    fn add(self, rhs: Quat) -> Quat {
        Quat::new(self.w + rhs.w, self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Quat {
    type Output = Quat;
    fn sub(self, rhs: Quat) -> Quat {
        Quat::new(self.w - rhs.w, self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Neg for Quat {
    type Output = Quat;
    fn neg(self) -> Quat {
        self.scale(-1.0)
    }
}

/// A unit quaternion, i.e. a point on the 3-sphere representing a rotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "Quat", try_from = "Quat")]
pub struct UnitQuat(Quat);

impl UnitQuat {
    pub const IDENTITY: UnitQuat = UnitQuat(Quat::IDENTITY);

    /// Normalizes `q`. Returns `None` for zero or non-finite input.
    pub fn normalize(q: Quat) -> Option<Self> {
        let n = q.norm();
        if !q.is_finite() || !n.is_finite() || n <= f64::MIN_POSITIVE {
            return None;
        }
        Some(UnitQuat(q.scale(1.0 / n)))
    }

    /// Wraps `q` without rescaling; the caller guarantees `‖q‖ = 1`.
    pub fn new_unchecked(q: Quat) -> Self {
        debug_assert!((q.norm() - 1.0).abs() <= 1e-6, "not a unit quaternion: {q:?}");
        UnitQuat(q)
    }

    pub fn from_vec4(v: &Vec4) -> Option<Self> {
        Self::normalize(Quat::from_vec4(v))
    }

    /// Rotation of `angle` radians about `axis` (normalized internally).
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 {
            return Self::IDENTITY;
        }
        let a = axis / n;
        let (s, c) = (0.5 * angle).sin_cos();
        UnitQuat(Quat::new(c, s * a.x, s * a.y, s * a.z))
    }

    /// Converts a proper rotation matrix (Shepperd's method).
    pub fn from_rotation_matrix(r: &Mat3) -> Self {
        let tr = r.trace();
        let q = if tr > 0.0 {
            let s = (tr + 1.0).sqrt() * 2.0;
            Quat::new(
                0.25 * s,
                (r[(2, 1)] - r[(1, 2)]) / s,
                (r[(0, 2)] - r[(2, 0)]) / s,
                (r[(1, 0)] - r[(0, 1)]) / s,
            )
        } else if r[(0, 0)] > r[(1, 1)] && r[(0, 0)] > r[(2, 2)] {
            let s = (1.0 + r[(0, 0)] - r[(1, 1)] - r[(2, 2)]).sqrt() * 2.0;
            Quat::new(
                (r[(2, 1)] - r[(1, 2)]) / s,
                0.25 * s,
                (r[(0, 1)] + r[(1, 0)]) / s,
                (r[(0, 2)] + r[(2, 0)]) / s,
            )
        } else if r[(1, 1)] > r[(2, 2)] {
            let s = (1.0 + r[(1, 1)] - r[(0, 0)] - r[(2, 2)]).sqrt() * 2.0;
            Quat::new(
                (r[(0, 2)] - r[(2, 0)]) / s,
                (r[(0, 1)] + r[(1, 0)]) / s,
                0.25 * s,
                (r[(1, 2)] + r[(2, 1)]) / s,
            )
        } else {
            let s = (1.0 + r[(2, 2)] - r[(0, 0)] - r[(1, 1)]).sqrt() * 2.0;
            Quat::new(
                (r[(1, 0)] - r[(0, 1)]) / s,
                (r[(0, 2)] + r[(2, 0)]) / s,
                (r[(1, 2)] + r[(2, 1)]) / s,
                0.25 * s,
            )
        };
        Self::normalize(q).unwrap_or(Self::IDENTITY)
    }

    pub fn quat(self) -> Quat {
        self.0
    }

    pub fn to_vec4(self) -> Vec4 {
        self.0.to_vec4()
    }

    pub fn conj(self) -> Self {
        UnitQuat(self.0.conj())
    }

    pub fn neg(self) -> Self {
        UnitQuat(-self.0)
    }

    /// Product of two unit quaternions, renormalized against rounding drift.
    pub fn compose(self, other: UnitQuat) -> Self {
        Self::normalize(self.0 * other.0).unwrap_or(Self::IDENTITY)
    }

    /// Rotation matrix `R(q)`.
    pub fn to_rotation_matrix(self) -> Mat3 {
        let Quat { w, x, y, z } = self.0;
        Mat3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    /// Rotation angle in `[0, π]`.
    pub fn angle(self) -> f64 {
        let v = self.0.vector().norm();
        2.0 * v.atan2(self.0.w.abs())
    }
}

impl From<UnitQuat> for Quat {
    fn from(q: UnitQuat) -> Quat {
        q.0
    }
}

impl TryFrom<Quat> for UnitQuat {
    type Error = &'static str;
    fn try_from(q: Quat) -> Result<Self, Self::Error> {
        UnitQuat::normalize(q).ok_or("zero or non-finite quaternion")
    }
}

/// Imaginary part of `q ⊗ [0, v] ⊗ q*`.
pub fn rotate(q: UnitQuat, v: &Vec3) -> Vec3 {
    let q = q.quat();
    (q * Quat::pure(v) * q.conj()).vector()
}

/// Geodesic angle between the rotations encoded by `q1` and `q2`, in `[0, π]`.
pub fn dist_angle(q1: UnitQuat, q2: UnitQuat) -> f64 {
    q1.conj().compose(q2).angle()
}

/// Chordal distance `‖R₁ − R₂‖_F = 2√2 sin(θ/2)`.
pub fn dist_chordal(q1: UnitQuat, q2: UnitQuat) -> f64 {
    2.0 * std::f64::consts::SQRT_2 * (0.5 * dist_angle(q1, q2)).sin()
}

/// Quaternion distance `min(‖q₁ − q₂‖, ‖q₁ + q₂‖) = 2 sin(θ/4)`.
pub fn dist_quat(q1: UnitQuat, q2: UnitQuat) -> f64 {
    let (a, b) = (q1.quat(), q2.quat());
    (a - b).norm().min((a + b).norm())
}

/// `(I − x xᵀ) v`, the projection of `v` onto the tangent space of the sphere at `x`.
pub fn tangent_project(x: UnitQuat, v: Quat) -> Quat {
    let x = x.quat();
    v - x.scale(x.dot(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_quat(rng: &mut ChaCha8Rng) -> Quat {
        Quat::new(
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
        )
    }

    fn rand_unit(rng: &mut ChaCha8Rng) -> UnitQuat {
        UnitQuat::normalize(rand_quat(rng)).unwrap()
    }

    fn max_abs(m: &Mat4) -> f64 {
        m.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }

    #[test]
    fn identity_and_unit_table() {
        let q = Quat::new(0.3, -1.0, 2.0, 0.5);
        assert_eq!(Quat::IDENTITY * q, q);
        let i = Quat::new(0.0, 1.0, 0.0, 0.0);
        let j = Quat::new(0.0, 0.0, 1.0, 0.0);
        assert_eq!(i * j, Quat::new(0.0, 0.0, 0.0, 1.0));
        assert_eq!(j * i, Quat::new(0.0, 0.0, 0.0, -1.0));
    }

    #[test]
    fn conjugate_definition() {
        assert_eq!(quat_conj(Quat::IDENTITY), Quat::IDENTITY);
        assert_eq!(quat_conj(Quat::new(0.0, 1.0, 2.0, 3.0)), Quat::new(0.0, -1.0, -2.0, -3.0));
    }

    #[test]
    fn matrix_forms_match_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let (a, b) = (rand_quat(&mut rng), rand_quat(&mut rng));
            let ab = (a * b).to_vec4();
            assert!((m_matrix(a) * b.to_vec4() - ab).amax() <= 1e-14 * 16.0);
            assert!((w_matrix(b) * a.to_vec4() - ab).amax() <= 1e-14 * 16.0);
            let lhs = quat_conj(a * b);
            let rhs = quat_conj(b) * quat_conj(a);
            assert!((lhs - rhs).norm() <= 1e-14 * 16.0);
        }
    }

    #[test]
    fn m_and_w_conjugate_transpose_and_orthogonality() {
        assert_eq!(m_matrix(Quat::IDENTITY), Mat4::identity());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let a = rand_quat(&mut rng);
            assert_eq!(m_matrix(a.conj()), m_matrix(a).transpose());
            assert_eq!(w_matrix(a.conj()), w_matrix(a).transpose());
            let n2 = a.norm_squared();
            assert!(max_abs(&(m_matrix(a).transpose() * m_matrix(a) - Mat4::identity() * n2)) <= 1e-13);
            assert!(max_abs(&(w_matrix(a).transpose() * w_matrix(a) - Mat4::identity() * n2)) <= 1e-13);
        }
    }

    #[test]
    fn m_and_w_commute() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (a, b) = (rand_quat(&mut rng), rand_quat(&mut rng));
        let d = m_matrix(a) * w_matrix(b) - w_matrix(b) * m_matrix(a);
        assert!(max_abs(&d) < 1e-13);
    }

    #[test]
    fn rotate_examples() {
        let v = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(rotate(UnitQuat::IDENTITY, &v), v);
        let h = std::f64::consts::FRAC_PI_4;
        let qz = UnitQuat::normalize(Quat::new(h.cos(), 0.0, 0.0, h.sin())).unwrap();
        let r = rotate(qz, &Vec3::x());
        assert!((r - Vec3::y()).norm() <= 1e-12);
    }

    #[test]
    fn rotate_matches_axis_angle_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let q = rand_unit(&mut rng);
            let v = Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            // R = cosθ I + (1 − cosθ) n nᵀ + sinθ [n]×, built from the axis-angle form
            let qq = q.quat();
            let theta = 2.0 * qq.vector().norm().atan2(qq.w);
            let n = qq.vector().normalize();
            let skew = Mat3::new(0.0, -n.z, n.y, n.z, 0.0, -n.x, -n.y, n.x, 0.0);
            let r = Mat3::identity() * theta.cos() + n * n.transpose() * (1.0 - theta.cos()) + skew * theta.sin();
            assert!((rotate(q, &v) - r * v).norm() <= 1e-12);
            assert!((q.to_rotation_matrix() * v - r * v).norm() <= 1e-12);
        }
    }

    #[test]
    fn rotation_matrix_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let q = rand_unit(&mut rng);
            let back = UnitQuat::from_rotation_matrix(&q.to_rotation_matrix());
            assert!(dist_quat(q, back) <= 1e-12);
        }
    }

    #[test]
    fn distances_closed_forms() {
        let q = UnitQuat::from_axis_angle(&Vec3::new(1.0, 2.0, -1.0), 0.7);
        assert_eq!(dist_angle(q, q), 0.0);
        assert!(dist_chordal(q, q).abs() < 1e-15);
        assert_eq!(dist_quat(q, q), 0.0);

        let k = UnitQuat::normalize(Quat::new(0.0, 0.0, 0.0, 1.0)).unwrap();
        let id = UnitQuat::IDENTITY;
        assert_relative_eq!(dist_angle(id, k), std::f64::consts::PI, epsilon = 1e-12);
        assert_relative_eq!(dist_quat(id, k), 2f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(dist_chordal(id, k), 2.0 * 2f64.sqrt(), epsilon = 1e-12);
        assert_eq!(dist_quat(q, q.neg()), 0.0);
    }

    #[test]
    fn distances_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..500 {
            let (a, b) = (rand_unit(&mut rng), rand_unit(&mut rng));
            let theta = dist_angle(a, b);
            assert!((dist_chordal(a, b) - 2.0 * 2f64.sqrt() * (theta / 2.0).sin()).abs() <= 1e-12);
            assert!((dist_quat(a, b) - 2.0 * (theta / 4.0).sin()).abs() <= 1e-12);
            let fro = (a.to_rotation_matrix() - b.to_rotation_matrix()).norm();
            assert!((dist_chordal(a, b) - fro).abs() <= 1e-12);
        }
    }

    #[test]
    fn tangent_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let x = rand_unit(&mut rng);
            let v = rand_quat(&mut rng);
            assert!(x.quat().dot(tangent_project(x, v)).abs() <= 1e-13);
        }
        let x = rand_unit(&mut rng);
        assert!(tangent_project(x, x.quat().scale(3.0)).norm() < 1e-14);
        let ortho = Quat::new(-x.quat().x, x.quat().w, -x.quat().z, x.quat().y);
        assert!((tangent_project(x, ortho) - ortho).norm() < 1e-15);
    }

    #[test]
    fn normalize_rejects_zero() {
        assert!(UnitQuat::normalize(Quat::ZERO).is_none());
        assert!(UnitQuat::normalize(Quat::new(f64::NAN, 0.0, 0.0, 1.0)).is_none());
        let q = UnitQuat::normalize(Quat::new(2.0, 0.0, 0.0, 0.0)).unwrap();
        assert_eq!(q, UnitQuat::IDENTITY);
    }
}
