//! SE(3) / SO(3) primitives.
//!
//! Poses are stored as a rotation matrix plus a translation. Tangent vectors
//! are ordered `[omega; v]` (rotation first), which is also the ordering of
//! every 6×6 covariance in the crate. Perturbations are applied on the right:
//! `retract(x, xi) = x · exp(xi)`.

use std::f64::consts::PI;
use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Rotation3, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};

/// Below this rotation angle the exponential and logarithm switch to series.
pub const SMALL_ANGLE: f64 = 1e-8;

const ORTHO_DRIFT: f64 = 1e-9;

/// Rigid transform: `x ↦ R·x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

/// Element of the Lie algebra se(3).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Twist {
    pub omega: Vector3<f64>,
    pub v: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Twist {
    pub fn new(omega: Vector3<f64>, v: Vector3<f64>) -> Self {
        Self { omega, v }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn from_vector(x: &Vector6<f64>) -> Self {
        Self {
            omega: Vector3::new(x[0], x[1], x[2]),
            v: Vector3::new(x[3], x[4], x[5]),
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.omega.x,
            self.omega.y,
            self.omega.z,
            self.v.x,
            self.v.y,
            self.v.z,
        )
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().norm()
    }

    pub fn is_finite(&self) -> bool {
        self.omega.iter().chain(self.v.iter()).all(|x| x.is_finite())
    }
}

/// Skew-symmetric matrix such that `hat(a) * b == a.cross(b)`.
pub fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Inverse of [`hat`] applied to the skew part of `m`.
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// `(1 - cos t) / t²` without cancellation.
fn one_minus_cos_over_sq(t: f64) -> f64 {
    let h = 0.5 * t;
    let s = h.sin() / h;
    0.5 * s * s
}

/// `(t - sin t) / t³`.
fn t_minus_sin_over_cube(t: f64) -> f64 {
    if t < 1e-3 {
        let t2 = t * t;
        1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0
    } else {
        (t - t.sin()) / (t * t * t)
    }
}

/// SO(3) exponential, returned together with the left Jacobian used for the
/// translation block.
fn so3_exp_with_jacobian(omega: &Vector3<f64>) -> (Matrix3<f64>, Matrix3<f64>) {
    let theta = omega.norm();
    let w = hat(omega);
    let w2 = w * w;
    let eye = Matrix3::identity();
    if theta < SMALL_ANGLE {
        let r = eye + w + 0.5 * w2;
        let j = eye + 0.5 * w + w2 / 6.0;
        (r, j)
    } else {
        let a = theta.sin() / theta;
        let b = one_minus_cos_over_sq(theta);
        let c = t_minus_sin_over_cube(theta);
        (eye + a * w + b * w2, eye + b * w + c * w2)
    }
}

/// SO(3) logarithm with `‖ω‖ ≤ π`.
pub fn so3_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let s = vee(r);
    let sin_t = s.norm();
    let cos_t = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = sin_t.atan2(cos_t);

    if theta < SMALL_ANGLE {
        // R ≈ I + W + W²/2, so the skew part is ω to second order
        return s * (1.0 + theta * theta / 6.0);
    }
    if PI - theta < 1e-3 {
        // sin θ is too small to recover the axis from the skew part;
        // use the symmetric part instead: (R+Rᵀ)/2 = cos θ·I + (1-cos θ)·nnᵀ
        let sym = 0.5 * (r + r.transpose());
        let nn = (sym - Matrix3::identity() * cos_t) / (1.0 - cos_t);
        let mut k = 0;
        for i in 1..3 {
            if nn[(i, i)] > nn[(k, k)] {
                k = i;
            }
        }
        let mut n = nn.column(k).into_owned();
        n /= n.norm();
        if n.dot(&s) < 0.0 {
            n = -n;
        }
        return n * theta;
    }
    s * (theta / sin_t)
}

/// Inverse of the SO(3) left Jacobian.
fn so3_left_jacobian_inv(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta = omega.norm();
    let w = hat(omega);
    let w2 = w * w;
    let d = if theta < 1e-3 {
        let t2 = theta * theta;
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    } else {
        let half = 0.5 * theta;
        // 1 - θ sinθ / (2(1 - cosθ)) = 1 - (θ/2)·cot(θ/2)
        (1.0 - half * half.cos() / half.sin()) / (theta * theta)
    };
    Matrix3::identity() - 0.5 * w + d * w2
}

/// SE(3) exponential map.
pub fn exp_se3(xi: &Twist) -> Pose {
    let (r, j) = so3_exp_with_jacobian(&xi.omega);
    Pose {
        rotation: r,
        translation: j * xi.v,
    }
}

/// SE(3) logarithm map; inverse of [`exp_se3`] with `‖omega‖ ≤ π`.
pub fn log_se3(p: &Pose) -> Twist {
    let omega = so3_log(&p.rotation);
    let v = so3_left_jacobian_inv(&omega) * p.translation;
    Twist { omega, v }
}

/// Right retraction `base · exp(xi)`.
pub fn retract(base: &Pose, xi: &Twist) -> Pose {
    base.compose(&exp_se3(xi))
}

/// Inverse of [`retract`]: the twist taking `base` to `target`.
pub fn inv_retract(base: &Pose, target: &Pose) -> Twist {
    log_se3(&base.inverse().compose(target))
}

fn orthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut out = u * v_t;
    if out.determinant() < 0.0 {
        let mut u = u;
        u.column_mut(2).neg_mut();
        out = u * v_t;
    }
    out
}

fn ortho_drift(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).abs().max()
}

impl Pose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    /// Rotation of `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let n = axis.normalize();
        exp_se3(&Twist::new(n * angle, Vector3::zeros()))
    }

    /// Planar pose: yaw about world z then translation.
    pub fn planar(x: f64, y: f64, z: f64, yaw: f64) -> Self {
        let mut p = Self::from_axis_angle(&Vector3::z(), yaw);
        p.translation = Vector3::new(x, y, z);
        p
    }

    /// Rotation of `angle` about the line through `pivot` with direction `axis`.
    pub fn rotation_about(pivot: &Vector3<f64>, axis: &Vector3<f64>, angle: f64) -> Self {
        let r = Self::from_axis_angle(axis, angle).rotation;
        Self {
            rotation: r,
            translation: pivot - r * pivot,
        }
    }

    pub fn from_quaternion_wxyz(t: Vector3<f64>, q: [f64; 4]) -> Self {
        let uq = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(q[0], q[1], q[2], q[3]));
        Self {
            rotation: *uq.to_rotation_matrix().matrix(),
            translation: t,
        }
    }

    /// Unit quaternion `(w, x, y, z)` with `w ≥ 0`.
    pub fn quaternion_wxyz(&self) -> [f64; 4] {
        let rot = Rotation3::from_matrix_unchecked(self.rotation);
        let q = UnitQuaternion::from_rotation_matrix(&rot);
        let q = q.quaternion();
        let sign = if q.w < 0.0 { -1.0 } else { 1.0 };
        [sign * q.w, sign * q.i, sign * q.j, sign * q.k]
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_homogeneous(m: &Matrix4<f64>) -> Self {
        Self {
            rotation: m.fixed_view::<3, 3>(0, 0).into_owned(),
            translation: m.fixed_view::<3, 1>(0, 3).into_owned(),
        }
    }

    /// `self · other`, re-orthonormalizing the rotation if it has drifted.
    pub fn compose(&self, other: &Pose) -> Pose {
        let mut rotation = self.rotation * other.rotation;
        if ortho_drift(&rotation) > ORTHO_DRIFT {
            rotation = orthonormalize(&rotation);
        }
        Pose {
            rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn apply(&self, point: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * point + self.translation
    }

    /// Checks the rotation block is orthonormal with determinant +1.
    pub fn is_valid(&self, tol: f64) -> bool {
        ortho_drift(&self.rotation) <= tol
            && (self.rotation.determinant() - 1.0).abs() <= tol
            && self.translation.iter().all(|x| x.is_finite())
    }

    /// Rotation angle in radians.
    pub fn angle(&self) -> f64 {
        so3_log(&self.rotation).norm()
    }

    /// Heading of the body x-axis projected onto the world xy-plane.
    pub fn yaw(&self) -> f64 {
        self.rotation[(1, 0)].atan2(self.rotation[(0, 0)])
    }
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, rhs: Pose) -> Pose {
        self.compose(&rhs)
    }
}

impl Mul<&Pose> for &Pose {
    type Output = Pose;
    fn mul(self, rhs: &Pose) -> Pose {
        self.compose(rhs)
    }
}

/// Serialized pose: translation plus unit quaternion `(w, x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub t: [f64; 3],
    pub q: [f64; 4],
}

impl From<&Pose> for PoseRecord {
    fn from(p: &Pose) -> Self {
        PoseRecord {
            t: [p.translation.x, p.translation.y, p.translation.z],
            q: p.quaternion_wxyz(),
        }
    }
}

impl From<&PoseRecord> for Pose {
    fn from(r: &PoseRecord) -> Self {
        Pose::from_quaternion_wxyz(Vector3::new(r.t[0], r.t[1], r.t[2]), r.q)
    }
}

impl Serialize for Pose {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PoseRecord::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Pose {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = PoseRecord::deserialize(d)?;
        Ok(Pose::from(&r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_twist(rng: &mut ChaCha8Rng, max_angle: f64) -> Twist {
        let axis = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
        .normalize();
        let angle = rng.random_range(0.0..max_angle);
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        Twist::new(axis * angle, v)
    }

    /// Truncated power series of the 4×4 twist matrix.
    fn expm_series(xi: &Twist) -> Matrix4<f64> {
        let mut a = Matrix4::zeros();
        a.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat(&xi.omega));
        a.fixed_view_mut::<3, 1>(0, 3).copy_from(&xi.v);
        let mut term = Matrix4::identity();
        let mut sum = Matrix4::identity();
        for k in 1..40 {
            term = term * a / k as f64;
            sum += term;
        }
        sum
    }

    #[test]
    fn exp_identity_and_translation() {
        let p = exp_se3(&Twist::zero());
        assert_eq!(p, Pose::identity());
        let p = exp_se3(&Twist::new(Vector3::zeros(), Vector3::new(1.0, 2.0, 3.0)));
        assert_eq!(p.rotation, Matrix3::identity());
        assert_eq!(p.translation, Vector3::new(1.0, 2.0, 3.0));
    }

    #[test]
    fn exp_quarter_turn_matches_series() {
        let xi = Twist::new(Vector3::new(0.0, 0.0, PI / 2.0), Vector3::zeros());
        let p = exp_se3(&xi);
        let oracle = expm_series(&xi);
        assert!((p.to_homogeneous() - oracle).abs().max() < 1e-12);
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((p.rotation - expected).abs().max() < 1e-12);
    }

    #[test]
    fn exp_matches_series_on_random_twists() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let xi = random_twist(&mut rng, 3.0);
            let err = (exp_se3(&xi).to_homogeneous() - expm_series(&xi)).abs().max();
            assert!(err < 1e-10, "{err}");
        }
    }

    #[test]
    fn log_trivial_cases() {
        assert_eq!(log_se3(&Pose::identity()), Twist::zero());
        let t = log_se3(&Pose::from_translation(Vector3::new(1.0, 2.0, 3.0)));
        assert_eq!(t.omega, Vector3::zeros());
        assert!((t.v - Vector3::new(1.0, 2.0, 3.0)).norm() < 1e-15);
    }

    #[test]
    fn log_exp_roundtrip_1000() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let xi = random_twist(&mut rng, PI - 0.1);
            let back = log_se3(&exp_se3(&xi));
            assert!((back.to_vector() - xi.to_vector()).norm() < 1e-9);
        }
    }

    #[test]
    fn log_tiny_and_near_pi() {
        for angle in [1e-12, 1e-9, 1e-7, 1e-5, 1e-3] {
            let xi = Twist::new(Vector3::new(0.3, -0.5, 0.8).normalize() * angle, Vector3::new(0.1, 0.2, 0.3));
            let back = log_se3(&exp_se3(&xi));
            assert!((back.to_vector() - xi.to_vector()).norm() < 1e-12, "{angle}");
        }
        for gap in [1e-2, 1e-4, 1e-7] {
            let omega = Vector3::new(1.0, 2.0, -0.5).normalize() * (PI - gap);
            let back = so3_log(&exp_se3(&Twist::new(omega, Vector3::zeros())).rotation);
            assert!((back - omega).norm() < 1e-6, "{gap}: {back:?}");
            assert!(back.norm() <= PI + 1e-12);
        }
    }

    #[test]
    fn compose_inverse_and_apply() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = exp_se3(&random_twist(&mut rng, 3.0));
        let b = exp_se3(&random_twist(&mut rng, 3.0));
        assert_eq!(a.compose(&Pose::identity()), a);
        let id = a.compose(&a.inverse());
        assert!((id.to_homogeneous() - Matrix4::identity()).abs().max() < 1e-9);
        let oracle = a.to_homogeneous() * b.to_homogeneous();
        assert!((a.compose(&b).to_homogeneous() - oracle).abs().max() < 1e-12);

        assert_eq!(Pose::identity().apply(&Vector3::new(1.0, 1.0, 1.0)), Vector3::new(1.0, 1.0, 1.0));
        let shift = Pose::from_translation(Vector3::x());
        assert_eq!(shift.apply(&Vector3::zeros()), Vector3::x());
        for _ in 0..100 {
            let x = Vector3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let h = a.to_homogeneous() * x.push(1.0);
            assert!((a.apply(&x) - h.xyz()).norm() < 1e-12);
        }
    }

    #[test]
    fn retract_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let base = exp_se3(&random_twist(&mut rng, 2.0));
        assert_eq!(retract(&base, &Twist::zero()), base);
        assert!(inv_retract(&base, &base).norm() < 1e-12);
        for _ in 0..100 {
            let xi = random_twist(&mut rng, 2.5);
            let back = inv_retract(&base, &retract(&base, &xi));
            assert!((back.to_vector() - xi.to_vector()).norm() < 1e-9);
        }
    }

    #[test]
    fn compose_repairs_drift() {
        let mut r = Pose::from_axis_angle(&Vector3::new(1.0, 1.0, 0.0), 0.7);
        r.rotation[(0, 0)] += 1e-6;
        let out = r.compose(&Pose::identity());
        assert!(out.is_valid(1e-12));
    }

    #[test]
    fn quaternion_roundtrip() {
        let p = Pose::planar(0.1, 0.2, 0.3, 2.0);
        let q = p.quaternion_wxyz();
        let back = Pose::from_quaternion_wxyz(p.translation, q);
        assert!((back.rotation - p.rotation).abs().max() < 1e-12);
        assert!((p.yaw() - 2.0).abs() < 1e-12);
    }
}
