use nalgebra::{Matrix3, Matrix4, Rotation3, UnitQuaternion, Vector3};

use super::GeomError;

/// Angle below which closed-form trigonometric coefficients are replaced by
/// their series expansions.
const SMALL_ANGLE: f64 = 1e-8;

/// Orthogonality drift that triggers re-orthonormalization after composing.
const ORTHO_DRIFT_TOL: f64 = 1e-12;

/// Rigid transform in SE(3). The rotation is stored as an orthonormal 3x3
/// matrix; quaternions appear only at the trajectory-file boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

/// Element of se(3): `omega` is the axis-angle rotation part, `nu` the
/// translation part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Twist {
    pub omega: Vector3<f64>,
    pub nu: Vector3<f64>,
}

fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Max absolute deviation of R^T R from the identity.
fn ortho_drift(r: &Matrix3<f64>) -> f64 {
    let d = r.transpose() * r - Matrix3::identity();
    d.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// Nearest rotation matrix in the Frobenius sense (polar decomposition).
fn orthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = r.svd(true, true);
    let u = svd.u.expect("svd requested u");
    let v_t = svd.v_t.expect("svd requested v_t");
    let mut s = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        s[(2, 2)] = -1.0;
    }
    u * s * v_t
}

impl Twist {
    pub fn new(omega: Vector3<f64>, nu: Vector3<f64>) -> Self {
        Self { omega, nu }
    }

    pub fn zero() -> Self {
        Self::new(Vector3::zeros(), Vector3::zeros())
    }

    pub fn norm(&self) -> f64 {
        (self.omega.norm_squared() + self.nu.norm_squared()).sqrt()
    }

    /// Exponential map se(3) -> SE(3): Rodrigues rotation plus left-Jacobian
    /// translation. Below `SMALL_ANGLE` the trigonometric coefficients use
    /// their second-order series.
    pub fn exp(&self) -> Pose {
        let theta = self.omega.norm();
        let w = hat(&self.omega);
        let w2 = w * w;
        let (a, b, c) = if theta < SMALL_ANGLE {
            let t2 = theta * theta;
            // sin(t)/t, (1-cos t)/t^2, (t-sin t)/t^3
            (1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0)
        } else {
            let t2 = theta * theta;
            (
                theta.sin() / theta,
                (1.0 - theta.cos()) / t2,
                (theta - theta.sin()) / (t2 * theta),
            )
        };
        let rotation = Matrix3::identity() + a * w + b * w2;
        let v = Matrix3::identity() + b * w + c * w2;
        Pose {
            rotation,
            translation: v * self.nu,
        }
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Build a pose from an explicit rotation matrix, validating that it is
    /// orthonormal with determinant +1.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, GeomError> {
        let drift = ortho_drift(&rotation);
        if drift > 1e-6 {
            return Err(GeomError::InvalidRotation(format!(
                "R^T R deviates from identity by {drift:.3e}"
            )));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > 1e-6 {
            return Err(GeomError::InvalidRotation(format!("det R = {det}")));
        }
        let rotation = if drift > ORTHO_DRIFT_TOL {
            orthonormalize(&rotation)
        } else {
            rotation
        };
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Rotation about a unit axis by `angle` radians, plus translation.
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64, translation: Vector3<f64>) -> Self {
        let unit = axis.normalize();
        let mut pose = Twist::new(unit * angle, Vector3::zeros()).exp();
        pose.translation = translation;
        pose
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn transform(&self, point: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * point + self.translation
    }

    /// `self` applied after `other`: (self ∘ other)(x) = self(other(x)).
    /// Re-orthonormalizes whenever accumulated drift exceeds tolerance, so
    /// long composition chains stay in SO(3).
    pub fn compose(&self, other: &Pose) -> Pose {
        let mut rotation = self.rotation * other.rotation;
        if ortho_drift(&rotation) > ORTHO_DRIFT_TOL {
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

    pub fn matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn unit_quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(self.rotation))
    }

    /// Logarithmic map SE(3) -> se(3). The rotation angle is returned in
    /// `[0, pi]`. The boolean flags a rotation within 1e-6 of pi, where the
    /// axis becomes numerically ill-conditioned; the result itself is
    /// computed through a quaternion branch that stays stable there.
    pub fn log(&self) -> (Twist, bool) {
        let q = self.unit_quaternion();
        let omega = q.scaled_axis();
        let theta = omega.norm();
        let near_singular = theta > std::f64::consts::PI - 1e-6;

        let w = hat(&omega);
        let w2 = w * w;
        let v_inv = if theta < SMALL_ANGLE {
            let t2 = theta * theta;
            Matrix3::identity() - 0.5 * w + (1.0 / 12.0 + t2 / 720.0) * w2
        } else {
            let t2 = theta * theta;
            // 1/t^2 * (1 - A/(2B)) with A = sin t / t, B = (1 - cos t)/t^2;
            // stable at t -> pi because 1 - cos t stays near 2.
            let a = theta.sin() / theta;
            let b = (1.0 - theta.cos()) / t2;
            let coef = (1.0 - a / (2.0 * b)) / t2;
            Matrix3::identity() - 0.5 * w + coef * w2
        };
        (Twist::new(omega, v_inv * self.translation), near_singular)
    }
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl std::ops::Mul for &Pose {
    type Output = Pose;
    fn mul(self, rhs: &Pose) -> Pose {
        self.compose(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    /// Truncated power series of the 4x4 matrix exponential, powers through
    /// A^20. Independent route used to pin the closed-form implementation.
    fn exp_series(twist: &Twist) -> Matrix4<f64> {
        let mut a = Matrix4::zeros();
        a.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat(&twist.omega));
        a.fixed_view_mut::<3, 1>(0, 3).copy_from(&twist.nu);
        let mut term = Matrix4::identity();
        let mut sum = Matrix4::identity();
        for n in 1..=20 {
            term = term * a / (n as f64);
            sum += term;
        }
        sum
    }

    fn max_abs_diff(a: &Matrix4<f64>, b: &Matrix4<f64>) -> f64 {
        (a - b).iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    #[test]
    fn exp_of_zero_is_identity() {
        let p = Twist::zero().exp();
        assert_eq!(p, Pose::identity());
    }

    #[test]
    fn exp_quarter_turn_about_z() {
        let p = Twist::new(Vector3::new(0.0, 0.0, PI / 2.0), Vector3::zeros()).exp();
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert_relative_eq!(p.rotation(), &expected, epsilon = 1e-12);
        assert_eq!(p.translation(), &Vector3::zeros());
        // Against the independent series route.
        let twist = Twist::new(Vector3::new(0.0, 0.0, PI / 2.0), Vector3::zeros());
        assert!(max_abs_diff(&p.matrix(), &exp_series(&twist)) < 1e-9);
    }

    #[test]
    fn log_of_identity_is_zero() {
        let (t, near) = Pose::identity().log();
        assert_eq!(t.omega, Vector3::zeros());
        assert_eq!(t.nu, Vector3::zeros());
        assert!(!near);
    }

    #[test]
    fn exp_log_roundtrip_unit_angle() {
        let psi = Twist::new(
            Vector3::new(0.6, -0.64, 0.48).normalize(),
            Vector3::new(0.3, -0.2, 0.7),
        );
        let (back, near) = psi.exp().log();
        assert!(!near);
        assert_relative_eq!(back.omega, psi.omega, epsilon = 1e-9);
        assert_relative_eq!(back.nu, psi.nu, epsilon = 1e-9);
    }

    #[test]
    fn near_pi_rotation_is_flagged_and_stable() {
        let angle = PI - 1e-7;
        let psi = Twist::new(Vector3::new(angle, 0.0, 0.0), Vector3::new(0.1, 0.2, 0.3));
        let (back, near) = psi.exp().log();
        assert!(near);
        assert_relative_eq!(back.omega.norm(), angle, epsilon = 1e-6);
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let p = Twist::new(Vector3::new(0.4, -1.1, 2.0), Vector3::new(0.5, 0.1, -0.9)).exp();
        let id = p.compose(&p.inverse());
        assert_relative_eq!(id.rotation(), &Matrix3::identity(), epsilon = 1e-9);
        assert_relative_eq!(id.translation(), &Vector3::zeros(), epsilon = 1e-9);
    }

    #[test]
    fn long_composition_chain_stays_orthonormal() {
        let step = Twist::new(
            Vector3::new(1e-3, 2e-3, -1.5e-3),
            Vector3::new(1e-3, 0.0, 2e-3),
        )
        .exp();
        let mut acc = Pose::identity();
        for _ in 0..10_000 {
            acc = acc.compose(&step);
        }
        assert!(ortho_drift(acc.rotation()) < 1e-9);
        assert_relative_eq!(acc.rotation().determinant(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn composition_associative() {
        let a = Twist::new(Vector3::new(0.1, 0.2, 0.3), Vector3::new(1.0, 0.0, 0.0)).exp();
        let b = Twist::new(Vector3::new(-0.4, 0.1, 0.0), Vector3::new(0.0, 2.0, 0.0)).exp();
        let c = Twist::new(Vector3::new(0.0, -0.2, 0.5), Vector3::new(0.0, 0.0, -1.0)).exp();
        let left = a.compose(&b).compose(&c);
        let right = a.compose(&b.compose(&c));
        assert!(max_abs_diff(&left.matrix(), &right.matrix()) < 1e-12);
        let id = Pose::identity();
        assert_eq!(a.compose(&id), a);
        assert_eq!(id.compose(&a), a);
    }

    #[test]
    fn pose_new_rejects_non_rotation() {
        let m = Matrix3::new(1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 1.0);
        assert!(Pose::new(m, Vector3::zeros()).is_err());
        // Reflection: orthonormal but det -1.
        let r = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        assert!(Pose::new(r, Vector3::zeros()).is_err());
    }

    proptest! {
        /// Closed form matches the series oracle for moderate angles.
        #[test]
        fn exp_matches_series(
            wx in -1.5..1.5f64, wy in -1.5..1.5f64, wz in -1.5..1.5f64,
            nx in -1.0..1.0f64, ny in -1.0..1.0f64, nz in -1.0..1.0f64,
        ) {
            let psi = Twist::new(Vector3::new(wx, wy, wz), Vector3::new(nx, ny, nz));
            let diff = max_abs_diff(&psi.exp().matrix(), &exp_series(&psi));
            prop_assert!(diff < 1e-9, "diff = {diff}");
        }

        /// log(exp(psi)) = psi whenever the angle is clear of pi.
        #[test]
        fn exp_log_roundtrip(
            wx in -1.0..1.0f64, wy in -1.0..1.0f64, wz in -1.0..1.0f64,
            nx in -2.0..2.0f64, ny in -2.0..2.0f64, nz in -2.0..2.0f64,
            scale in 0.0..2.8f64,
        ) {
            let dir = Vector3::new(wx, wy, wz);
            let omega = if dir.norm() < 1e-12 { dir } else { dir.normalize() * scale };
            let psi = Twist::new(omega, Vector3::new(nx, ny, nz));
            let (back, _) = psi.exp().log();
            prop_assert!((back.omega - psi.omega).norm() < 1e-9);
            prop_assert!((back.nu - psi.nu).norm() < 1e-9);
        }
    }
}
