//! Scalar-last unit quaternions, `[v; s]`.
//!
//! The product `a ⊗ b` is `(a_s I + Ω(a_v)) b` with
//! `Ω(v) = [[-[v×], v], [-vᵀ, 0]]`, and the attitude matrix is
//! `A(q) = I + 2 s [v×] + 2 [v×]²`. Under these two definitions
//!
//! ```text
//! A(a ⊗ b) = A(b) · A(a)
//! ```
//!
//! which is the one composition rule the rest of the crate relies on:
//! `η = μ ⊗ q` gives `A(η) = A(q) A(μ)`, mapping grapple-frame vectors into
//! the body frame and then into the sensor frame.

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};

use crate::error::{Error, Result};

/// Normalization slack accepted by [`UnitQuaternion::try_new`].
pub const NORM_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitQuaternion {
    v: Vector3<f64>,
    s: f64,
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

/// Skew-symmetric cross-product matrix `[v×]`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// `Ω(v)` of the quaternion product, acting on scalar-last 4-vectors.
pub fn omega_matrix(v: &Vector3<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-skew(v)));
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(v);
    m.fixed_view_mut::<1, 3>(3, 0).copy_from(&(-v.transpose()));
    m
}

/// Bilinear product on raw (not necessarily unit) scalar-last 4-vectors.
/// Used for quaternion rates, where normalization does not apply.
pub fn raw_product(a: &Vector4<f64>, b: &Vector4<f64>) -> Vector4<f64> {
    let av = a.fixed_rows::<3>(0).into_owned();
    let bv = b.fixed_rows::<3>(0).into_owned();
    let v = a[3] * bv + b[3] * av - av.cross(&bv);
    let s = a[3] * b[3] - av.dot(&bv);
    Vector4::new(v.x, v.y, v.z, s)
}

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion {
        v: Vector3::new(0.0, 0.0, 0.0),
        s: 1.0,
    };

    /// Accepts `[v; s]` if its norm is within [`NORM_TOLERANCE`] of one, then
    /// renormalizes exactly.
    pub fn try_new(v: Vector3<f64>, s: f64) -> Result<Self> {
        let n = (v.norm_squared() + s * s).sqrt();
        if !n.is_finite() || (n - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidArgument(format!(
                "quaternion norm {n} deviates from 1 by more than {NORM_TOLERANCE:e}"
            )));
        }
        Ok(Self { v: v / n, s: s / n })
    }

    /// Normalizes an arbitrary non-zero 4-vector.
    pub fn normalize(v: Vector3<f64>, s: f64) -> Self {
        let n = (v.norm_squared() + s * s).sqrt();
        debug_assert!(n > 0.0 && n.is_finite(), "cannot normalize {v:?}, {s}");
        Self { v: v / n, s: s / n }
    }

    pub fn from_vector4(q: &Vector4<f64>) -> Self {
        Self::normalize(q.fixed_rows::<3>(0).into_owned(), q[3])
    }

    /// Rotation of `angle` radians about `axis`, in the sense of [`Self::rotation_matrix`].
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 || angle == 0.0 {
            return Self::IDENTITY;
        }
        let half = 0.5 * angle;
        Self::normalize(axis / n * half.sin(), half.cos())
    }

    /// Rotation vector (axis times angle).
    pub fn from_rotation_vector(rv: &Vector3<f64>) -> Self {
        Self::from_axis_angle(rv, rv.norm())
    }

    /// Small-error quaternion `[dv; sqrt(1 - |dv|²)]`; the vector part is
    /// rescaled onto the unit sphere if it is not small.
    pub fn from_vector_part(dv: &Vector3<f64>) -> Self {
        let n2 = dv.norm_squared();
        if n2 < 1.0 {
            Self::normalize(*dv, (1.0 - n2).sqrt())
        } else {
            Self::normalize(*dv, 0.0)
        }
    }

    pub fn vector(&self) -> Vector3<f64> {
        self.v
    }

    pub fn scalar(&self) -> f64 {
        self.s
    }

    pub fn to_vector4(&self) -> Vector4<f64> {
        Vector4::new(self.v.x, self.v.y, self.v.z, self.s)
    }

    pub fn norm(&self) -> f64 {
        (self.v.norm_squared() + self.s * self.s).sqrt()
    }

    pub fn inverse(&self) -> Self {
        Self { v: -self.v, s: self.s }
    }

    /// `self ⊗ rhs`, renormalized.
    pub fn product(&self, rhs: &Self) -> Self {
        Self::from_vector4(&raw_product(&self.to_vector4(), &rhs.to_vector4()))
    }

    /// `A(q) = I + 2 s [v×] + 2 [v×]²`.
    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        let k = skew(&self.v);
        Matrix3::identity() + 2.0 * self.s * k + 2.0 * k * k
    }

    /// Same rotation with non-negative scalar part.
    pub fn canonical(&self) -> Self {
        if self.s < 0.0 {
            Self { v: -self.v, s: -self.s }
        } else {
            *self
        }
    }

    /// Rotation angle of this quaternion, in `[0, π]`.
    pub fn angle(&self) -> f64 {
        let c = self.canonical();
        2.0 * c.v.norm().atan2(c.s)
    }

    /// Angle of the relative rotation between two attitudes.
    pub fn angle_to(&self, other: &Self) -> f64 {
        self.inverse().product(other).angle()
    }

    /// Rotation vector (axis times angle, angle in `[0, π]`).
    pub fn rotation_vector(&self) -> Vector3<f64> {
        let c = self.canonical();
        let n = c.v.norm();
        if n < 1e-300 {
            return 2.0 * c.v;
        }
        c.v / n * (2.0 * n.atan2(c.s))
    }

    pub fn is_finite(&self) -> bool {
        self.s.is_finite() && self.v.iter().all(|x| x.is_finite())
    }
}

/// `a ⊗ b`.
pub fn quat_product(a: &UnitQuaternion, b: &UnitQuaternion) -> UnitQuaternion {
    a.product(b)
}

pub fn quat_inverse(q: &UnitQuaternion) -> UnitQuaternion {
    q.inverse()
}

pub fn rotation_matrix(q: &UnitQuaternion) -> Matrix3<f64> {
    q.rotation_matrix()
}

/// Checked entry point for raw components.
pub fn rotation_matrix_of(v: Vector3<f64>, s: f64) -> Result<Matrix3<f64>> {
    Ok(UnitQuaternion::try_new(v, s)?.rotation_matrix())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn arb_quat() -> impl Strategy<Value = UnitQuaternion> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("non-zero", |(a, b, c, d)| a * a + b * b + c * c + d * d > 1e-3)
            .prop_map(|(a, b, c, d)| UnitQuaternion::normalize(Vector3::new(a, b, c), d))
    }

    #[test]
    fn identity_gives_identity_matrix() {
        assert_eq!(UnitQuaternion::IDENTITY.rotation_matrix(), Matrix3::identity());
    }

    #[test]
    fn quarter_turn_about_z() {
        let q = UnitQuaternion::try_new(Vector3::new(0.0, 0.0, H), H).unwrap();
        let expected = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert_relative_eq!(q.rotation_matrix(), expected, epsilon = 1e-15);
    }

    #[test]
    fn half_turn_from_two_quarter_turns() {
        let a = UnitQuaternion::try_new(Vector3::new(0.0, 0.0, H), H).unwrap();
        let c = a.product(&a);
        assert_relative_eq!(c.vector(), Vector3::new(0.0, 0.0, 1.0), epsilon = 1e-15);
        assert!(c.scalar().abs() < 1e-15);
    }

    #[test]
    fn rejects_non_normalized() {
        assert!(matches!(
            rotation_matrix_of(Vector3::new(0.0, 0.0, 0.5), 1.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(UnitQuaternion::try_new(Vector3::new(0.0, 0.0, 1e-10), 1.0).is_ok());
    }

    #[test]
    fn omega_matrix_is_left_product_operator() {
        let a = UnitQuaternion::normalize(Vector3::new(0.3, -0.2, 0.5), 0.7);
        let b = UnitQuaternion::normalize(Vector3::new(-0.1, 0.4, 0.2), 0.9);
        let op = a.scalar() * Matrix4::identity() + omega_matrix(&a.vector());
        let via_op = op * b.to_vector4();
        assert_relative_eq!(via_op, a.product(&b).to_vector4(), epsilon = 1e-14);
    }

    #[test]
    fn axis_angle_matches_matrix() {
        let q = UnitQuaternion::from_axis_angle(&Vector3::z(), 0.3);
        let a = q.rotation_matrix();
        assert_relative_eq!(a[(0, 0)], 0.3f64.cos(), epsilon = 1e-15);
        assert_relative_eq!(a[(1, 0)], 0.3f64.sin(), epsilon = 1e-15);
        assert_relative_eq!(q.angle(), 0.3, epsilon = 1e-14);
        assert_relative_eq!(q.rotation_vector(), Vector3::new(0.0, 0.0, 0.3), epsilon = 1e-14);
    }

    proptest! {
        #[test]
        fn unit_norm_and_inverse(a in arb_quat(), b in arb_quat()) {
            let c = a.product(&b);
            prop_assert!((c.norm() - 1.0).abs() < 1e-12);
            let e = a.product(&a.inverse());
            prop_assert!((e.scalar() - 1.0).abs() < 1e-12);
            prop_assert!(e.vector().norm() < 1e-12);
        }

        #[test]
        fn orthonormal(a in arb_quat()) {
            let m = a.rotation_matrix();
            prop_assert!((m * m.transpose() - Matrix3::identity()).abs().max() < 1e-12);
            prop_assert!((m.determinant() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn composition_rule(a in arb_quat(), b in arb_quat()) {
            let lhs = a.product(&b).rotation_matrix();
            let rhs = b.rotation_matrix() * a.rotation_matrix();
            prop_assert!((lhs - rhs).abs().max() < 1e-12);
        }
    }
}
