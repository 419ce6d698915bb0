use nalgebra::{Matrix3, Quaternion, Vector3, Vector4};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Unit quaternion rotation stored as (w, x, y, z) with `w >= 0`.
///
/// The sign convention makes the stored quaternion unique for every rotation
/// except the measure-zero set with `w == 0`, where the first non-zero vector
/// component is made positive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation<T: Real> {
    q: Quaternion<T>,
}

impl<T: Real> Default for Rotation<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Rotation<T> {
    pub fn identity() -> Self {
        Self {
            q: Quaternion::new(T::one(), T::zero(), T::zero(), T::zero()),
        }
    }

    /// Normalizes and canonicalizes an arbitrary non-zero quaternion.
    pub fn from_wxyz(w: T, x: T, y: T, z: T) -> Result<Self> {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite_value() || n <= T::lit(1e-300) {
            return Err(Error::InvalidArgument(
                "quaternion must be finite and non-zero".into(),
            ));
        }
        Ok(Self::canonical(Quaternion::new(w / n, x / n, y / n, z / n)))
    }

    pub(crate) fn from_wxyz_unchecked(w: T, x: T, y: T, z: T) -> Self {
        let n = (w * w + x * x + y * y + z * z).sqrt();
        Self::canonical(Quaternion::new(w / n, x / n, y / n, z / n))
    }

    fn canonical(q: Quaternion<T>) -> Self {
        let flip = if q.w != T::zero() {
            q.w < T::zero()
        } else if q.i != T::zero() {
            q.i < T::zero()
        } else if q.j != T::zero() {
            q.j < T::zero()
        } else {
            q.k < T::zero()
        };
        Self {
            q: if flip { -q } else { q },
        }
    }

    /// Rotation of `angle` radians about `axis` (normalized internally).
    pub fn from_axis_angle(axis: &Vector3<T>, angle: T) -> Result<Self> {
        let n = axis.norm();
        if n <= T::zero() || !n.is_finite_value() {
            return Err(Error::InvalidArgument("rotation axis must be non-zero".into()));
        }
        let half = angle * T::lit(0.5);
        let s = half.sin() / n;
        Self::from_wxyz(half.cos(), axis.x * s, axis.y * s, axis.z * s)
    }

    /// Exponential map of a rotation vector (axis times angle).
    pub fn from_rotation_vector(v: &Vector3<T>) -> Self {
        let angle = v.norm();
        if angle <= T::lit(1e-300) {
            return Self::identity();
        }
        let half = angle * T::lit(0.5);
        let s = half.sin() / angle;
        Self::from_wxyz_unchecked(half.cos(), v.x * s, v.y * s, v.z * s)
    }

    /// Rotation vector (axis times angle, angle in [0, pi]).
    pub fn to_rotation_vector(&self) -> Vector3<T> {
        let v = Vector3::new(self.q.i, self.q.j, self.q.k);
        let s = v.norm();
        if s <= T::lit(1e-300) {
            return Vector3::zeros();
        }
        let angle = T::lit(2.0) * s.atan2(self.q.w);
        v * (angle / s)
    }

    pub fn about_x(angle: T) -> Self {
        Self::from_axis_angle(&Vector3::x(), angle).expect("unit axis")
    }

    pub fn about_y(angle: T) -> Self {
        Self::from_axis_angle(&Vector3::y(), angle).expect("unit axis")
    }

    pub fn about_z(angle: T) -> Self {
        Self::from_axis_angle(&Vector3::z(), angle).expect("unit axis")
    }

    /// Converts a rotation matrix using Shepperd's method. The input is
    /// assumed orthonormal with determinant +1.
    pub fn from_matrix(m: &Matrix3<T>) -> Self {
        let one = T::one();
        let quarter = T::lit(0.25);
        let trace = m[(0, 0)] + m[(1, 1)] + m[(2, 2)];
        let (w, x, y, z);
        if trace > m[(0, 0)] && trace > m[(1, 1)] && trace > m[(2, 2)] {
            let s = (one + trace).sqrt() * T::lit(2.0);
            w = quarter * s;
            x = (m[(2, 1)] - m[(1, 2)]) / s;
            y = (m[(0, 2)] - m[(2, 0)]) / s;
            z = (m[(1, 0)] - m[(0, 1)]) / s;
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = (one + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * T::lit(2.0);
            w = (m[(2, 1)] - m[(1, 2)]) / s;
            x = quarter * s;
            y = (m[(0, 1)] + m[(1, 0)]) / s;
            z = (m[(0, 2)] + m[(2, 0)]) / s;
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = (one + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * T::lit(2.0);
            w = (m[(0, 2)] - m[(2, 0)]) / s;
            x = (m[(0, 1)] + m[(1, 0)]) / s;
            y = quarter * s;
            z = (m[(1, 2)] + m[(2, 1)]) / s;
        } else {
            let s = (one + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * T::lit(2.0);
            w = (m[(1, 0)] - m[(0, 1)]) / s;
            x = (m[(0, 2)] + m[(2, 0)]) / s;
            y = (m[(1, 2)] + m[(2, 1)]) / s;
            z = quarter * s;
        }
        Self::from_wxyz_unchecked(w, x, y, z)
    }

    #[inline]
    pub fn w(&self) -> T {
        self.q.w
    }

    /// Components in storage order (w, x, y, z).
    #[inline]
    pub fn wxyz(&self) -> [T; 4] {
        [self.q.w, self.q.i, self.q.j, self.q.k]
    }

    #[inline]
    pub fn as_vector4(&self) -> Vector4<T> {
        Vector4::new(self.q.w, self.q.i, self.q.j, self.q.k)
    }

    pub fn to_matrix(&self) -> Matrix3<T> {
        quaternion_matrix(self.q.w, self.q.i, self.q.j, self.q.k)
    }

    #[inline]
    pub fn rotate(&self, v: &Vector3<T>) -> Vector3<T> {
        self.to_matrix() * v
    }

    pub fn inverse(&self) -> Self {
        Self::canonical(Quaternion::new(self.q.w, -self.q.i, -self.q.j, -self.q.k))
    }

    /// `self * other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Self) -> Self {
        let p = self.q * other.q;
        Self::from_wxyz_unchecked(p.w, p.i, p.j, p.k)
    }

    /// Rotation angle in radians, in [0, pi].
    pub fn angle(&self) -> T {
        let v = Vector3::new(self.q.i, self.q.j, self.q.k).norm();
        T::lit(2.0) * v.atan2(self.q.w.abs())
    }

    /// Geodesic distance to `other` in radians.
    pub fn angle_to(&self, other: &Self) -> T {
        self.inverse().compose(other).angle()
    }

    pub fn cast<U: Real>(&self) -> Rotation<U> {
        let [w, x, y, z] = self.wxyz();
        Rotation::from_wxyz_unchecked(
            U::lit(w.to_f64_lossy()),
            U::lit(x.to_f64_lossy()),
            U::lit(y.to_f64_lossy()),
            U::lit(z.to_f64_lossy()),
        )
    }
}

/// Rotation matrix of a unit quaternion (homogeneous quadratic form).
pub(crate) fn quaternion_matrix<T: Real>(w: T, x: T, y: T, z: T) -> Matrix3<T> {
    let two = T::lit(2.0);
    let one = T::one();
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, xz, yz) = (x * y, x * z, y * z);
    let (wx, wy, wz) = (w * x, w * y, w * z);
    Matrix3::new(
        one - two * (yy + zz),
        two * (xy - wz),
        two * (xz + wy),
        two * (xy + wz),
        one - two * (xx + zz),
        two * (yz - wx),
        two * (xz - wy),
        two * (yz + wx),
        one - two * (xx + yy),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{UnitQuaternion, Vector3};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn arb_rotation() -> impl Strategy<Value = Rotation<f64>> {
        (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64)
            .prop_filter("non-zero", |(w, x, y, z)| w * w + x * x + y * y + z * z > 1e-3)
            .prop_map(|(w, x, y, z)| Rotation::from_wxyz(w, x, y, z).unwrap())
    }

    #[test]
    fn canonical_sign_is_positive_w() {
        let r = Rotation::from_wxyz(-0.5, 0.5, -0.5, 0.5).unwrap();
        assert!(r.w() >= 0.0);
        assert_relative_eq!(r.as_vector4().norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_quaternion_rejected() {
        assert!(Rotation::from_wxyz(0.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn quarter_turn_about_z_maps_x_to_y() {
        let r = Rotation::about_z(PI / 2.0);
        let v = r.rotate(&Vector3::x());
        assert_relative_eq!(v, Vector3::y(), epsilon = 1e-12);
    }

    #[test]
    fn rotation_vector_round_trip() {
        let v = Vector3::new(0.3, -1.2, 0.7);
        let r = Rotation::from_rotation_vector(&v);
        assert_relative_eq!(r.to_rotation_vector(), v, epsilon = 1e-12);
        assert_relative_eq!(r.angle(), v.norm(), epsilon = 1e-12);
    }

    #[test]
    fn works_in_single_precision() {
        let r = Rotation::<f32>::about_y(0.5);
        let m = r.to_matrix();
        assert!((m.determinant() - 1.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn unit_norm_and_orthonormal(r in arb_rotation()) {
            prop_assert!((r.as_vector4().norm() - 1.0).abs() < 1e-9);
            let m = r.to_matrix();
            prop_assert!((m.transpose() * m - Matrix3::identity()).abs().max() < 1e-9);
            prop_assert!((m.determinant() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn matrix_agrees_with_nalgebra(r in arb_rotation()) {
            let [w, x, y, z] = r.wxyz();
            let reference = UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z))
                .to_rotation_matrix()
                .into_inner();
            prop_assert!((r.to_matrix() - reference).abs().max() < 1e-12);
        }

        #[test]
        fn matrix_quaternion_matrix_round_trip(r in arb_rotation()) {
            let m = r.to_matrix();
            let back = Rotation::from_matrix(&m);
            prop_assert!((back.to_matrix() - m).abs().max() < 1e-9);
            prop_assert!(back.angle_to(&r) < 1e-7);
        }

        #[test]
        fn compose_matches_matrix_product(a in arb_rotation(), b in arb_rotation()) {
            let m = a.compose(&b).to_matrix();
            prop_assert!((m - a.to_matrix() * b.to_matrix()).abs().max() < 1e-12);
        }
    }
}
