use nalgebra::{Matrix3, Matrix4, Vector3};

use super::Rotation;
use crate::scalar::Real;

/// Rigid transform `p -> R p + t`.
///
/// As a camera extrinsic it maps frame coordinates to camera coordinates
/// (`p_cam = R p_world + t`). The camera frame is x right, y up, z forward.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidExtrinsic<T: Real> {
    pub rotation: Rotation<T>,
    pub translation: Vector3<T>,
}

impl<T: Real> Default for RigidExtrinsic<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> RigidExtrinsic<T> {
    pub fn new(rotation: Rotation<T>, translation: Vector3<T>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Rotation::identity(), Vector3::zeros())
    }

    pub fn from_translation(t: Vector3<T>) -> Self {
        Self::new(Rotation::identity(), t)
    }

    pub fn from_rotation(r: Rotation<T>) -> Self {
        Self::new(r, Vector3::zeros())
    }

    /// Extrinsic of a camera placed at `center` whose camera-to-world rotation is `orientation`.
    pub fn from_camera_pose(orientation: &Rotation<T>, center: &Vector3<T>) -> Self {
        let r = orientation.inverse();
        let t = -(r.to_matrix() * center);
        Self::new(r, t)
    }

    /// Position of the camera (the frame point mapped to the camera origin).
    pub fn camera_center(&self) -> Vector3<T> {
        -(self.rotation.to_matrix().transpose() * self.translation)
    }

    #[inline]
    pub fn apply(&self, p: &Vector3<T>) -> Vector3<T> {
        self.rotation.to_matrix() * p + self.translation
    }

    pub fn inverse(&self) -> Self {
        let r = self.rotation.inverse();
        let t = -(r.to_matrix() * self.translation);
        Self::new(r, t)
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self::new(
            self.rotation.compose(&other.rotation),
            self.rotation.to_matrix() * other.translation + self.translation,
        )
    }

    pub fn rotation_matrix(&self) -> Matrix3<T> {
        self.rotation.to_matrix()
    }

    pub fn to_matrix(&self) -> Matrix4<T> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&self.rotation.to_matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Reads the rigid part of a homogeneous matrix; the 3x3 block must be a rotation.
    pub fn from_matrix(m: &Matrix4<T>) -> Self {
        let r: Matrix3<T> = m.fixed_view::<3, 3>(0, 0).into_owned();
        Self::new(
            Rotation::from_matrix(&r),
            m.fixed_view::<3, 1>(0, 3).into_owned(),
        )
    }

    pub fn cast<U: Real>(&self) -> RigidExtrinsic<U> {
        RigidExtrinsic::new(
            self.rotation.cast(),
            self.translation.map(|v| U::lit(v.to_f64_lossy())),
        )
    }
}

/// Relative transform `pose_a ∘ pose_b⁻¹`, so that chaining it onto `pose_b` yields `pose_a`.
pub fn relative_pose<T: Real>(
    pose_a: &RigidExtrinsic<T>,
    pose_b: &RigidExtrinsic<T>,
) -> RigidExtrinsic<T> {
    pose_a.compose(&pose_b.inverse())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_extrinsic(rng: &mut ChaCha8Rng) -> RigidExtrinsic<f64> {
        let r = Rotation::from_wxyz(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        )
        .unwrap();
        let t = Vector3::new(
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
        );
        RigidExtrinsic::new(r, t)
    }

    fn dense_relative(a: &RigidExtrinsic<f64>, b: &RigidExtrinsic<f64>) -> Matrix4<f64> {
        a.to_matrix() * b.to_matrix().try_inverse().unwrap()
    }

    #[test]
    fn equal_poses_give_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_extrinsic(&mut rng);
        let d = relative_pose(&a, &a);
        assert!(d.rotation.angle() < 1e-9);
        assert!(d.translation.norm() < 1e-9);
    }

    #[test]
    fn identity_reference_returns_first_pose() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_extrinsic(&mut rng);
        let d = relative_pose(&a, &RigidExtrinsic::identity());
        assert!((d.to_matrix() - a.to_matrix()).abs().max() < 1e-12);
    }

    #[test]
    fn matches_dense_homogeneous_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let a = random_extrinsic(&mut rng);
            let b = random_extrinsic(&mut rng);
            let d = relative_pose(&a, &b);
            assert!((d.to_matrix() - dense_relative(&a, &b)).abs().max() < 1e-9);
        }
    }

    #[test]
    fn chaining_reproduces_pose_for_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let a = random_extrinsic(&mut rng);
            let b = random_extrinsic(&mut rng);
            let chained = relative_pose(&a, &b).compose(&b);
            assert!((chained.to_matrix() - a.to_matrix()).abs().max() < 1e-9);
        }
    }

    #[test]
    fn chaining_onto_third_frame() {
        // Relative transform between two predicted views carried onto a known frame.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e0_obj = random_extrinsic(&mut rng);
        let e1_obj = random_extrinsic(&mut rng);
        let g = random_extrinsic(&mut rng);
        let pred0 = e0_obj.compose(&g);
        let pred1 = e1_obj.compose(&g);
        let e0 = relative_pose(&pred0, &pred1).compose(&e1_obj);
        assert!((e0.to_matrix() - e0_obj.to_matrix()).abs().max() < 1e-9);
    }

    #[test]
    fn inverse_composes_to_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let a = random_extrinsic(&mut rng);
            let id = a.compose(&a.inverse());
            assert!((id.to_matrix() - Matrix4::identity()).abs().max() < 1e-9);
        }
    }

    #[test]
    fn camera_pose_round_trip() {
        let orient = Rotation::about_y(0.7);
        let c = Vector3::new(1.0, 2.0, -3.0);
        let e = RigidExtrinsic::from_camera_pose(&orient, &c);
        assert!((e.camera_center() - c).norm() < 1e-12);
        assert!(e.apply(&c).norm() < 1e-12);
    }
}
