use nalgebra::{Matrix3, Matrix4, Vector3};

use super::{AnisotropicScale, RigidExtrinsic, Rotation};
use crate::error::Result;
use crate::scalar::Real;

/// Non-rigid object-to-world map `T = [R_w|t_w] · [R_l|t_l]⁻¹ · diag(S, 1)`.
///
/// `world` and `local` are camera poses (camera-to-frame maps): `world` places the
/// crop camera in the scene and `local` places the matching view camera in the
/// object's own frame. The 4x4 matrix is cached alongside its factors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectWorldTransform<T: Real> {
    matrix: Matrix4<T>,
    world: RigidExtrinsic<T>,
    local: RigidExtrinsic<T>,
    scale: AnisotropicScale<T>,
}

impl<T: Real> Default for ObjectWorldTransform<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> ObjectWorldTransform<T> {
    pub fn identity() -> Self {
        Self::from_factors(
            RigidExtrinsic::identity(),
            RigidExtrinsic::identity(),
            AnisotropicScale::identity(),
        )
    }

    fn from_factors(
        world: RigidExtrinsic<T>,
        local: RigidExtrinsic<T>,
        scale: AnisotropicScale<T>,
    ) -> Self {
        let mut matrix =
            world.to_matrix() * local.inverse().to_matrix() * scale_matrix4(&scale);
        matrix[(3, 0)] = T::zero();
        matrix[(3, 1)] = T::zero();
        matrix[(3, 2)] = T::zero();
        matrix[(3, 3)] = T::one();
        Self {
            matrix,
            world,
            local,
            scale,
        }
    }

    /// `x -> R (S x) + t` with the rigid part stored as the world factor.
    pub fn from_rigid_scale(rigid: RigidExtrinsic<T>, scale: AnisotropicScale<T>) -> Self {
        Self::from_factors(rigid, RigidExtrinsic::identity(), scale)
    }

    pub fn from_rigid(rigid: RigidExtrinsic<T>) -> Self {
        Self::from_rigid_scale(rigid, AnisotropicScale::identity())
    }

    #[inline]
    pub fn matrix(&self) -> &Matrix4<T> {
        &self.matrix
    }

    pub fn world_factor(&self) -> &RigidExtrinsic<T> {
        &self.world
    }

    pub fn local_factor(&self) -> &RigidExtrinsic<T> {
        &self.local
    }

    pub fn scale(&self) -> &AnisotropicScale<T> {
        &self.scale
    }

    /// Rigid part `[R_w|t_w] · [R_l|t_l]⁻¹`.
    pub fn rigid(&self) -> RigidExtrinsic<T> {
        self.world.compose(&self.local.inverse())
    }

    pub fn rotation(&self) -> Rotation<T> {
        self.rigid().rotation
    }

    /// The 3x3 linear block `R · S`.
    pub fn linear(&self) -> Matrix3<T> {
        self.matrix.fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn translation(&self) -> Vector3<T> {
        self.matrix.fixed_view::<3, 1>(0, 3).into_owned()
    }

    #[inline]
    pub fn apply_point(&self, p: &Vector3<T>) -> Vector3<T> {
        let m = &self.matrix;
        Vector3::new(
            m[(0, 0)] * p.x + m[(0, 1)] * p.y + m[(0, 2)] * p.z + m[(0, 3)],
            m[(1, 0)] * p.x + m[(1, 1)] * p.y + m[(1, 2)] * p.z + m[(1, 3)],
            m[(2, 0)] * p.x + m[(2, 1)] * p.y + m[(2, 2)] * p.z + m[(2, 3)],
        )
    }

    /// Left-composes a rigid update with the scale held fixed: `Δ ∘ T`.
    pub fn left_compose(&self, delta: &RigidExtrinsic<T>) -> Self {
        Self::from_factors(delta.compose(&self.world), self.local, self.scale)
    }

    /// Transform built from the inverse of the rigid part only (scale dropped).
    pub fn rigid_inverse(&self) -> Self {
        Self::from_rigid(self.rigid().inverse())
    }

    /// Exact inverse as a dense matrix.
    pub fn inverse_matrix(&self) -> Matrix4<T> {
        let inv_s = scale_matrix4(&self.scale.inverse());
        inv_s * self.local.to_matrix() * self.world.inverse().to_matrix()
    }

    /// Residual of the polar factorization `linear = R · S`, as the max-abs
    /// entry of `linear - R S`.
    pub fn polar_residual(&self) -> T {
        let rs = self.rotation().to_matrix() * self.scale.to_matrix();
        (self.linear() - rs).abs().max()
    }

    pub fn cast<U: Real>(&self) -> ObjectWorldTransform<U> {
        let f = |v: T| U::lit(v.to_f64_lossy());
        ObjectWorldTransform::from_factors(
            self.world.cast(),
            self.local.cast(),
            AnisotropicScale::from_vector(self.scale.factors().map(f)).expect("positive scale"),
        )
    }
}

fn scale_matrix4<T: Real>(s: &AnisotropicScale<T>) -> Matrix4<T> {
    let f = s.factors();
    Matrix4::from_diagonal(&nalgebra::Vector4::new(f.x, f.y, f.z, T::one()))
}

/// Composes the object-to-world transform from the crop camera pose in the world
/// (`world_extrinsic`), the matching camera pose in the object frame
/// (`local_extrinsic`) and the anisotropic scale.
///
/// The result is `[R_w|t_w] · [R_l|t_l]⁻¹ · diag(S, 1)`.
pub fn compose_object_world<T: Real>(
    world_extrinsic: &RigidExtrinsic<T>,
    local_extrinsic: &RigidExtrinsic<T>,
    scale: &AnisotropicScale<T>,
) -> Result<ObjectWorldTransform<T>> {
    // Re-validate: scale may have been built through `from_log`.
    let scale = AnisotropicScale::from_vector(*scale.factors())?;
    Ok(ObjectWorldTransform::from_factors(
        *world_extrinsic,
        *local_extrinsic,
        scale,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::extrinsic::tests::random_extrinsic;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_scale(rng: &mut ChaCha8Rng) -> AnisotropicScale<f64> {
        AnisotropicScale::new(
            rng.gen_range(0.2..3.0),
            rng.gen_range(0.2..3.0),
            rng.gen_range(0.2..3.0),
        )
        .unwrap()
    }

    /// Scale, then the inverse local pose, then the world pose, one factor at a time.
    fn staged(
        w: &RigidExtrinsic<f64>,
        l: &RigidExtrinsic<f64>,
        s: &AnisotropicScale<f64>,
        p: &Vector3<f64>,
    ) -> Vector3<f64> {
        let scaled = Vector3::new(p.x * s.factors().x, p.y * s.factors().y, p.z * s.factors().z);
        let lr = l.rotation.to_matrix();
        let in_camera = lr.transpose() * (scaled - l.translation);
        w.rotation.to_matrix() * in_camera + w.translation
    }

    #[test]
    fn identity_inputs_give_identity() {
        let id = RigidExtrinsic::<f64>::identity();
        let t = compose_object_world(&id, &id, &AnisotropicScale::identity()).unwrap();
        assert_eq!(*t.matrix(), Matrix4::identity());
    }

    #[test]
    fn uniform_scale_two() {
        let id = RigidExtrinsic::identity();
        let t = compose_object_world(&id, &id, &AnisotropicScale::uniform(2.0).unwrap()).unwrap();
        let p = t.apply_point(&Vector3::new(1.0, -2.0, 0.5));
        assert_eq!(p, Vector3::new(2.0, -4.0, 1.0));
    }

    #[test]
    fn staged_application_oracle_on_random_triples() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let w = random_extrinsic(&mut rng);
            let l = random_extrinsic(&mut rng);
            let s = random_scale(&mut rng);
            let t = compose_object_world(&w, &l, &s).unwrap();
            for p in [
                Vector3::new(1.0, 0.0, 0.0),
                Vector3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), 0.3),
            ] {
                assert!((t.apply_point(&p) - staged(&w, &l, &s, &p)).norm() < 1e-9);
            }
            let dense = w.to_matrix()
                * l.to_matrix().try_inverse().unwrap()
                * Matrix4::from_diagonal(&nalgebra::Vector4::new(
                    s.factors().x,
                    s.factors().y,
                    s.factors().z,
                    1.0,
                ));
            assert!((t.matrix() - dense).abs().max() < 1e-9);
            assert_eq!(t.matrix().row(3).into_owned(), nalgebra::RowVector4::new(0.0, 0.0, 0.0, 1.0));
            assert!(t.polar_residual() < 1e-7);
        }
    }

    #[test]
    fn inverse_matrix_is_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let t = compose_object_world(
            &random_extrinsic(&mut rng),
            &random_extrinsic(&mut rng),
            &random_scale(&mut rng),
        )
        .unwrap();
        assert!((t.matrix() * t.inverse_matrix() - Matrix4::identity()).abs().max() < 1e-9);
    }

    #[test]
    fn left_compose_keeps_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let t = compose_object_world(
            &random_extrinsic(&mut rng),
            &random_extrinsic(&mut rng),
            &random_scale(&mut rng),
        )
        .unwrap();
        let d = random_extrinsic(&mut rng);
        let u = t.left_compose(&d);
        assert_eq!(u.scale(), t.scale());
        assert!((u.matrix() - d.to_matrix() * t.matrix()).abs().max() < 1e-9);
    }

    #[test]
    fn rejects_non_positive_scale() {
        let id = RigidExtrinsic::<f64>::identity();
        let bad = AnisotropicScale::from_log(&Vector3::new(0.0, f64::NEG_INFINITY, 0.0));
        assert!(compose_object_world(&id, &id, &bad).is_err());
    }
}
