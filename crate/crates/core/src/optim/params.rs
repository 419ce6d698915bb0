use nalgebra::{Matrix3, SVector, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AnisotropicScale, ObjectWorldTransform, RigidExtrinsic, Rotation};
use crate::scalar::Real;

/// Packed parameter vector: `[qw, qx, qy, qz, tx, ty, tz, ln sx, ln sy, ln sz]`.
pub type ParamVector<T> = SVector<T, 10>;

/// Optimization variables of one object pose.
///
/// A point `p` of the source is mapped to `R (S p) + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseParams<T: Real> {
    /// Unit quaternion (w, x, y, z).
    pub quaternion: Vector4<T>,
    pub translation: Vector3<T>,
    pub log_scale: Vector3<T>,
}

impl<T: Real> Default for PoseParams<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> PoseParams<T> {
    pub fn identity() -> Self {
        Self {
            quaternion: Vector4::new(T::one(), T::zero(), T::zero(), T::zero()),
            translation: Vector3::zeros(),
            log_scale: Vector3::zeros(),
        }
    }

    pub fn new(rotation: &Rotation<T>, translation: Vector3<T>, scale: &AnisotropicScale<T>) -> Self {
        Self { quaternion: rotation.as_vector4(), translation, log_scale: scale.log() }
    }

    pub fn from_transform(t: &ObjectWorldTransform<T>) -> Self {
        Self::new(&t.rotation(), t.translation(), t.scale())
    }

    pub fn rotation(&self) -> Rotation<T> {
        let q = self.quaternion;
        Rotation::from_wxyz(q[0], q[1], q[2], q[3]).unwrap_or_else(|_| Rotation::identity())
    }

    pub fn rotation_matrix(&self) -> Matrix3<T> {
        let q = self.quaternion.normalize();
        crate::geometry::quaternion_matrix(q[0], q[1], q[2], q[3])
    }

    pub fn scale(&self) -> AnisotropicScale<T> {
        AnisotropicScale::from_log(&self.log_scale)
    }

    pub fn scale_factors(&self) -> Vector3<T> {
        self.log_scale.map(|l| l.exp())
    }

    pub fn rigid(&self) -> RigidExtrinsic<T> {
        RigidExtrinsic::new(self.rotation(), self.translation)
    }

    pub fn to_transform(&self) -> ObjectWorldTransform<T> {
        ObjectWorldTransform::from_rigid_scale(self.rigid(), self.scale())
    }

    pub fn apply(&self, p: &Vector3<T>) -> Vector3<T> {
        self.rotation_matrix() * p.component_mul(&self.scale_factors()) + self.translation
    }

    pub fn apply_all(&self, pts: &[Vector3<T>]) -> Vec<Vector3<T>> {
        let r = self.rotation_matrix();
        let s = self.scale_factors();
        pts.iter().map(|p| r * p.component_mul(&s) + self.translation).collect()
    }

    pub fn to_vector(&self) -> ParamVector<T> {
        let mut v = ParamVector::zeros();
        v.fixed_rows_mut::<4>(0).copy_from(&self.quaternion);
        v.fixed_rows_mut::<3>(4).copy_from(&self.translation);
        v.fixed_rows_mut::<3>(7).copy_from(&self.log_scale);
        v
    }

    /// Unpacks a parameter vector, renormalizing the quaternion.
    pub fn from_vector(v: &ParamVector<T>) -> Result<Self> {
        let q: Vector4<T> = v.fixed_rows::<4>(0).into_owned();
        let n = q.norm();
        if !(n > T::zero()) || !n.is_finite_value() {
            return Err(Error::NonFinite("quaternion"));
        }
        Ok(Self {
            quaternion: q / n,
            translation: v.fixed_rows::<3>(4).into_owned(),
            log_scale: v.fixed_rows::<3>(7).into_owned(),
        })
    }

    /// Clamps each scale factor into `[lo, hi]`.
    pub fn clamp_scale(&mut self, lo: f64, hi: f64) {
        let (a, b) = (T::lit(lo.ln()), T::lit(hi.ln()));
        self.log_scale = self.log_scale.map(|l| crate::scalar::min(crate::scalar::max(l, a), b));
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|x| x.is_finite_value())
    }
}

/// Knobs of the pose optimizers. Step sizes are per unit of the Adam-normalized
/// direction; the translation step is relative to the target cloud radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    pub rotation_step: f64,
    pub translation_step: f64,
    pub log_scale_step: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Converged once the loss drop over one refresh window is at most
    /// `tolerance_abs + tolerance_rel * loss`.
    pub tolerance_rel: f64,
    pub tolerance_abs: f64,
    pub refresh_period: usize,
    pub sample_count: usize,
    pub scale_min: f64,
    pub scale_max: f64,
    pub seed: u64,
    pub optimize_scale: bool,
    pub restarts: usize,
    /// Mask term weight for the RGBD optimizer; 0 disables the mask term.
    pub mask_weight: f64,
    /// Longest side of the raster used by the mask term.
    pub mask_resolution: usize,
    /// Finite-difference step of the mask gradient, in pixels.
    pub mask_fd_pixels: f64,
    pub icp_iterations: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iterations: 400,
            rotation_step: 0.01,
            translation_step: 0.01,
            log_scale_step: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            tolerance_rel: 1e-6,
            tolerance_abs: 1e-14,
            refresh_period: 10,
            sample_count: 4096,
            scale_min: 0.2,
            scale_max: 5.0,
            seed: 0,
            optimize_scale: true,
            restarts: 8,
            mask_weight: 0.1,
            mask_resolution: 256,
            mask_fd_pixels: 1.5,
            icp_iterations: 50,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.rotation_step,
            self.translation_step,
            self.log_scale_step,
            self.tolerance_rel,
            self.tolerance_abs,
            self.scale_min,
            self.mask_fd_pixels,
        ];
        if self.max_iterations == 0 || self.refresh_period == 0 || self.sample_count == 0 {
            return Err(Error::InvalidArgument("iteration counts must be at least 1".into()));
        }
        if positive.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(Error::InvalidArgument("steps and tolerances must be positive".into()));
        }
        if !(self.scale_max > self.scale_min) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::InvalidArgument("invalid scale bounds or momentum".into()));
        }
        if !(self.mask_weight >= 0.0) || self.mask_resolution < 8 {
            return Err(Error::InvalidArgument("invalid mask settings".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AlignMethod {
    #[serde(rename = "opt-mesh")]
    OptMesh,
    #[serde(rename = "opt-rgbd")]
    OptRgbd,
    #[serde(rename = "icp")]
    Icp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignStatus {
    Converged,
    MaxIterations,
    Diverged,
    LocalMinimum,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub chamfer: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<f64>,
    pub total: f64,
}

/// One pseudo-geometry label: the fitted (R*, t*, S*) with diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentRecord {
    pub object_id: usize,
    pub method: AlignMethod,
    /// Unit quaternion (w, x, y, z).
    pub rotation: [f64; 4],
    pub translation: [f64; 3],
    pub scale: [f64; 3],
    pub loss: LossBreakdown,
    pub initial_loss: f64,
    pub iterations: usize,
    pub status: AlignStatus,
}

impl AlignmentRecord {
    pub(crate) fn from_params<T: Real>(
        method: AlignMethod,
        params: &PoseParams<T>,
        loss: LossBreakdown,
        initial_loss: f64,
        iterations: usize,
        status: AlignStatus,
    ) -> Self {
        let f = |v: T| v.to_f64_lossy();
        let q = params.rotation().as_vector4();
        let s = params.scale_factors();
        Self {
            object_id: 0,
            method,
            rotation: [f(q[0]), f(q[1]), f(q[2]), f(q[3])],
            translation: [f(params.translation.x), f(params.translation.y), f(params.translation.z)],
            scale: [f(s.x), f(s.y), f(s.z)],
            loss,
            initial_loss,
            iterations,
            status,
        }
    }

    pub fn with_object_id(mut self, id: usize) -> Self {
        self.object_id = id;
        self
    }

    pub fn params<T: Real>(&self) -> Result<PoseParams<T>> {
        let r = Rotation::from_wxyz(
            T::lit(self.rotation[0]),
            T::lit(self.rotation[1]),
            T::lit(self.rotation[2]),
            T::lit(self.rotation[3]),
        )?;
        let s = AnisotropicScale::new(T::lit(self.scale[0]), T::lit(self.scale[1]), T::lit(self.scale[2]))?;
        Ok(PoseParams::new(&r, Vector3::new(T::lit(self.translation[0]), T::lit(self.translation[1]), T::lit(self.translation[2])), &s))
    }

    pub fn transform<T: Real>(&self) -> Result<ObjectWorldTransform<T>> {
        Ok(self.params()?.to_transform())
    }

    pub fn is_converged(&self) -> bool {
        self.status == AlignStatus::Converged
    }

    /// Marks the record as stuck in a local minimum when its loss exceeds
    /// `factor` times a known optimum.
    pub fn flag_local_minimum(&mut self, optimum: f64, factor: f64) -> bool {
        if self.loss.total > factor * optimum {
            self.status = AlignStatus::LocalMinimum;
            true
        } else {
            false
        }
    }

    pub fn validate(&self) -> Result<()> {
        let l = &self.loss;
        let vals = [l.chamfer, l.total, l.mask.unwrap_or(0.0), self.initial_loss];
        if vals.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::NonFinite("alignment loss"));
        }
        Ok(())
    }
}
