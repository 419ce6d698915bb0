use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    sample_mesh_surface, ObjectWorldTransform, PinholeCamera, RigidExtrinsic, Rotation,
    TriangleMesh,
};
use crate::metrics::chamfer_single;
use crate::optim::{opt_align_rgbd, OptimizerConfig, PoseParams};
use crate::panorama::{backproject_pano_depth, InstanceMask, PanoramaImage};
use crate::scalar::Real;

/// Everything one refinement step may look at. The object samples are drawn
/// once so every CD evaluation in a run uses the same set.
#[derive(Clone, Debug)]
pub struct RefineContext<'a, T: Real> {
    pub mesh: &'a TriangleMesh<T>,
    pub crop: &'a PinholeCamera<T>,
    pub crop_mask: &'a InstanceMask,
    /// World points lifted from the panorama depth inside the object mask.
    pub target: Vec<Vector3<T>>,
    /// Object-frame surface samples.
    pub samples: Vec<Vector3<T>>,
}

impl<'a, T: Real> RefineContext<'a, T> {
    pub fn new(
        mesh: &'a TriangleMesh<T>,
        crop: &'a PinholeCamera<T>,
        crop_mask: &'a InstanceMask,
        target: Vec<Vector3<T>>,
        sample_count: usize,
        seed: u64,
    ) -> Result<Self> {
        if target.is_empty() {
            return Err(Error::EmptyInput("no depth points inside the object mask"));
        }
        let samples = sample_mesh_surface(mesh, sample_count, seed)?.into_points();
        Ok(Self { mesh, crop, crop_mask, target, samples })
    }

    /// Lifts the panorama depth under `pano_mask` to get the target.
    pub fn from_panorama(
        mesh: &'a TriangleMesh<T>,
        crop: &'a PinholeCamera<T>,
        crop_mask: &'a InstanceMask,
        pano_depth: &PanoramaImage<T>,
        pano_mask: &InstanceMask,
        sample_count: usize,
        seed: u64,
    ) -> Result<Self> {
        let target = backproject_pano_depth(pano_depth, pano_mask, 1)?.cloud.into_points();
        Self::new(mesh, crop, crop_mask, target, sample_count, seed)
    }

    /// Target-to-object Chamfer distance with the object placed by `t`.
    pub fn chamfer(&self, t: &ObjectWorldTransform<T>) -> Result<T> {
        let placed: Vec<_> = self.samples.iter().map(|p| t.apply_point(p)).collect();
        chamfer_single(&self.target, &placed)
    }
}

/// Rigid world-side update `T ← Δ ∘ T`; scale is never touched.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RefinerStep<T: Real> {
    pub delta: RigidExtrinsic<T>,
    /// Set when the refiner discarded its own proposal.
    pub rejected: bool,
}

impl<T: Real> RefinerStep<T> {
    pub fn identity() -> Self {
        Self { delta: RigidExtrinsic::identity(), rejected: false }
    }

    pub fn angle(&self) -> T {
        self.delta.rotation.angle()
    }

    /// How far the update moves the point `center` (normally the object origin).
    pub fn displacement(&self, center: &Vector3<T>) -> Vector3<T> {
        self.delta.apply(center) - center
    }
}

pub trait Refiner<T: Real> {
    fn step(
        &mut self,
        current: &ObjectWorldTransform<T>,
        ctx: &RefineContext<'_, T>,
    ) -> Result<RefinerStep<T>>;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct C2fConfig {
    /// Stop once one step improves the CD by less than this.
    pub tau: f64,
    pub max_steps: usize,
    pub sample_count: usize,
    pub seed: u64,
}

impl Default for C2fConfig {
    fn default() -> Self {
        Self { tau: 0.001, max_steps: 5, sample_count: 4096, seed: 0 }
    }
}

impl C2fConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0) || self.max_steps == 0 || self.sample_count == 0 {
            return Err(Error::InvalidArgument("c2f needs tau > 0 and at least one step".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Improvement fell below tau.
    Converged,
    MaxSteps,
    RefinerFailed(String),
}

/// Per-object record of a refinement run: one CD entry per applied step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct C2fTrace {
    pub object_id: usize,
    pub initial_cd: f64,
    pub cd: Vec<f64>,
    pub rejected: Vec<bool>,
    pub stop: StopReason,
}

impl C2fTrace {
    pub fn final_cd(&self) -> f64 {
        self.cd.last().copied().unwrap_or(self.initial_cd)
    }
}

/// Coarse-to-fine loop: applies refiner updates on the world side until the CD
/// improvement drops below `tau` or `max_steps` updates were applied. A failing
/// refiner ends the run with the best pose seen so far.
pub fn c2f_refine<T: Real, R: Refiner<T> + ?Sized>(
    initial: &ObjectWorldTransform<T>,
    ctx: &RefineContext<'_, T>,
    refiner: &mut R,
    cfg: &C2fConfig,
    object_id: usize,
) -> Result<(ObjectWorldTransform<T>, C2fTrace)> {
    cfg.validate()?;
    let tau = T::lit(cfg.tau);
    let initial_cd = ctx.chamfer(initial)?;
    let mut trace = C2fTrace {
        object_id,
        initial_cd: initial_cd.to_f64_lossy(),
        cd: Vec::new(),
        rejected: Vec::new(),
        stop: StopReason::MaxSteps,
    };
    let mut current = *initial;
    let mut cd = initial_cd;
    let mut best = (current, cd);
    for _ in 0..cfg.max_steps {
        let step = match refiner.step(&current, ctx) {
            Ok(s) => s,
            Err(e) => {
                trace.stop = StopReason::RefinerFailed(e.to_string());
                return Ok((best.0, trace));
            }
        };
        current = current.left_compose(&step.delta);
        let next = ctx.chamfer(&current)?;
        trace.cd.push(next.to_f64_lossy());
        trace.rejected.push(step.rejected);
        if next < best.1 {
            best = (current, next);
        }
        let improvement = cd - next;
        cd = next;
        if improvement < tau {
            trace.stop = StopReason::Converged;
            break;
        }
    }
    Ok((current, trace))
}

/// Limits a world-side update measured about the object's origin `center`:
/// the rotation angle to `max_angle` and the displacement of `center` to
/// `max_translation`.
pub fn clamp_step<T: Real>(
    delta: &RigidExtrinsic<T>,
    center: &Vector3<T>,
    max_angle: T,
    max_translation: T,
) -> RigidExtrinsic<T> {
    let mut v = delta.rotation.to_rotation_vector();
    let angle = v.norm();
    if angle > max_angle {
        v *= max_angle / angle;
    }
    let rot = Rotation::from_rotation_vector(&v);
    let mut shift = delta.apply(center) - center;
    let dist = shift.norm();
    if dist > max_translation {
        shift *= max_translation / dist;
    }
    // Rotate about `center`, then move it by `shift`.
    let t = center + shift - rot.rotate(center);
    RigidExtrinsic::new(rot, t)
}

/// Stand-in for a learned refiner: a short RGBD fit with frozen scale whose
/// result is turned into a clamped relative update, kept only if it does not
/// raise the CD.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalRefiner {
    pub cfg: OptimizerConfig,
    pub max_rotation_deg: f64,
    /// Largest move of the object origin, as a fraction of the placed
    /// object's bounding-box diagonal.
    pub max_translation_fraction: f64,
}

impl Default for LocalRefiner {
    fn default() -> Self {
        default_local_refiner()
    }
}

pub fn default_local_refiner() -> LocalRefiner {
    LocalRefiner {
        cfg: OptimizerConfig { optimize_scale: false, max_iterations: 60, ..Default::default() },
        max_rotation_deg: 15.0,
        max_translation_fraction: 0.1,
    }
}

impl<T: Real> Refiner<T> for LocalRefiner {
    fn step(
        &mut self,
        current: &ObjectWorldTransform<T>,
        ctx: &RefineContext<'_, T>,
    ) -> Result<RefinerStep<T>> {
        let init = PoseParams::from_transform(current);
        let rec = opt_align_rgbd(&ctx.target, ctx.mesh, ctx.crop_mask, ctx.crop, &init, &self.cfg)?;
        let fitted: PoseParams<T> = rec.params()?;
        let raw = fitted.rigid().compose(&current.rigid().inverse());
        let diameter = ctx.mesh.transformed(current).bbox()?.diagonal();
        let delta = clamp_step(
            &raw,
            &current.translation(),
            T::lit(self.max_rotation_deg.to_radians()),
            diameter * T::lit(self.max_translation_fraction),
        );
        let before = ctx.chamfer(current)?;
        let after = ctx.chamfer(&current.left_compose(&delta))?;
        if after > before {
            return Ok(RefinerStep { delta: RigidExtrinsic::identity(), rejected: true });
        }
        Ok(RefinerStep { delta, rejected: false })
    }
}
