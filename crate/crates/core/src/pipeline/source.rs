use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    compose_object_world, sample_mesh_surface, AnisotropicScale, ObjectWorldTransform,
    PinholeCamera, RigidExtrinsic, Rotation, TriangleMesh,
};
use crate::optim::{
    icp_align, initial_guesses, opt_align_rgbd, AlignmentRecord, OptimizerConfig, PoseParams,
};
use crate::panorama::InstanceMask;
use crate::raster::{rasterize_silhouette, ViewRig};
use crate::scalar::Real;

/// What a transform source gets to see for one object.
#[derive(Clone, Copy, Debug)]
pub struct ObjectObservation<'a, T: Real> {
    pub object_id: usize,
    /// Object geometry in its own re-centered frame.
    pub mesh: &'a TriangleMesh<T>,
    /// Cameras of the rendered object views, in the object frame.
    pub rig: &'a ViewRig<T>,
    /// Crop camera in the world frame.
    pub crop: &'a PinholeCamera<T>,
    pub crop_mask: &'a InstanceMask,
    /// World points lifted from the panorama depth inside the object's mask.
    pub target: &'a [Vector3<T>],
}

/// Predicted world-to-camera extrinsics in the predictor's own frame (entry 0
/// is the crop camera, entry `v` the rig's view `v - 1`) and the object scale.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction<T: Real> {
    pub extrinsics: Vec<RigidExtrinsic<T>>,
    pub scale: AnisotropicScale<T>,
    /// Fit diagnostics when an optimizer produced the prediction.
    pub record: Option<AlignmentRecord>,
}

impl<T: Real> Prediction<T> {
    /// Prediction expressed in the object frame that reproduces `pose` exactly.
    pub fn from_object_pose(
        rig: &ViewRig<T>,
        crop_extrinsic: &RigidExtrinsic<T>,
        pose: &ObjectWorldTransform<T>,
    ) -> Self {
        let mut extrinsics = vec![crop_extrinsic.compose(&pose.rigid())];
        extrinsics.extend(rig.views().iter().map(|c| c.extrinsic));
        Self { extrinsics, scale: *pose.scale(), record: None }
    }

    /// Re-expresses every extrinsic in another predictor frame related to the
    /// current one by `g` (frame point `x` becomes `g x`).
    pub fn in_frame(&self, g: &RigidExtrinsic<T>) -> Self {
        let g_inv = g.inverse();
        Self {
            extrinsics: self.extrinsics.iter().map(|e| e.compose(&g_inv)).collect(),
            ..self.clone()
        }
    }
}

/// Provider of predicted extrinsics and scale for one object.
pub trait TransformSource<T: Real>: Sync {
    fn predict(&self, obs: &ObjectObservation<'_, T>) -> Result<Prediction<T>>;
}

/// Crop camera extrinsic in the object frame from two predicted views:
/// `(Ê_0 Ê_1⁻¹) E_1`, with `E_1` the rig's first view.
pub fn resolve_crop_extrinsic<T: Real>(
    predicted: &[RigidExtrinsic<T>],
    rig: &ViewRig<T>,
) -> Result<RigidExtrinsic<T>> {
    if predicted.len() < 2 {
        return Err(Error::MissingView(predicted.len()));
    }
    let e1 = rig.views().first().ok_or(Error::MissingView(1))?.extrinsic;
    Ok(predicted[0].compose(&predicted[1].inverse()).compose(&e1))
}

/// Object placed in the world with its silhouette agreement in the crop.
#[derive(Clone, Debug)]
pub struct AlignedObject<T: Real> {
    pub object_id: usize,
    pub transform: ObjectWorldTransform<T>,
    /// Resolved crop camera extrinsic in the object frame.
    pub crop_in_object: RigidExtrinsic<T>,
    pub silhouette_iou: f64,
    pub record: Option<AlignmentRecord>,
}

pub fn align_object<T: Real, S: TransformSource<T> + ?Sized>(
    obs: &ObjectObservation<'_, T>,
    source: &S,
) -> Result<AlignedObject<T>> {
    let pred = source.predict(obs)?;
    let expected = obs.rig.len() + 1;
    if pred.extrinsics.len() != expected {
        return Err(Error::InvalidArgument(format!(
            "source returned {} extrinsics, expected {expected}",
            pred.extrinsics.len()
        )));
    }
    let crop_in_object = resolve_crop_extrinsic(&pred.extrinsics, obs.rig)?;
    let transform =
        compose_object_world(&obs.crop.extrinsic.inverse(), &crop_in_object.inverse(), &pred.scale)?;
    let rendered = rasterize_silhouette(&obs.mesh.transformed(&transform), obs.crop).mask();
    let silhouette_iou = rendered.iou(obs.crop_mask)?;
    let record = pred.record.map(|r| r.with_object_id(obs.object_id));
    Ok(AlignedObject { object_id: obs.object_id, transform, crop_in_object, silhouette_iou, record })
}

/// Serialized rigid extrinsic: `[w, x, y, z]` quaternion and translation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtrinsicRecord {
    pub rotation: [f64; 4],
    pub translation: [f64; 3],
}

impl ExtrinsicRecord {
    pub fn from_extrinsic<T: Real>(e: &RigidExtrinsic<T>) -> Self {
        let f = |v: T| v.to_f64_lossy();
        Self {
            rotation: e.rotation.wxyz().map(f),
            translation: [f(e.translation.x), f(e.translation.y), f(e.translation.z)],
        }
    }

    pub fn to_extrinsic<T: Real>(&self) -> Result<RigidExtrinsic<T>> {
        let [w, x, y, z] = self.rotation.map(T::lit);
        Ok(RigidExtrinsic::new(
            Rotation::from_wxyz(w, x, y, z)?,
            Vector3::from(self.translation.map(T::lit)),
        ))
    }
}

/// One line of a predictions file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub object_id: usize,
    pub extrinsics: Vec<ExtrinsicRecord>,
    pub scale: [f64; 3],
}

impl PredictionRecord {
    pub fn from_prediction<T: Real>(object_id: usize, p: &Prediction<T>) -> Self {
        let s = p.scale.factors();
        Self {
            object_id,
            extrinsics: p.extrinsics.iter().map(ExtrinsicRecord::from_extrinsic).collect(),
            scale: [s.x, s.y, s.z].map(|v| v.to_f64_lossy()),
        }
    }

    pub fn to_prediction<T: Real>(&self) -> Result<Prediction<T>> {
        Ok(Prediction {
            extrinsics: self.extrinsics.iter().map(|e| e.to_extrinsic()).collect::<Result<_>>()?,
            scale: AnisotropicScale::from_vector(Vector3::from(self.scale.map(T::lit)))?,
            record: None,
        })
    }
}

/// Externally predicted extrinsics and scales keyed by object id.
#[derive(Clone, Debug, Default)]
pub struct FileSource {
    records: BTreeMap<usize, PredictionRecord>,
}

impl FileSource {
    pub fn new(records: Vec<PredictionRecord>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for r in records {
            let id = r.object_id;
            if map.insert(id, r).is_some() {
                return Err(Error::DuplicateId(id.to_string()));
            }
        }
        Ok(Self { records: map })
    }

    /// Reads a JSON-lines predictions file.
    pub fn load(path: &Path) -> Result<Self> {
        Self::new(crate::io::read_jsonl(path)?)
    }

    pub fn records(&self) -> impl Iterator<Item = &PredictionRecord> {
        self.records.values()
    }
}

impl<T: Real> TransformSource<T> for FileSource {
    fn predict(&self, obs: &ObjectObservation<'_, T>) -> Result<Prediction<T>> {
        self.records
            .get(&obs.object_id)
            .ok_or_else(|| Error::UnknownObject(obs.object_id.to_string()))?
            .to_prediction()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    /// RGBD optimizer against the lifted depth and the crop mask.
    Opt,
    /// Normalized point-to-point ICP against the lifted depth.
    Icp,
}

const SCALE_JITTER: f64 = 0.08;

/// Fits the pose directly against the observation and reports it as a
/// prediction in the object frame.
#[derive(Clone, Debug)]
pub struct OptimizerSource<T: Real> {
    pub method: FitMethod,
    pub cfg: OptimizerConfig,
    /// Initial object-to-world poses by object id; objects without one start
    /// from the box-ratio yaw restarts.
    pub inits: BTreeMap<usize, PoseParams<T>>,
}

impl<T: Real> OptimizerSource<T> {
    pub fn new(method: FitMethod, cfg: OptimizerConfig) -> Self {
        Self { method, cfg, inits: BTreeMap::new() }
    }

    pub fn with_inits(mut self, inits: BTreeMap<usize, PoseParams<T>>) -> Self {
        self.inits = inits;
        self
    }

    /// The init plus one start per scale axis pushed either way; partial
    /// depth leaves scale valleys the local search alone does not escape.
    fn jittered(&self, p: PoseParams<T>) -> Vec<PoseParams<T>> {
        let mut starts = vec![p];
        if self.cfg.optimize_scale {
            for a in 0..3 {
                for d in [SCALE_JITTER, -SCALE_JITTER] {
                    let mut q = p;
                    q.log_scale[a] += T::lit(d);
                    q.clamp_scale(self.cfg.scale_min, self.cfg.scale_max);
                    starts.push(q);
                }
            }
        }
        starts
    }

    fn fit(&self, obs: &ObjectObservation<'_, T>) -> Result<(PoseParams<T>, AlignmentRecord)> {
        if obs.target.is_empty() {
            return Err(Error::EmptyInput("no depth points inside the object mask"));
        }
        let init = self.inits.get(&obs.object_id).copied();
        match self.method {
            FitMethod::Opt => {
                let starts = match init {
                    Some(p) => self.jittered(p),
                    None => {
                        let samples =
                            sample_mesh_surface(obs.mesh, self.cfg.sample_count, self.cfg.seed)?;
                        initial_guesses(samples.points(), obs.target, self.cfg.restarts, &self.cfg)?
                    }
                };
                let fits: Vec<Result<AlignmentRecord>> = starts
                    .par_iter()
                    .map(|p| {
                        opt_align_rgbd(obs.target, obs.mesh, obs.crop_mask, obs.crop, p, &self.cfg)
                    })
                    .collect();
                let mut best: Option<AlignmentRecord> = None;
                for r in fits {
                    let r = r?;
                    if best.as_ref().is_none_or(|b| r.loss.total < b.loss.total) {
                        best = Some(r);
                    }
                }
                let rec = best.ok_or(Error::EmptyInput("no starting poses"))?;
                Ok((rec.params()?, rec))
            }
            FitMethod::Icp => {
                let start = init.unwrap_or_else(PoseParams::identity);
                let samples = sample_mesh_surface(obs.mesh, self.cfg.sample_count, self.cfg.seed)?;
                let moved = start.apply_all(samples.points());
                let rec = icp_align(&moved, obs.target, &self.cfg)?;
                let icp: PoseParams<T> = rec.params()?;
                // x -> s R (R0 S0 p + t0) + t, with s R as the ICP linear part.
                let s = icp.scale_factors().x;
                let rot = icp.rotation().compose(&start.rotation());
                let t = icp.rotation().rotate(&start.translation) * s + icp.translation;
                let scale = AnisotropicScale::from_vector(start.scale_factors() * s)?;
                Ok((PoseParams::new(&rot, t, &scale), rec))
            }
        }
    }
}

impl<T: Real> TransformSource<T> for OptimizerSource<T> {
    fn predict(&self, obs: &ObjectObservation<'_, T>) -> Result<Prediction<T>> {
        let (pose, rec) = self.fit(obs)?;
        let f = |v: T| v.to_f64_lossy();
        let q = pose.rotation().as_vector4();
        let s = pose.scale_factors();
        let rec = AlignmentRecord {
            rotation: [f(q[0]), f(q[1]), f(q[2]), f(q[3])],
            translation: [f(pose.translation.x), f(pose.translation.y), f(pose.translation.z)],
            scale: [f(s.x), f(s.y), f(s.z)],
            ..rec
        };
        let mut pred = Prediction::from_object_pose(obs.rig, &obs.crop.extrinsic, &pose.to_transform());
        pred.record = Some(rec);
        Ok(pred)
    }
}
