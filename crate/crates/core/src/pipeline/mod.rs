//! Placing generated objects into the panorama's world frame: transform
//! sources, crop-extrinsic resolution, coarse-to-fine refinement and scene
//! fusion.

mod refine;
mod scene;
mod source;

pub use refine::{
    c2f_refine, clamp_step, default_local_refiner, C2fConfig, C2fTrace, LocalRefiner,
    RefineContext, Refiner, RefinerStep, StopReason,
};
pub use scene::{
    fuse_scene, Background, ManifestEntry, ObjectGeometry, SceneGraph, SceneInstance,
    SceneManifest,
};
pub use source::{
    align_object, resolve_crop_extrinsic, AlignedObject, ExtrinsicRecord, FileSource, FitMethod,
    ObjectObservation, OptimizerSource, Prediction, PredictionRecord, TransformSource,
};
