//! Synthetic rooms: primitive objects standing on the floor of a box room,
//! ray-cast into an equirectangular depth panorama from the room center.

use std::path::Path;

use anyhow::{bail, Context};
use nalgebra::Vector3;
use panoalign::geometry::primitives::{cuboid, cylinder, l_shape, uv_sphere};
use panoalign::geometry::{
    AnisotropicScale, ObjectWorldTransform, RigidExtrinsic, Rotation, TriangleMesh,
};
use panoalign::io::{write_jsonl, write_mask_png, write_obj, write_pfm, write_json, TransformRecord};
use panoalign::panorama::{crop_spec_for_mask, CropSpec, InstanceMask, PanoramaImage};
use panoalign::pipeline::{Prediction, PredictionRecord};
use panoalign::raster::{default_view_rig, render_panorama};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    Box,
    Cylinder,
    Sphere,
    LShape,
}

impl Shape {
    /// Re-centered mesh with roughly unit extents.
    pub fn mesh(self) -> TriangleMesh<f64> {
        let mut m = match self {
            Shape::Box => cuboid(Vector3::new(1.0, 0.8, 0.6)),
            Shape::Cylinder => cylinder(0.35, 0.9, 32),
            Shape::Sphere => uv_sphere(0.4, 32, 16),
            Shape::LShape => l_shape(1.2, 0.8, 0.35, 0.6),
        };
        m.recenter().expect("primitive is not empty");
        m
    }

    /// Shapes whose rotation the geometry alone does not determine.
    pub fn is_symmetric(self) -> bool {
        matches!(self, Shape::Cylinder | Shape::Sphere)
    }
}

/// Initial-pose noise applied on top of the ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Perturbation {
    pub rotation_deg: f64,
    /// Largest translation offset, as a fraction of the scene diameter.
    pub translation_fraction: f64,
    pub scale_range: [f64; 2],
}

impl Default for Perturbation {
    fn default() -> Self {
        Self { rotation_deg: 15.0, translation_fraction: 0.05, scale_range: [0.8, 1.25] }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSceneSpec {
    /// Half extents of the box room; the panorama center is the room center.
    pub room_half_extents: [f64; 3],
    pub objects: usize,
    pub shapes: Vec<Shape>,
    /// Yaw is drawn from `[-yaw_range_deg, yaw_range_deg]`; objects stay upright.
    pub yaw_range_deg: f64,
    pub scale_range: [f64; 2],
    /// Objects keep at least this horizontal distance from the panorama center.
    pub min_distance: f64,
    /// Clearance kept between object boxes and to the walls.
    pub gap: f64,
    pub max_retries: usize,
    pub pano_width: usize,
    pub pano_height: usize,
    pub crop_padding: f64,
    pub crop_resolution: usize,
    pub perturbation: Perturbation,
    pub seed: u64,
}

impl Default for SyntheticSceneSpec {
    fn default() -> Self {
        // 2 * |half extents| = 10, camera 1.4 above the floor.
        let h = (25.0f64 - 1.4 * 1.4).sqrt() / std::f64::consts::SQRT_2;
        Self {
            room_half_extents: [h, 1.4, h],
            objects: 4,
            shapes: vec![Shape::Box, Shape::Cylinder, Shape::Sphere, Shape::LShape],
            yaw_range_deg: 180.0,
            scale_range: [0.8, 1.25],
            min_distance: 1.5,
            gap: 0.1,
            max_retries: 200,
            pano_width: 1024,
            pano_height: 512,
            crop_padding: 0.2,
            crop_resolution: 518,
            perturbation: Perturbation::default(),
            seed: 0,
        }
    }
}

impl SyntheticSceneSpec {
    /// Length of the room diagonal.
    pub fn diameter(&self) -> f64 {
        2.0 * Vector3::from(self.room_half_extents).norm()
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.room_half_extents.iter().any(|h| !(*h > 0.0)) {
            bail!("room half extents must be positive");
        }
        if self.objects > 0 && self.shapes.is_empty() {
            bail!("no shapes to draw objects from");
        }
        let [lo, hi] = self.scale_range;
        if !(lo > 0.0 && hi >= lo) {
            bail!("invalid scale range {lo}..{hi}");
        }
        let [plo, phi] = self.perturbation.scale_range;
        if !(plo > 0.0 && phi >= plo) {
            bail!("invalid perturbation scale range {plo}..{phi}");
        }
        if self.pano_width != 2 * self.pano_height || self.pano_height == 0 {
            bail!("panorama must be 2:1, got {}x{}", self.pano_width, self.pano_height);
        }
        if self.crop_resolution < 8 || !(self.crop_padding >= 0.0) {
            bail!("invalid crop settings");
        }
        Ok(())
    }
}

/// Independent random stream for `(seed, scene, object)`.
pub fn stream(seed: u64, scene: usize, object: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((scene as u64) << 32) ^ object);
    rng
}

#[derive(Clone, Debug)]
pub struct SceneObject {
    pub shape: Shape,
    /// Geometry in its re-centered object frame.
    pub mesh: TriangleMesh<f64>,
    pub gt: ObjectWorldTransform<f64>,
    /// Perturbed starting pose for the optimizers.
    pub init: ObjectWorldTransform<f64>,
    pub mask: InstanceMask,
    /// None when the object is not visible from the panorama center.
    pub crop: Option<CropSpec>,
}

#[derive(Clone, Debug)]
pub struct SyntheticScene {
    pub index: usize,
    pub objects: Vec<SceneObject>,
    pub room: TriangleMesh<f64>,
    pub depth: PanoramaImage<f64>,
}

#[derive(Debug)]
pub struct PlacementError {
    pub placed: usize,
    pub wanted: usize,
    pub partial: SyntheticScene,
}

impl std::fmt::Display for PlacementError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "placed only {} of {} objects", self.placed, self.wanted)
    }
}

impl std::error::Error for PlacementError {}

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Rotates about the object origin and shifts it; scale multiplies per axis.
pub fn perturb(
    gt: &ObjectWorldTransform<f64>,
    p: &Perturbation,
    diameter: f64,
    rng: &mut ChaCha8Rng,
) -> ObjectWorldTransform<f64> {
    let angle = rng.gen_range(0.0..=p.rotation_deg.to_radians());
    let r = Rotation::from_axis_angle(&random_unit(rng), angle).expect("unit axis");
    let shift = random_unit(rng) * rng.gen_range(0.0..=p.translation_fraction * diameter);
    let c = gt.translation();
    let moved = gt.left_compose(&RigidExtrinsic::new(r, c + shift - r.rotate(&c)));
    let f = Vector3::from_fn(|_, _| uniform(rng, p.scale_range));
    let scale = AnisotropicScale::from_vector(gt.scale().factors().component_mul(&f))
        .expect("positive factors");
    ObjectWorldTransform::from_rigid_scale(moved.rigid(), scale)
}

/// One candidate object: shape, and a pose standing on the floor.
fn draw_object(
    spec: &SyntheticSceneSpec,
    rng: &mut ChaCha8Rng,
) -> (Shape, TriangleMesh<f64>, ObjectWorldTransform<f64>) {
    let shape = spec.shapes[rng.gen_range(0..spec.shapes.len())];
    let mesh = shape.mesh();
    let yaw = rng.gen_range(-1.0..=1.0) * spec.yaw_range_deg.to_radians();
    let s = Vector3::from_fn(|_, _| uniform(rng, spec.scale_range));
    let half = mesh.bbox().expect("non-empty").extents().component_mul(&s) * 0.5;
    let [hx, hy, hz] = spec.room_half_extents;
    // Bounding radius in the floor plane, whatever the yaw.
    let r = half.x.hypot(half.z) + spec.gap;
    let x = uniform(rng, [-hx + r, hx - r]);
    let z = uniform(rng, [-hz + r, hz - r]);
    let t = Vector3::new(x, -hy + half.y, z);
    let gt = ObjectWorldTransform::from_rigid_scale(
        RigidExtrinsic::new(Rotation::about_y(yaw), t),
        AnisotropicScale::from_vector(s).expect("positive scale"),
    );
    (shape, mesh, gt)
}

/// Generates scene `index`. Everything is drawn from streams keyed by
/// `(spec.seed, index, object)`, so scenes can be built in any order.
pub fn generate_scene(spec: &SyntheticSceneSpec, index: usize) -> Result<SyntheticScene, PlacementError> {
    let [hx, hy, hz] = spec.room_half_extents;
    let room = cuboid(Vector3::new(2.0 * hx, 2.0 * hy, 2.0 * hz));
    let mut placed: Vec<(Shape, TriangleMesh<f64>, ObjectWorldTransform<f64>)> = Vec::new();
    let mut boxes = Vec::new();
    let mut failed = false;
    for k in 0..spec.objects {
        let mut rng = stream(spec.seed, index, k as u64);
        let mut ok = false;
        for _ in 0..=spec.max_retries {
            let (shape, mesh, gt) = draw_object(spec, &mut rng);
            let b = mesh.transformed(&gt).bbox().expect("non-empty");
            let c = b.center();
            if c.x.hypot(c.z) < spec.min_distance
                || b.min.x < -hx
                || b.max.x > hx
                || b.min.z < -hz
                || b.max.z > hz
            {
                continue;
            }
            let g = Vector3::repeat(spec.gap);
            let grown = panoalign::geometry::Aabb::new(b.min - g, b.max + g).expect("valid box");
            if boxes.iter().any(|o| grown.overlaps(o)) {
                continue;
            }
            boxes.push(b);
            placed.push((shape, mesh, gt));
            ok = true;
            break;
        }
        if !ok {
            failed = true;
            break;
        }
    }
    let scene = render_scene(spec, index, room, placed);
    if failed {
        return Err(PlacementError { placed: scene.objects.len(), wanted: spec.objects, partial: scene });
    }
    Ok(scene)
}

fn render_scene(
    spec: &SyntheticSceneSpec,
    index: usize,
    room: TriangleMesh<f64>,
    placed: Vec<(Shape, TriangleMesh<f64>, ObjectWorldTransform<f64>)>,
) -> SyntheticScene {
    let world: Vec<TriangleMesh<f64>> = placed.iter().map(|(_, m, t)| m.transformed(t)).collect();
    let mut refs: Vec<&TriangleMesh<f64>> = world.iter().collect();
    refs.push(&room);
    let render = render_panorama(&refs, spec.pano_width, spec.pano_height, &Vector3::zeros());
    let objects = placed
        .into_iter()
        .enumerate()
        .map(|(k, (shape, mesh, gt))| {
            // Separate stream so the init does not shift with placement retries.
            let mut rng = stream(spec.seed, index, (1 << 31) | k as u64);
            let init = perturb(&gt, &spec.perturbation, spec.diameter(), &mut rng);
            let mask = render.mask_of(k);
            let crop = crop_spec_for_mask(&mask, spec.crop_padding, spec.crop_resolution).ok();
            SceneObject { shape, mesh, gt, init, mask, crop }
        })
        .collect();
    SyntheticScene { index, objects, room, depth: render.depth }
}

/// Ground-truth predictions in the format a file source reads.
pub fn gt_predictions(scene: &SyntheticScene) -> anyhow::Result<Vec<PredictionRecord>> {
    scene
        .objects
        .iter()
        .enumerate()
        .filter_map(|(k, o)| {
            let crop = o.crop?;
            Some((|| {
                let cam = crop.camera::<f64>()?;
                let rig = default_view_rig(&o.mesh.bbox()?)?;
                let pred = Prediction::from_object_pose(&rig, &cam.extrinsic, &o.gt);
                Ok(PredictionRecord::from_prediction(k, &pred))
            })())
        })
        .collect()
}

#[derive(Serialize)]
struct ObjectEntry {
    index: usize,
    shape: Shape,
    mesh: String,
    mask: String,
    crop: Option<CropSpec>,
    gt: TransformRecord,
    init: TransformRecord,
    mask_pixels: usize,
}

pub fn scene_dir_name(index: usize) -> String {
    format!("scene_{index:03}")
}

/// Writes `scene_XXX/` with the depth panorama (PFM), one mask PNG and OBJ per
/// object, `scene.json` and `gt_predictions.jsonl`.
pub fn write_scene(scene: &SyntheticScene, root: &Path) -> anyhow::Result<()> {
    let dir = root.join(scene_dir_name(scene.index));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_pfm(&dir.join("depth.pfm"), scene.depth.image())?;
    let mut entries = Vec::new();
    for (k, o) in scene.objects.iter().enumerate() {
        let mesh = format!("object_{k}.obj");
        let mask = format!("mask_{k}.png");
        write_obj(&dir.join(&mesh), &o.mesh)?;
        write_mask_png(&dir.join(&mask), &o.mask)?;
        entries.push(ObjectEntry {
            index: k,
            shape: o.shape,
            mesh,
            mask,
            crop: o.crop,
            gt: TransformRecord::from_transform(&o.gt),
            init: TransformRecord::from_transform(&o.init),
            mask_pixels: o.mask.count(),
        });
    }
    write_json(&dir.join("scene.json"), &serde_json::json!({ "index": scene.index, "objects": entries }))?;
    write_jsonl(&dir.join("gt_predictions.jsonl"), &gt_predictions(scene)?)?;
    Ok(())
}
