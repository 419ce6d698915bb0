use std::collections::BTreeMap;

use nalgebra::Vector3;
use panoalign::geometry::primitives::{cuboid, l_shape};
use panoalign::geometry::{
    AnisotropicScale, CameraIntrinsics, GaussianSet, ObjectWorldTransform, PinholeCamera,
    PointCloud, RigidExtrinsic, Rotation, TriangleMesh,
};
use panoalign::optim::{OptimizerConfig, PoseParams};
use panoalign::panorama::{
    backproject_pano_depth, crop_spec_for_mask, extract_perspective_crop, InstanceMask,
    PerspectiveCrop,
};
use panoalign::pipeline::*;
use panoalign::raster::{default_view_rig, render_panorama, ViewRig};
use panoalign::Result;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PANO_W: usize = 2048;
const PANO_H: usize = 1024;

struct Fixture {
    mesh: TriangleMesh<f64>,
    gt: ObjectWorldTransform<f64>,
    crop: PerspectiveCrop<f64>,
    rig: ViewRig<f64>,
    target: Vec<Vector3<f64>>,
}

impl Fixture {
    fn new(seed: u64) -> Self {
        Self::at(seed, 2.5..3.5)
    }

    fn at(seed: u64, dist: std::ops::Range<f64>) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mesh = l_shape(1.2, 0.8, 0.35, 0.6);
        mesh.recenter().unwrap();
        let rot = Rotation::about_y(rng.gen_range(-3.0..3.0));
        let az: f64 = rng.gen_range(-3.0..3.0);
        let dist = rng.gen_range(dist);
        // Objects stand on a floor 1.4 below the panorama center.
        let t = Vector3::new(az.sin() * dist, rng.gen_range(-1.1..-0.9), az.cos() * dist);
        let s = AnisotropicScale::new(
            rng.gen_range(0.8..1.25),
            rng.gen_range(0.8..1.25),
            rng.gen_range(0.8..1.25),
        )
        .unwrap();
        let gt = ObjectWorldTransform::from_rigid_scale(RigidExtrinsic::new(rot, t), s);
        let world = mesh.transformed(&gt);
        let render = render_panorama(&[&world], PANO_W, PANO_H, &Vector3::zeros());
        let pano_mask = render.mask_of(0);
        let spec = crop_spec_for_mask(&pano_mask, 0.2, 518).unwrap();
        let crop = extract_perspective_crop(&render.depth, &pano_mask, &spec).unwrap();
        let target = backproject_pano_depth(&render.depth, &pano_mask, 1).unwrap().cloud.into_points();
        let rig = default_view_rig(&mesh.bbox().unwrap()).unwrap();
        Self { mesh, gt, crop, rig, target }
    }

    fn camera(&self) -> PinholeCamera<f64> {
        self.crop.camera()
    }

    fn observation<'a>(&'a self, cam: &'a PinholeCamera<f64>) -> ObjectObservation<'a, f64> {
        ObjectObservation {
            object_id: 0,
            mesh: &self.mesh,
            rig: &self.rig,
            crop: cam,
            crop_mask: &self.crop.mask,
            target: &self.target,
        }
    }

    fn context<'a>(&'a self, cam: &'a PinholeCamera<f64>) -> RefineContext<'a, f64> {
        RefineContext::new(&self.mesh, cam, &self.crop.mask, self.target.clone(), 4096, 0).unwrap()
    }

    fn gt_prediction(&self) -> Prediction<f64> {
        Prediction::from_object_pose(&self.rig, &self.crop.extrinsic, &self.gt)
    }
}

fn random_rigid(rng: &mut ChaCha8Rng) -> RigidExtrinsic<f64> {
    let axis = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    RigidExtrinsic::new(
        Rotation::from_axis_angle(&axis, rng.gen_range(0.0..3.1)).unwrap(),
        Vector3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)),
    )
}

fn max_diff(a: &RigidExtrinsic<f64>, b: &RigidExtrinsic<f64>) -> f64 {
    (a.to_matrix() - b.to_matrix()).abs().max()
}

fn perturbed(gt: &ObjectWorldTransform<f64>, deg: f64, shift: f64, rng: &mut ChaCha8Rng) -> ObjectWorldTransform<f64> {
    let axis = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let dir = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)).normalize();
    let r = Rotation::from_axis_angle(&axis, deg.to_radians()).unwrap();
    let c = gt.translation();
    // Rotate about the object origin, then shift it.
    let delta = RigidExtrinsic::new(r, c + dir * shift - r.rotate(&c));
    gt.left_compose(&delta)
}

#[test]
fn resolve_in_the_rig_frame_is_direct() {
    let f = Fixture::new(1);
    let direct = f.crop.extrinsic.compose(&f.gt.rigid());
    let e0 = resolve_crop_extrinsic(&f.gt_prediction().extrinsics, &f.rig).unwrap();
    assert!(max_diff(&e0, &direct) < 1e-9);
}

#[test]
fn resolve_is_invariant_to_the_predictor_frame() {
    let f = Fixture::new(2);
    let pred = f.gt_prediction();
    let reference = resolve_crop_extrinsic(&pred.extrinsics, &f.rig).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let g = random_rigid(&mut rng);
        let moved = pred.in_frame(&g);
        let e0 = resolve_crop_extrinsic(&moved.extrinsics, &f.rig).unwrap();
        assert!(max_diff(&e0, &reference) < 1e-9);
    }
}

#[test]
fn equal_predicted_views_give_the_rig_view() {
    let f = Fixture::new(3);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let e = random_rigid(&mut rng);
    let e0 = resolve_crop_extrinsic(&[e, e], &f.rig).unwrap();
    assert!(max_diff(&e0, &f.rig.views()[0].extrinsic) < 1e-12);
}

#[test]
fn missing_views_are_rejected() {
    let f = Fixture::new(3);
    let e = RigidExtrinsic::identity();
    assert!(matches!(resolve_crop_extrinsic(&[e], &f.rig), Err(panoalign::Error::MissingView(1))));
    assert!(resolve_crop_extrinsic::<f64>(&[], &f.rig).is_err());
}

#[test]
fn file_source_reproduces_ground_truth() {
    let f = Fixture::new(4);
    let cam = f.camera();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    // Predictions stored in an arbitrary predictor frame.
    let rec = PredictionRecord::from_prediction(0, &f.gt_prediction().in_frame(&random_rigid(&mut rng)));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pred.jsonl");
    panoalign::io::write_jsonl(&path, [&rec]).unwrap();
    let source = FileSource::load(&path).unwrap();
    let out = align_object(&f.observation(&cam), &source).unwrap();
    assert!((out.transform.matrix() - f.gt.matrix()).abs().max() < 1e-9);
    assert!(out.silhouette_iou > 0.9, "iou {}", out.silhouette_iou);
    assert!(out.record.is_none());
}

#[test]
fn file_source_rejects_unknown_and_duplicate_ids() {
    let f = Fixture::new(4);
    let cam = f.camera();
    let rec = PredictionRecord::from_prediction(5, &f.gt_prediction());
    let source = FileSource::new(vec![rec.clone()]).unwrap();
    assert!(matches!(align_object(&f.observation(&cam), &source), Err(panoalign::Error::UnknownObject(_))));
    assert!(FileSource::new(vec![rec.clone(), rec]).is_err());
}

#[test]
fn wrong_extrinsic_count_is_rejected() {
    let f = Fixture::new(4);
    let cam = f.camera();
    let mut rec = PredictionRecord::from_prediction(0, &f.gt_prediction());
    rec.extrinsics.pop();
    let source = FileSource::new(vec![rec]).unwrap();
    assert!(align_object(&f.observation(&cam), &source).is_err());
}

struct Fixed(Prediction<f64>);

impl TransformSource<f64> for Fixed {
    fn predict(&self, _: &ObjectObservation<'_, f64>) -> Result<Prediction<f64>> {
        Ok(self.0.clone())
    }
}

#[test]
fn identity_everything_gives_identity() {
    let mesh = cuboid(Vector3::new(1.0, 1.0, 1.0));
    let k = CameraIntrinsics::from_vertical_fov(1.0, 64, 64).unwrap();
    let cam = PinholeCamera::new(k, RigidExtrinsic::identity());
    let rig = ViewRig::new(vec![cam; 4]).unwrap();
    let mask = InstanceMask::zeros(64, 64);
    let target = vec![Vector3::new(0.0, 0.0, 1.0)];
    let obs = ObjectObservation { object_id: 0, mesh: &mesh, rig: &rig, crop: &cam, crop_mask: &mask, target: &target };
    let id = RigidExtrinsic::identity();
    let source = Fixed(Prediction { extrinsics: vec![id; 5], scale: AnisotropicScale::identity(), record: None });
    let out = align_object(&obs, &source).unwrap();
    assert_eq!(*out.transform.matrix(), nalgebra::Matrix4::identity());
}

/// Fit from a 10 degree, 5 cm, few-percent-scale init; returns rotation error
/// in degrees, translation error and worst relative scale error.
fn optimizer_source_errors(seed: u64) -> (f64, f64, f64) {
    let f = Fixture::new(seed);
    let cam = f.camera();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let init = perturbed(&f.gt, 10.0, 0.05, &mut rng);
    let mut p = PoseParams::from_transform(&init);
    p.log_scale += Vector3::new(0.04, -0.04, 0.03);
    let source = OptimizerSource::new(FitMethod::Opt, OptimizerConfig::default())
        .with_inits(BTreeMap::from([(0, p)]));
    let out = align_object(&f.observation(&cam), &source).unwrap();
    let t = &out.transform;
    assert!(out.silhouette_iou >= 0.9, "seed {seed}: iou {}", out.silhouette_iou);
    let rec = out.record.unwrap();
    assert_eq!(rec.method, panoalign::optim::AlignMethod::OptRgbd);
    assert!(rec.transform::<f64>().unwrap().matrix().relative_eq(t.matrix(), 1e-9, 1e-9));
    let ang = t.rotation().angle_to(&f.gt.rotation()).to_degrees();
    let dt = (t.translation() - f.gt.translation()).norm();
    let ds = (t.scale().factors() - f.gt.scale().factors())
        .component_div(f.gt.scale().factors())
        .amax();
    (ang, dt, ds)
}

#[test]
fn optimizer_source_recovers_the_pose() {
    for seed in [5, 6, 7] {
        let (ang, dt, ds) = optimizer_source_errors(seed);
        assert!(ang < 2.0 && dt < 0.1 && ds < 0.05, "seed {seed}: {ang} deg, {dt}, {ds}");
    }
}

#[test]
#[ignore = "scale is not pinned to 2% by one panorama's depth and mask; lower-loss poses sit 2-4% off"]
fn optimizer_source_recovers_scale_within_two_percent() {
    for seed in [5, 6, 7] {
        let (_, _, ds) = optimizer_source_errors(seed);
        assert!(ds < 0.02, "seed {seed}: {ds}");
    }
}

struct Constant(RefinerStep<f64>);

impl Refiner<f64> for Constant {
    fn step(&mut self, _: &ObjectWorldTransform<f64>, _: &RefineContext<'_, f64>) -> Result<RefinerStep<f64>> {
        Ok(self.0)
    }
}

struct FailsAt(usize, usize, RefinerStep<f64>);

impl Refiner<f64> for FailsAt {
    fn step(&mut self, _: &ObjectWorldTransform<f64>, _: &RefineContext<'_, f64>) -> Result<RefinerStep<f64>> {
        self.1 += 1;
        if self.1 > self.0 {
            return Err(panoalign::Error::InvalidArgument("refiner broke".into()));
        }
        Ok(self.2)
    }
}

#[test]
fn identity_refiner_stops_after_one_check() {
    let f = Fixture::new(8);
    let cam = f.camera();
    let ctx = f.context(&cam);
    let (t, trace) = c2f_refine(&f.gt, &ctx, &mut Constant(RefinerStep::identity()), &C2fConfig::default(), 0).unwrap();
    assert_eq!(trace.cd.len(), 1);
    assert_eq!(trace.stop, StopReason::Converged);
    assert_eq!(trace.cd[0], trace.initial_cd);
    assert_eq!(t, f.gt);
}

#[test]
fn loop_never_exceeds_max_steps() {
    let f = Fixture::new(8);
    let cam = f.camera();
    let ctx = f.context(&cam);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for k_max in 1..=5 {
        // A step that keeps pulling the object toward truth by a large margin
        // never falls below tau on its own.
        let start = perturbed(&f.gt, 0.0, 3.0, &mut rng);
        let toward = f.gt.rigid().compose(&start.rigid().inverse());
        let half = RigidExtrinsic::new(Rotation::identity(), toward.translation * 0.2);
        let cfg = C2fConfig { max_steps: k_max, ..Default::default() };
        let (_, trace) = c2f_refine(&start, &ctx, &mut Constant(RefinerStep { delta: half, rejected: false }), &cfg, 0).unwrap();
        assert!(trace.cd.len() <= k_max);
        let wild = random_rigid(&mut rng);
        let (_, trace) = c2f_refine(&start, &ctx, &mut Constant(RefinerStep { delta: wild, rejected: false }), &cfg, 0).unwrap();
        assert!(trace.cd.len() <= k_max);
    }
}

#[test]
fn refiner_failure_returns_best_iterate() {
    let f = Fixture::new(8);
    let cam = f.camera();
    let ctx = f.context(&cam);
    let start = perturbed(&f.gt, 0.0, 1.0, &mut ChaCha8Rng::seed_from_u64(1));
    let toward = f.gt.rigid().compose(&start.rigid().inverse());
    let step = RefinerStep { delta: RigidExtrinsic::new(Rotation::identity(), toward.translation * 0.5), rejected: false };
    let (t, trace) = c2f_refine(&start, &ctx, &mut FailsAt(1, 0, step), &C2fConfig::default(), 0).unwrap();
    assert!(matches!(trace.stop, StopReason::RefinerFailed(_)));
    assert_eq!(trace.cd.len(), 1);
    assert!((ctx.chamfer(&t).unwrap() - trace.cd[0]).abs() < 1e-15);
    assert!(trace.cd[0] < trace.initial_cd);
}

#[test]
fn default_refiner_improves_perturbed_poses() {
    let f = Fixture::new(10);
    let cam = f.camera();
    let ctx = f.context(&cam);
    let optimum = ctx.chamfer(&f.gt).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let start = perturbed(&f.gt, 5.0, 0.05, &mut rng);
    let (t, trace) = c2f_refine(&start, &ctx, &mut default_local_refiner(), &C2fConfig::default(), 0).unwrap();
    assert!(trace.cd.len() <= 5);
    let mut prev = trace.initial_cd;
    for &cd in &trace.cd {
        assert!(cd <= prev);
        prev = cd;
    }
    assert!(trace.initial_cd > optimum + 0.001);
    assert!(trace.final_cd() < trace.initial_cd);
    assert!(t.rotation().angle_to(&f.gt.rotation()).to_degrees() < 5.0);
    assert_eq!(t.scale(), start.scale());
}

#[test]
fn local_refiner_is_quiet_at_the_optimum() {
    let f = Fixture::new(11);
    let cam = f.camera();
    let ctx = f.context(&cam);
    let step = default_local_refiner().step(&f.gt, &ctx).unwrap();
    assert!(step.angle().to_degrees() < 0.1, "{}", step.angle().to_degrees());
}

#[test]
fn local_refiner_undoes_a_translation() {
    let f = Fixture::new(12);
    let cam = f.camera();
    let ctx = f.context(&cam);
    let shifted = f.gt.left_compose(&RigidExtrinsic::from_translation(Vector3::new(0.05, 0.0, 0.0)));
    let step = default_local_refiner().step(&shifted, &ctx).unwrap();
    assert!(!step.rejected);
    let expected = Vector3::new(-0.05, 0.0, 0.0);
    let moved = step.displacement(&shifted.translation());
    assert!((moved - expected).norm() < 0.2 * 0.05, "{moved:?}");
}

#[test]
fn local_refiner_clamps_large_corrections() {
    let f = Fixture::new(13);
    let cam = f.camera();
    let ctx = f.context(&cam);
    let c = f.gt.translation();
    let r = Rotation::about_y(35f64.to_radians());
    let off = f.gt.left_compose(&RigidExtrinsic::new(r, c - r.rotate(&c)));
    let step = default_local_refiner().step(&off, &ctx).unwrap();
    assert!(!step.rejected);
    assert!((step.angle().to_degrees() - 15.0).abs() < 1e-9, "{}", step.angle().to_degrees());
    assert!(ctx.chamfer(&off.left_compose(&step.delta)).unwrap() < ctx.chamfer(&off).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn clamped_steps_respect_both_limits(
        axis in prop::array::uniform3(-1.0f64..1.0),
        angle in 0.0f64..3.1,
        shift in prop::array::uniform3(-3.0f64..3.0),
        center in prop::array::uniform3(-5.0f64..5.0),
        max_deg in 1.0f64..30.0,
        max_t in 0.01f64..1.0,
    ) {
        let axis = Vector3::from(axis);
        prop_assume!(axis.norm() > 1e-3);
        let r = Rotation::from_axis_angle(&axis, angle).unwrap();
        let delta = RigidExtrinsic::new(r, Vector3::from(shift));
        let c = Vector3::from(center);
        let out = clamp_step(&delta, &c, max_deg.to_radians(), max_t);
        let step = RefinerStep { delta: out, rejected: false };
        prop_assert!(step.angle() <= max_deg.to_radians() + 1e-9);
        prop_assert!(step.displacement(&c).norm() <= max_t + 1e-9);
        let raw = RefinerStep { delta, rejected: false };
        if raw.angle() <= max_deg.to_radians() && raw.displacement(&c).norm() <= max_t {
            prop_assert!(max_diff(&out, &delta) < 1e-9);
        }
    }
}

fn instance(id: &str, mesh: TriangleMesh<f64>, t: ObjectWorldTransform<f64>) -> SceneInstance<f64> {
    SceneInstance { id: id.into(), geometry: ObjectGeometry::Mesh(mesh), transform: t, provenance: "file".into() }
}

fn background() -> Background<f64> {
    Background::Points(PointCloud::new(vec![Vector3::new(0.0, -1.5, 0.0); 10]).unwrap())
}

#[test]
fn empty_scene_is_the_background() {
    let scene = fuse_scene(Vec::new(), background()).unwrap();
    assert_eq!(scene.element_count(), 10);
    assert!(scene.instances().is_empty());
}

#[test]
fn fused_element_count_is_additive() {
    let m = cuboid(Vector3::new(1.0, 1.0, 1.0));
    let g = GaussianSet::<f64>::new(Vec::new()).unwrap();
    let mut insts = vec![instance("a", m.clone(), ObjectWorldTransform::identity()), instance("b", m.clone(), ObjectWorldTransform::identity())];
    insts.push(SceneInstance { id: "c".into(), geometry: ObjectGeometry::Gaussians(g), transform: ObjectWorldTransform::identity(), provenance: "x".into() });
    let scene = fuse_scene(insts, background()).unwrap();
    assert_eq!(scene.element_count(), 2 * m.vertices().len() + 10);
}

#[test]
fn duplicate_instance_ids_are_rejected() {
    let m = cuboid(Vector3::new(1.0, 1.0, 1.0));
    let insts = vec![instance("a", m.clone(), ObjectWorldTransform::identity()), instance("a", m, ObjectWorldTransform::identity())];
    assert!(matches!(fuse_scene(insts, background()), Err(panoalign::Error::DuplicateId(_))));
}

#[test]
fn fused_scene_reprojects_inside_source_masks() {
    let fixtures: Vec<Fixture> = (20..23).map(Fixture::new).collect();
    let world: Vec<TriangleMesh<f64>> = fixtures.iter().map(|f| f.mesh.transformed(&f.gt)).collect();
    let refs: Vec<&TriangleMesh<f64>> = world.iter().collect();
    let joint = render_panorama(&refs, 1024, 512, &Vector3::zeros());
    let mut insts = Vec::new();
    for (i, f) in fixtures.iter().enumerate() {
        let cam = f.camera();
        let source = FileSource::new(vec![PredictionRecord::from_prediction(0, &f.gt_prediction())]).unwrap();
        let aligned = align_object(&f.observation(&cam), &source).unwrap();
        insts.push(instance(&format!("obj-{i}"), f.mesh.clone(), aligned.transform));
    }
    let scene = fuse_scene(insts, background()).unwrap();
    let again = render_panorama(&scene.world_meshes(), 1024, 512, &Vector3::zeros());
    for i in 0..fixtures.len() {
        let allowed = joint.mask_of(i).dilate(3, true);
        let got = again.mask_of(i);
        assert!(got.count() > 0);
        for v in 0..got.height() {
            for u in 0..got.width() {
                assert!(!got.get(u, v) || allowed.get(u, v), "instance {i} pixel ({u}, {v})");
            }
        }
    }
}

#[test]
fn scene_export_writes_manifest_and_plys() {
    let f = Fixture::new(30);
    let scene = fuse_scene(vec![instance("chair 1", f.mesh.clone(), f.gt)], background()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = scene.export(dir.path()).unwrap();
    assert_eq!(manifest.instances[0].file, "instance_chair_1.ply");
    assert_eq!(manifest.total_elements, scene.element_count());
    let back: TriangleMesh<f64> = panoalign::io::read_mesh_ply(&dir.path().join("instance_chair_1.ply")).unwrap();
    assert_eq!(&back, match scene.world_geometry(0) {
        ObjectGeometry::Mesh(m) => m,
        _ => unreachable!(),
    });
    let read: SceneManifest = panoalign::io::read_json(&dir.path().join("manifest.json")).unwrap();
    assert_eq!(read, manifest);
    let t: ObjectWorldTransform<f64> = read.instances[0].transform.to_transform().unwrap();
    assert!((t.matrix() - f.gt.matrix()).abs().max() < 1e-12);
}
