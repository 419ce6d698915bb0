use std::collections::BTreeMap;
use std::time::Instant;

use anyhow::Context;
use nalgebra::Vector3;
use panoalign::geometry::{sample_mesh_surface, ObjectWorldTransform, PinholeCamera};
use panoalign::io::TransformRecord;
use panoalign::metrics::{scene_metrics, EvalObject, MetricReport, StageTiming};
use panoalign::optim::{AlignmentRecord, OptimizerConfig, PoseParams};
use panoalign::panorama::{backproject_pano_depth, extract_perspective_crop, InstanceMask};
use panoalign::pipeline::{
    align_object, c2f_refine, fuse_scene, Background, C2fTrace, FileSource, FitMethod,
    ObjectGeometry, ObjectObservation, OptimizerSource, Prediction, PredictionRecord,
    RefineContext, SceneInstance,
};
use panoalign::raster::{default_view_rig, ViewRig};
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{prediction_file, Method, RunConfig};
use crate::synth::{generate_scene, scene_dir_name, stream, Shape, SyntheticScene};

pub const STAGE_GENERATION: &str = "Scene Generation (per scene)";
pub const STAGE_ALIGNMENT: &str = "Object Alignment (per object)";
pub const STAGE_REFINEMENT: &str = "Object Refinement (per step)";
pub const STAGE_EVALUATION: &str = "Evaluation (per scene)";

/// Stream tags so each use of an object's seed draws independent numbers.
const TAG_OPTIMIZER: u64 = 1 << 40;
const TAG_REFINE: u64 = 2 << 40;
const TAG_EVAL: u64 = 3 << 40;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub scene: usize,
    pub object: usize,
    pub shape: Shape,
    pub silhouette_iou: f64,
    pub rotation_error_deg: f64,
    pub translation_error: f64,
    /// Largest per-axis relative scale error.
    pub scale_error: f64,
    /// Metrics against ground truth; None when the scene was not evaluated.
    #[serde(rename = "CD")]
    pub cd: Option<f64>,
    #[serde(rename = "F-Score")]
    pub fscore: Option<f64>,
    #[serde(rename = "IoU-B")]
    pub iou_b: Option<f64>,
    pub transform: TransformRecord,
    pub alignment: Option<AlignmentRecord>,
    pub refinement: Option<C2fTrace>,
}

/// An object or scene taken out of the evaluation, and why.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quarantine {
    pub scene: usize,
    pub object: Option<usize>,
    pub stage: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneReport {
    pub scene: usize,
    /// None when no object of the scene made it through.
    pub metrics: Option<MetricReport>,
    pub evaluated_objects: Vec<usize>,
}

/// Mean of the scene-level metrics over the evaluated scenes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub scenes: usize,
    #[serde(rename = "CD-S")]
    pub cd_s: f64,
    #[serde(rename = "CD-O")]
    pub cd_o: f64,
    #[serde(rename = "F-Score-S")]
    pub fscore_s: f64,
    #[serde(rename = "F-Score-O")]
    pub fscore_o: f64,
    #[serde(rename = "IoU-B")]
    pub iou_b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub method: Method,
    pub refined: bool,
    pub mean: Option<MeanMetrics>,
    pub scenes: Vec<SceneReport>,
    pub objects: Vec<ObjectRecord>,
    pub quarantined: Vec<Quarantine>,
    pub checks: Vec<Check>,
}

impl BenchReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub struct BenchOutput {
    pub report: BenchReport,
    /// Per-object predictions by scene, as a file source would read them.
    pub predictions: BTreeMap<usize, Vec<PredictionRecord>>,
    pub timings: Vec<StageTiming>,
}

struct Prepared {
    cam: PinholeCamera<f64>,
    crop_mask: InstanceMask,
    target: Vec<Vector3<f64>>,
    rig: ViewRig<f64>,
}

fn prepare(scene: &SyntheticScene, k: usize) -> anyhow::Result<Prepared> {
    let obj = &scene.objects[k];
    let spec = obj.crop.context("object is not visible from the panorama center")?;
    let crop = extract_perspective_crop(&scene.depth, &obj.mask, &spec)?;
    let target = backproject_pano_depth(&scene.depth, &obj.mask, 1)?.cloud.into_points();
    let rig = default_view_rig(&obj.mesh.bbox()?)?;
    Ok(Prepared { cam: crop.camera(), crop_mask: crop.mask, target, rig })
}

fn object_seed(cfg: &RunConfig, scene: usize, k: usize, tag: u64) -> u64 {
    stream(cfg.scene.seed, scene, tag | k as u64).next_u64()
}

struct Placed {
    object: usize,
    transform: ObjectWorldTransform<f64>,
    record: ObjectRecord,
    prediction: PredictionRecord,
    align_seconds: f64,
    refine_seconds: f64,
    refine_steps: usize,
}

fn place_object(
    cfg: &RunConfig,
    method: Method,
    refine: bool,
    scene: &SyntheticScene,
    k: usize,
    files: &BTreeMap<usize, FileSource>,
) -> Result<Placed, Quarantine> {
    let q = |stage: &str, e: &dyn std::fmt::Display| Quarantine {
        scene: scene.index,
        object: Some(k),
        stage: stage.into(),
        error: e.to_string(),
    };
    let obj = &scene.objects[k];
    let prep = prepare(scene, k).map_err(|e| q("crop", &e))?;
    let obs = ObjectObservation {
        object_id: k,
        mesh: &obj.mesh,
        rig: &prep.rig,
        crop: &prep.cam,
        crop_mask: &prep.crop_mask,
        target: &prep.target,
    };
    let start = Instant::now();
    let aligned = match method {
        Method::FileSource => {
            let src = files.get(&scene.index).ok_or_else(|| q("align", &"no predictions loaded"))?;
            align_object(&obs, src)
        }
        Method::Opt | Method::Icp | Method::C2f => {
            let fit = if method == Method::Icp { FitMethod::Icp } else { FitMethod::Opt };
            let ocfg = OptimizerConfig {
                seed: object_seed(cfg, scene.index, k, TAG_OPTIMIZER),
                ..cfg.optimizer.clone()
            };
            let src = OptimizerSource::new(fit, ocfg)
                .with_inits(BTreeMap::from([(k, PoseParams::from_transform(&obj.init))]));
            align_object(&obs, &src)
        }
    }
    .map_err(|e| q("align", &e))?;
    let align_seconds = start.elapsed().as_secs_f64();

    let mut transform = aligned.transform;
    let mut refinement = None;
    let (mut refine_seconds, mut refine_steps) = (0.0, 0);
    if refine {
        let start = Instant::now();
        let seed = object_seed(cfg, scene.index, k, TAG_REFINE);
        let ctx = RefineContext::new(
            &obj.mesh,
            &prep.cam,
            &prep.crop_mask,
            prep.target.clone(),
            cfg.c2f.sample_count,
            seed,
        )
        .map_err(|e| q("refine", &e))?;
        let mut refiner = cfg.refiner.refiner(&cfg.optimizer, seed);
        let (refined, trace) =
            c2f_refine(&transform, &ctx, &mut refiner, &cfg.c2f, k).map_err(|e| q("refine", &e))?;
        refine_seconds = start.elapsed().as_secs_f64();
        refine_steps = trace.cd.len();
        transform = refined;
        refinement = Some(trace);
    }

    let gt = &obj.gt;
    let scale_error = (transform.scale().factors() - gt.scale().factors())
        .component_div(gt.scale().factors())
        .abs()
        .max();
    let record = ObjectRecord {
        scene: scene.index,
        object: k,
        shape: obj.shape,
        silhouette_iou: aligned.silhouette_iou,
        rotation_error_deg: transform.rotation().angle_to(&gt.rotation()).to_degrees(),
        translation_error: (transform.translation() - gt.translation()).norm(),
        scale_error,
        cd: None,
        fscore: None,
        iou_b: None,
        transform: TransformRecord::from_transform(&transform),
        alignment: aligned.record,
        refinement,
    };
    let prediction = PredictionRecord::from_prediction(
        k,
        &Prediction::from_object_pose(&prep.rig, &prep.cam.extrinsic, &transform),
    );
    Ok(Placed { object: k, transform, record, prediction, align_seconds, refine_seconds, refine_steps })
}

/// Fuses the placed objects with the panorama background and scores them
/// against ground truth. Fills the per-object metric fields.
fn evaluate_scene(
    cfg: &RunConfig,
    method: Method,
    scene: &SyntheticScene,
    placed: &mut [Placed],
) -> anyhow::Result<Option<MetricReport>> {
    if placed.is_empty() {
        return Ok(None);
    }
    let mut instances = Vec::with_capacity(placed.len());
    let mut gt = Vec::with_capacity(placed.len());
    for p in placed.iter() {
        let obj = &scene.objects[p.object];
        let seed = object_seed(cfg, scene.index, p.object, TAG_EVAL);
        let samples = sample_mesh_surface(&obj.mesh, cfg.eval.samples, seed)?;
        gt.push(EvalObject::from_points(samples.points().iter().map(|x| obj.gt.apply_point(x)).collect())?);
        instances.push(SceneInstance {
            id: format!("object_{}", p.object),
            geometry: ObjectGeometry::Points(samples),
            transform: p.transform,
            provenance: method.name().into(),
        });
    }
    let (w, h) = (scene.depth.width(), scene.depth.height());
    let background_mask = InstanceMask::from_fn(w, h, |u, v| !scene.objects.iter().any(|o| o.mask.get(u, v)));
    let background = backproject_pano_depth(&scene.depth, &background_mask, 4)?.cloud;
    let graph = fuse_scene(instances, Background::Points(background))?;
    if cfg.export {
        graph.export(&cfg.out.join("fused").join(scene_dir_name(scene.index)))?;
    }
    let pred = (0..placed.len())
        .map(|i| match graph.world_geometry(i) {
            ObjectGeometry::Points(c) => EvalObject::from_points(c.points().to_vec()),
            _ => unreachable!("instances are point clouds"),
        })
        .collect::<panoalign::Result<Vec<_>>>()?;
    let metrics = scene_metrics(&pred, &gt, cfg.eval.fscore_threshold)?;
    for (p, m) in placed.iter_mut().zip(&metrics.objects) {
        p.record.cd = Some(m.cd);
        p.record.fscore = Some(m.fscore);
        p.record.iou_b = Some(m.iou);
    }
    Ok(Some(metrics))
}

fn load_sources(cfg: &RunConfig, method: Method) -> anyhow::Result<BTreeMap<usize, FileSource>> {
    let mut files = BTreeMap::new();
    if method == Method::FileSource {
        let dir = cfg.predictions.as_ref().context("file-source needs a predictions directory")?;
        for i in 0..cfg.scenes {
            let path = prediction_file(dir, i)?;
            files.insert(i, FileSource::load(&path).with_context(|| format!("loading {}", path.display()))?);
        }
    }
    Ok(files)
}

fn mean_timing(stage: &str, total: f64, count: usize) -> StageTiming {
    StageTiming { stage: stage.into(), seconds: if count > 0 { total / count as f64 } else { 0.0 }, count }
}

/// Generates every scene of the run. Placement failures keep the partial scene.
pub fn generate_scenes(cfg: &RunConfig) -> Vec<(SyntheticScene, Option<String>, f64)> {
    (0..cfg.scenes)
        .into_par_iter()
        .map(|i| {
            let start = Instant::now();
            let (scene, err) = match generate_scene(&cfg.scene, i) {
                Ok(s) => (s, None),
                Err(e) => {
                    let msg = e.to_string();
                    (e.partial, Some(msg))
                }
            };
            (scene, err, start.elapsed().as_secs_f64())
        })
        .collect()
}

fn run_method(cfg: &RunConfig, method: Method, refine: bool) -> anyhow::Result<BenchOutput> {
    let files = load_sources(cfg, method)?;
    let scenes = generate_scenes(cfg);
    let gen_total: f64 = scenes.iter().map(|s| s.2).sum();
    let mut quarantined = Vec::new();
    for (scene, err, _) in &scenes {
        if let Some(e) = err {
            quarantined.push(Quarantine { scene: scene.index, object: None, stage: "placement".into(), error: e.clone() });
        }
    }
    let jobs: Vec<(usize, usize)> = scenes
        .iter()
        .enumerate()
        .flat_map(|(i, (s, _, _))| (0..s.objects.len()).map(move |k| (i, k)))
        .collect();
    let results: Vec<Result<Placed, Quarantine>> = jobs
        .par_iter()
        .map(|&(i, k)| place_object(cfg, method, refine, &scenes[i].0, k, &files))
        .collect();

    let mut per_scene: Vec<Vec<Placed>> = scenes.iter().map(|_| Vec::new()).collect();
    let (mut align_total, mut aligned_count) = (0.0, 0);
    let (mut refine_total, mut refine_steps) = (0.0, 0);
    for ((i, _), r) in jobs.iter().zip(results) {
        match r {
            Ok(p) => {
                align_total += p.align_seconds;
                aligned_count += 1;
                refine_total += p.refine_seconds;
                refine_steps += p.refine_steps;
                per_scene[*i].push(p);
            }
            Err(q) => quarantined.push(q),
        }
    }

    let evaluated: Vec<(anyhow::Result<Option<MetricReport>>, Vec<Placed>, f64)> = per_scene
        .into_par_iter()
        .enumerate()
        .map(|(i, mut placed)| {
            let start = Instant::now();
            let m = evaluate_scene(cfg, method, &scenes[i].0, &mut placed);
            (m, placed, start.elapsed().as_secs_f64())
        })
        .collect();

    let mut scene_reports = Vec::new();
    let mut objects = Vec::new();
    let mut predictions = BTreeMap::new();
    let mut eval_total = 0.0;
    for (i, (metrics, placed, secs)) in evaluated.into_iter().enumerate() {
        eval_total += secs;
        let metrics = match metrics {
            Ok(m) => m,
            Err(e) => {
                quarantined.push(Quarantine { scene: i, object: None, stage: "evaluate".into(), error: e.to_string() });
                None
            }
        };
        let evaluated_objects = if metrics.is_some() { placed.iter().map(|p| p.object).collect() } else { Vec::new() };
        predictions.insert(i, placed.iter().map(|p| p.prediction.clone()).collect());
        objects.extend(placed.into_iter().map(|p| p.record));
        scene_reports.push(SceneReport { scene: i, metrics, evaluated_objects });
    }
    quarantined.sort_by(|a, b| (a.scene, a.object).cmp(&(b.scene, b.object)));

    let report = BenchReport {
        method,
        refined: refine,
        mean: mean_metrics(&scene_reports),
        scenes: scene_reports,
        objects,
        quarantined,
        checks: Vec::new(),
    };
    let timings = vec![
        mean_timing(STAGE_GENERATION, gen_total, scenes.len()),
        mean_timing(STAGE_ALIGNMENT, align_total, aligned_count),
        mean_timing(STAGE_REFINEMENT, refine_total, refine_steps),
        mean_timing(STAGE_EVALUATION, eval_total, scenes.len()),
    ];
    Ok(BenchOutput { report, predictions, timings })
}

pub fn mean_metrics(scenes: &[SceneReport]) -> Option<MeanMetrics> {
    let ms: Vec<&MetricReport> = scenes.iter().filter_map(|s| s.metrics.as_ref()).collect();
    if ms.is_empty() {
        return None;
    }
    let n = ms.len() as f64;
    let mean = |f: fn(&MetricReport) -> f64| ms.iter().map(|m| f(m)).sum::<f64>() / n;
    Some(MeanMetrics {
        scenes: ms.len(),
        cd_s: mean(|m| m.cd_s),
        cd_o: mean(|m| m.cd_o),
        fscore_s: mean(|m| m.fscore_s),
        fscore_o: mean(|m| m.fscore_o),
        iou_b: mean(|m| m.iou_b),
    })
}

fn pool(jobs: usize) -> anyhow::Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?)
}

/// Runs the configured method without bench checks.
pub fn run(cfg: &RunConfig) -> anyhow::Result<BenchOutput> {
    cfg.validate()?;
    pool(cfg.jobs)?.install(|| run_method(cfg, cfg.method, cfg.refines()))
}

/// Full benchmark: runs the configured method and attaches every check.
pub fn run_benchmark(cfg: &RunConfig) -> anyhow::Result<BenchOutput> {
    cfg.validate()?;
    let pool = pool(cfg.jobs)?;
    let mut out = pool.install(|| run_method(cfg, cfg.method, cfg.refines()))?;
    let mut checks = crate::checks::consistency(&out.report);
    if cfg.refines() {
        checks.extend(crate::checks::c2f_contract(&out.report, cfg.c2f.max_steps));
    }
    if cfg.checks.oracle {
        checks.push(crate::checks::oracle(&out.report));
    }
    if let Some(base) = cfg.checks.baseline {
        let other = pool.install(|| run_method(cfg, base, false))?;
        checks.push(crate::checks::baseline(&out.report, &other.report, cfg.checks.baseline_win_rate));
    }
    if cfg.checks.determinism {
        let again = pool.install(|| run_method(cfg, cfg.method, cfg.refines()))?;
        checks.push(crate::checks::identical(&out.report, &again.report)?);
    }
    out.report.checks = checks;
    Ok(out)
}
