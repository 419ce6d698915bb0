use std::path::Path;
use std::process::Command;

use nalgebra::Vector3;
use panoalign::geometry::TriangleMesh;
use panoalign::panorama::{backproject_pano_depth, InstanceMask};
use panoalign_bench::config::{Method, RunConfig};
use panoalign_bench::output::write_all;
use panoalign_bench::run::{run, run_benchmark, STAGE_ALIGNMENT, STAGE_EVALUATION, STAGE_GENERATION, STAGE_REFINEMENT};
use panoalign_bench::synth::{generate_scene, write_scene, SyntheticSceneSpec};

fn small_spec(seed: u64, objects: usize) -> SyntheticSceneSpec {
    SyntheticSceneSpec { seed, objects, pano_width: 256, pano_height: 128, ..Default::default() }
}

/// Closest point on triangle `abc` to `p`, by Voronoi region.
fn closest_on_triangle(p: &Vector3<f64>, a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> Vector3<f64> {
    let (ab, ac, ap) = (b - a, c - a, p - a);
    let (d1, d2) = (ab.dot(&ap), ac.dot(&ap));
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let (d3, d4) = (ab.dot(&bp), ac.dot(&bp));
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let (d5, d6) = (ab.dot(&cp), ac.dot(&cp));
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && d4 - d3 >= 0.0 && d5 - d6 >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

fn distance_to_mesh(p: &Vector3<f64>, m: &TriangleMesh<f64>) -> f64 {
    (0..m.triangles().len())
        .map(|i| {
            let [a, b, c] = m.triangle(i);
            (p - closest_on_triangle(p, &a, &b, &c)).norm()
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn closest_point_oracle_on_a_known_triangle() {
    let (a, b, c) = (Vector3::zeros(), Vector3::x(), Vector3::y());
    let q = closest_on_triangle(&Vector3::new(0.25, 0.25, 2.0), &a, &b, &c);
    assert!((q - Vector3::new(0.25, 0.25, 0.0)).norm() < 1e-15);
    assert_eq!(closest_on_triangle(&Vector3::new(-1.0, -1.0, 0.0), &a, &b, &c), a);
    let e = closest_on_triangle(&Vector3::new(1.0, 1.0, 0.0), &a, &b, &c);
    assert!((e - Vector3::new(0.5, 0.5, 0.0)).norm() < 1e-15);
}

#[test]
fn empty_scene_shows_only_the_room() {
    let spec = small_spec(3, 0);
    let s = generate_scene(&spec, 0).unwrap();
    assert!(s.objects.is_empty());
    let [hx, hy, hz] = spec.room_half_extents;
    let all = InstanceMask::ones(s.depth.width(), s.depth.height());
    let pts = backproject_pano_depth(&s.depth, &all, 1).unwrap().cloud.into_points();
    assert_eq!(pts.len(), s.depth.width() * s.depth.height());
    for p in &pts {
        let r = (p.x.abs() / hx).max(p.y.abs() / hy).max(p.z.abs() / hz);
        assert!((r - 1.0).abs() < 1e-9, "{p:?} is off the walls");
    }
}

#[test]
fn generation_is_bitwise_reproducible() {
    let spec = small_spec(11, 3);
    let a = generate_scene(&spec, 2).unwrap();
    let b = generate_scene(&spec, 2).unwrap();
    assert_eq!(a.depth.image().data(), b.depth.image().data());
    for (x, y) in a.objects.iter().zip(&b.objects) {
        assert_eq!(x.gt.matrix(), y.gt.matrix());
        assert_eq!(x.init.matrix(), y.init.matrix());
        assert_eq!(x.mask.data(), y.mask.data());
    }
    // Scene 2 does not depend on scenes 0 and 1 having been drawn.
    let _ = generate_scene(&spec, 0);
    assert_eq!(generate_scene(&spec, 2).unwrap().depth.image().data(), a.depth.image().data());
}

#[test]
fn masked_depth_lies_on_the_object_surface() {
    let spec = small_spec(5, 4);
    let s = generate_scene(&spec, 1).unwrap();
    let mut checked = 0;
    for o in &s.objects {
        let placed = o.mesh.transformed(&o.gt);
        let pts = backproject_pano_depth(&s.depth, &o.mask, 1).unwrap().cloud.into_points();
        for p in &pts {
            assert!(distance_to_mesh(p, &placed) < 1e-3);
        }
        checked += pts.len();
    }
    assert!(checked > 0);
}

#[test]
fn objects_stand_apart_on_the_floor() {
    let spec = small_spec(7, 5);
    for i in 0..3 {
        let s = generate_scene(&spec, i).unwrap();
        let boxes: Vec<_> = s.objects.iter().map(|o| o.mesh.transformed(&o.gt).bbox().unwrap()).collect();
        for (a, b) in boxes.iter().enumerate().flat_map(|(i, a)| boxes[i + 1..].iter().map(move |b| (a, b))) {
            assert!(!a.overlaps(b));
        }
        for b in &boxes {
            assert!((b.min.y + spec.room_half_extents[1]).abs() < 1e-9);
            assert!(b.center().x.hypot(b.center().z) >= spec.min_distance);
        }
    }
}

#[test]
fn impossible_placement_returns_the_partial_scene() {
    let spec = SyntheticSceneSpec { objects: 40, max_retries: 5, ..small_spec(9, 0) };
    let err = generate_scene(&spec, 0).unwrap_err();
    assert!(err.placed < err.wanted);
    assert_eq!(err.partial.objects.len(), err.placed);
    assert!(err.partial.depth.image().data().iter().all(|d| d.is_finite()));
}

fn write_suite(dir: &Path, spec: &SyntheticSceneSpec, n: usize) {
    for i in 0..n {
        write_scene(&generate_scene(spec, i).unwrap(), dir).unwrap();
    }
}

fn oracle_config(dir: &Path, spec: SyntheticSceneSpec, scenes: usize) -> RunConfig {
    let mut cfg = RunConfig {
        method: Method::FileSource,
        scenes,
        scene: spec,
        predictions: Some(dir.join("scenes")),
        out: dir.join("out"),
        ..Default::default()
    };
    cfg.checks.oracle = true;
    cfg
}

#[test]
fn file_source_ground_truth_scores_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_spec(21, 3);
    write_suite(&dir.path().join("scenes"), &spec, 2);
    let out = run_benchmark(&oracle_config(dir.path(), spec, 2)).unwrap();
    for c in &out.report.checks {
        assert!(c.passed, "{}: {}", c.name, c.detail);
    }
    for o in &out.report.objects {
        assert!(o.rotation_error_deg < 1e-6 && o.translation_error < 1e-9 && o.scale_error < 1e-9);
    }
    let names: Vec<_> = out.timings.iter().map(|t| t.stage.as_str()).collect();
    assert_eq!(names, [STAGE_GENERATION, STAGE_ALIGNMENT, STAGE_REFINEMENT, STAGE_EVALUATION]);
}

#[test]
fn quarantined_object_leaves_the_others_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_spec(23, 3);
    let scenes = dir.path().join("scenes");
    write_suite(&scenes, &spec, 1);
    let cfg = oracle_config(dir.path(), spec, 1);
    let full = run(&cfg).unwrap();

    let file = scenes.join("scene_000").join("gt_predictions.jsonl");
    let text = std::fs::read_to_string(&file).unwrap();
    let kept: Vec<_> = text.lines().skip(1).collect();
    std::fs::write(&file, kept.join("\n") + "\n").unwrap();
    let partial = run(&cfg).unwrap();

    assert_eq!(partial.report.quarantined.len(), 1);
    let q = &partial.report.quarantined[0];
    assert_eq!((q.scene, q.object, q.stage.as_str()), (0, Some(0), "align"));
    assert_eq!(partial.report.objects.len(), full.report.objects.len() - 1);
    for o in &partial.report.objects {
        let f = full.report.objects.iter().find(|f| f.object == o.object).unwrap();
        assert_eq!((o.cd, o.fscore, o.iou_b), (f.cd, f.fscore, f.iou_b));
    }
}

#[test]
fn report_means_match_the_scene_rows() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_spec(25, 2);
    write_suite(&dir.path().join("scenes"), &spec, 3);
    let out = run(&oracle_config(dir.path(), spec, 3)).unwrap();
    write_all(&dir.path().join("out"), &out).unwrap();
    let mut rows = csv::Reader::from_path(dir.path().join("out/report.csv")).unwrap();
    let header: Vec<String> = rows.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["scene", "CD-S", "CD-O", "F-Score-S", "F-Score-O", "IoU-B"]);
    let records: Vec<Vec<String>> = rows.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    assert_eq!(records.len(), 4);
    assert_eq!(records[3][0], "mean");
    for col in 1..6 {
        let mean = records[..3].iter().map(|r| r[col].parse::<f64>().unwrap()).sum::<f64>() / 3.0;
        assert!((mean - records[3][col].parse::<f64>().unwrap()).abs() < 1e-12);
    }
    assert!(dir.path().join("out/timings.csv").is_file());
    assert!(dir.path().join("out/objects.csv").is_file());
}

#[test]
fn optimizer_results_do_not_depend_on_worker_count() {
    let mut cfg = RunConfig { method: Method::Icp, scenes: 2, ..Default::default() };
    cfg.scene = small_spec(27, 2);
    cfg.optimizer.icp_iterations = 10;
    let one = run(&RunConfig { jobs: 1, ..cfg.clone() }).unwrap();
    let two = run(&RunConfig { jobs: 2, ..cfg }).unwrap();
    assert_eq!(serde_json::to_string(&one.report).unwrap(), serde_json::to_string(&two.report).unwrap());
}

#[test]
fn config_round_trips_through_toml_and_validates() {
    let mut cfg = RunConfig { method: Method::C2f, scenes: 3, ..Default::default() };
    cfg.scene.objects = 2;
    cfg.checks.baseline = Some(Method::Icp);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.toml");
    std::fs::write(&path, toml::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(RunConfig::load(&path).unwrap(), cfg);
    assert!(cfg.validate().is_ok());

    std::fs::write(&path, "method = \"c2f\"\nscenes = 1\n[scene]\nobjects = 1\n").unwrap();
    let partial = RunConfig::load(&path).unwrap();
    assert_eq!((partial.method, partial.scenes, partial.scene.objects), (Method::C2f, 1, 1));
    assert_eq!(partial.optimizer, RunConfig::default().optimizer);

    std::fs::write(&path, "method = \"nope\"\n").unwrap();
    assert!(RunConfig::load(&path).is_err());
    assert!(RunConfig { method: Method::FileSource, ..Default::default() }.validate().is_err());
    let mut bad = RunConfig::default();
    bad.eval.fscore_threshold = 0.0;
    assert!(bad.validate().is_err());
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_panoalign")).args(args).output().unwrap()
}

#[test]
fn cli_generates_then_passes_the_oracle_bench() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    let scenes = dir.path().join("scenes");
    let text = format!(
        "scenes = 2\npredictions = {:?}\n[scene]\nobjects = 2\npano_width = 256\npano_height = 128\n[checks]\noracle = true\n",
        scenes.to_str().unwrap()
    );
    std::fs::write(&config, text).unwrap();
    let c = config.to_str().unwrap();
    let gen = cli(&["generate", "--config", c, "--out", scenes.to_str().unwrap()]);
    assert!(gen.status.success(), "{}", String::from_utf8_lossy(&gen.stderr));
    assert!(scenes.join("scene_001/depth.pfm").is_file());

    let out = dir.path().join("out");
    let bench = cli(&["bench", "--config", c, "--method", "file-source", "--out", out.to_str().unwrap(), "--jobs", "1"]);
    let stdout = String::from_utf8_lossy(&bench.stdout);
    assert!(bench.status.success(), "{stdout}");
    assert!(stdout.contains("PASS oracle"));
    assert!(!stdout.contains("FAIL"));
    assert!(out.join("report.json").is_file());
}

#[test]
fn cli_reports_bad_input_with_exit_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.toml");
    assert_eq!(cli(&["bench", "--config", missing.to_str().unwrap()]).status.code(), Some(2));
    // file-source without predictions fails validation.
    let out = dir.path().join("out");
    assert_eq!(cli(&["evaluate", "--out", out.to_str().unwrap()]).status.code(), Some(2));
    assert!(!cli(&["bench", "--method", "bogus"]).status.success());
}
