use std::path::Path;

use anyhow::Context;
use panoalign::io::{write_json, write_jsonl};
use panoalign::metrics::{StageTiming, CSV_COLUMNS};

use crate::run::{BenchOutput, BenchReport};
use crate::synth::scene_dir_name;

fn csv_writer(path: &Path) -> anyhow::Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

/// One row per evaluated scene plus a `mean` row.
pub fn write_report_csv(path: &Path, r: &BenchReport) -> anyhow::Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["scene"];
    header.extend(CSV_COLUMNS);
    w.write_record(&header)?;
    for s in &r.scenes {
        if let Some(m) = &s.metrics {
            let vals = [m.cd_s, m.cd_o, m.fscore_s, m.fscore_o, m.iou_b];
            let mut row = vec![scene_dir_name(s.scene)];
            row.extend(vals.iter().map(f64::to_string));
            w.write_record(&row)?;
        }
    }
    if let Some(m) = &r.mean {
        let vals = [m.cd_s, m.cd_o, m.fscore_s, m.fscore_o, m.iou_b];
        let mut row = vec!["mean".to_string()];
        row.extend(vals.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_objects_csv(path: &Path, r: &BenchReport) -> anyhow::Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record([
        "scene",
        "object",
        "shape",
        "CD",
        "F-Score",
        "IoU-B",
        "silhouette_iou",
        "rotation_error_deg",
        "translation_error",
        "scale_error",
    ])?;
    for o in &r.objects {
        w.write_record([
            o.scene.to_string(),
            o.object.to_string(),
            serde_json::to_value(o.shape)?.as_str().unwrap_or_default().to_string(),
            opt(o.cd),
            opt(o.fscore),
            opt(o.iou_b),
            o.silhouette_iou.to_string(),
            o.rotation_error_deg.to_string(),
            o.translation_error.to_string(),
            o.scale_error.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_timings(dir: &Path, timings: &[StageTiming]) -> anyhow::Result<()> {
    write_json(&dir.join("timings.json"), timings)?;
    let mut w = csv_writer(&dir.join("timings.csv"))?;
    w.write_record(["stage", "seconds", "count"])?;
    for t in timings {
        w.write_record([t.stage.clone(), format!("{:.6}", t.seconds), t.count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_predictions(dir: &Path, out: &BenchOutput) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (scene, records) in &out.predictions {
        write_jsonl(&dir.join(format!("{}.jsonl", scene_dir_name(*scene))), records)?;
    }
    Ok(())
}

/// `report.json`, `report.csv`, `objects.csv`, `timings.json` and `timings.csv`.
/// Timings live apart from the report so identical runs give identical reports.
pub fn write_all(dir: &Path, out: &BenchOutput) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_json(&dir.join("report.json"), &out.report)?;
    write_report_csv(&dir.join("report.csv"), &out.report)?;
    write_objects_csv(&dir.join("objects.csv"), &out.report)?;
    write_timings(dir, &out.timings)
}
