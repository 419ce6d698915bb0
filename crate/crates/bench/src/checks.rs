//! Pass/fail checks attached to a bench report.

use std::collections::BTreeMap;

use crate::run::{mean_metrics, BenchReport, Check};

const MEAN_TOLERANCE: f64 = 1e-12;

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check { name: name.into(), passed, detail }
}

/// Report means against their per-object values, and metric ranges.
pub fn consistency(r: &BenchReport) -> Vec<Check> {
    let mut worst = 0.0f64;
    let mut in_range = true;
    for s in &r.scenes {
        let Some(m) = &s.metrics else { continue };
        let n = m.objects.len() as f64;
        let cd = m.objects.iter().map(|o| o.cd).sum::<f64>() / n;
        let f = m.objects.iter().map(|o| o.fscore).sum::<f64>() / n;
        let iou = m.objects.iter().map(|o| o.iou).sum::<f64>() / n;
        worst = worst.max((cd - m.cd_o).abs()).max((f - m.fscore_o).abs()).max((iou - m.iou_b).abs());
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        in_range &= m.cd_s >= 0.0 && m.cd_o >= 0.0 && unit(m.fscore_s) && unit(m.fscore_o) && unit(m.iou_b);
        in_range &= m.objects.iter().all(|o| o.cd >= 0.0 && unit(o.fscore) && unit(o.iou));
    }
    let recomputed = mean_metrics(&r.scenes);
    vec![
        check(
            "report-means",
            worst <= MEAN_TOLERANCE && recomputed == r.mean,
            format!("largest gap between a scene mean and its objects: {worst:e}"),
        ),
        check("metric-ranges", in_range, "F-Scores and IoU in [0, 1], Chamfer >= 0".into()),
    ]
}

/// Every refinement stopped within `max_steps` and never raised the CD.
pub fn c2f_contract(r: &BenchReport, max_steps: usize) -> Vec<Check> {
    let traces: Vec<_> = r.objects.iter().filter_map(|o| o.refinement.as_ref()).collect();
    let bounded = traces.iter().filter(|t| t.cd.len() <= max_steps).count();
    let monotone = traces
        .iter()
        .filter(|t| {
            let mut prev = t.initial_cd;
            t.cd.iter().all(|&c| {
                let ok = c <= prev;
                prev = c;
                ok
            })
        })
        .count();
    vec![
        check(
            "c2f-terminates",
            bounded == traces.len(),
            format!("{bounded}/{} traces within {max_steps} steps", traces.len()),
        ),
        check(
            "c2f-non-increasing",
            monotone == traces.len(),
            format!("{monotone}/{} traces non-increasing", traces.len()),
        ),
    ]
}

pub fn oracle(r: &BenchReport) -> Check {
    let scored: Vec<_> = r.scenes.iter().filter_map(|s| s.metrics.as_ref()).collect();
    let ok = !scored.is_empty()
        && scored.len() == r.scenes.len()
        && r.quarantined.is_empty()
        && scored.iter().all(|m| m.cd_s < 1e-6 && m.fscore_s > 0.999 && m.iou_b > 0.999);
    let worst_cd = scored.iter().map(|m| m.cd_s).fold(0.0, f64::max);
    let worst_f = scored.iter().map(|m| m.fscore_s).fold(1.0, f64::min);
    let worst_iou = scored.iter().map(|m| m.iou_b).fold(1.0, f64::min);
    check(
        "oracle",
        ok,
        format!(
            "{}/{} scenes scored, {} quarantined; worst CD-S {worst_cd:e}, F-Score-S {worst_f}, IoU-B {worst_iou}",
            scored.len(),
            r.scenes.len(),
            r.quarantined.len()
        ),
    )
}

/// Share of objects scored by both runs on which `main` has the lower or equal CD.
pub fn baseline(main: &BenchReport, base: &BenchReport, min_rate: f64) -> Check {
    let base_cd: BTreeMap<(usize, usize), f64> =
        base.objects.iter().filter_map(|o| Some(((o.scene, o.object), o.cd?))).collect();
    let pairs: Vec<(f64, f64)> = main
        .objects
        .iter()
        .filter_map(|o| Some((o.cd?, *base_cd.get(&(o.scene, o.object))?)))
        .collect();
    let wins = pairs.iter().filter(|(a, b)| a <= b).count();
    let rate = if pairs.is_empty() { 0.0 } else { wins as f64 / pairs.len() as f64 };
    check(
        &format!("beats-{}", base.method.name()),
        !pairs.is_empty() && rate >= min_rate,
        format!("{wins}/{} paired objects, need {:.0}%", pairs.len(), min_rate * 100.0),
    )
}

pub fn identical(a: &BenchReport, b: &BenchReport) -> anyhow::Result<Check> {
    let (ja, jb) = (serde_json::to_string(a)?, serde_json::to_string(b)?);
    Ok(check("determinism", ja == jb, format!("{} vs {} bytes", ja.len(), jb.len())))
}
