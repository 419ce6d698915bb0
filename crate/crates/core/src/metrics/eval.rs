use std::fmt::Write as _;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chamfer::{chamfer_bidirectional, nearest_matches};
use super::kdtree::NearestNeighborIndex;
use crate::error::{Error, Result};
use crate::geometry::{bbox_of_slice, Aabb};
use crate::scalar::Real;

/// F-Score threshold after normalizing scene diameter to 10 units.
pub const DEFAULT_FSCORE_THRESHOLD: f64 = 0.1;

fn fraction_within<T: Real>(queries: &[Vector3<T>], onto: &[Vector3<T>], thr2: T) -> Result<T> {
    let index = NearestNeighborIndex::build(onto)?;
    let hits = nearest_matches(queries, &index).iter().filter(|(_, d)| *d <= thr2).count();
    Ok(T::from_usize_lossy(hits) / T::from_usize_lossy(queries.len()))
}

/// Harmonic mean of precision and recall at `threshold` (closed ball).
pub fn fscore<T: Real>(pred: &[Vector3<T>], gt: &[Vector3<T>], threshold: T) -> Result<T> {
    if pred.is_empty() || gt.is_empty() {
        return Err(Error::EmptyInput("F-Score of an empty cloud"));
    }
    if !(threshold > T::zero()) || !threshold.is_finite_value() {
        return Err(Error::InvalidArgument("F-Score threshold must be positive".into()));
    }
    let thr2 = threshold * threshold;
    let precision = fraction_within(pred, gt, thr2)?;
    let recall = fraction_within(gt, pred, thr2)?;
    if precision + recall == T::zero() {
        return Ok(T::zero());
    }
    Ok(T::lit(2.0) * precision * recall / (precision + recall))
}

/// Volumetric IoU of two axis-aligned boxes.
pub fn bbox_iou<T: Real>(a: &Aabb<T>, b: &Aabb<T>) -> T {
    let va = a.volume();
    let vb = b.volume();
    if va <= T::zero() || vb <= T::zero() {
        return if a == b { T::one() } else { T::zero() };
    }
    let mut inter = T::one();
    for k in 0..3 {
        let lo = crate::scalar::max(a.min[k], b.min[k]);
        let hi = crate::scalar::min(a.max[k], b.max[k]);
        if hi <= lo {
            return T::zero();
        }
        inter *= hi - lo;
    }
    inter / (va + vb - inter)
}

/// Points and world-frame box of one object, as predicted or as ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalObject<T: Real> {
    pub points: Vec<Vector3<T>>,
    pub bbox: Aabb<T>,
}

impl<T: Real> EvalObject<T> {
    /// Box taken from the points.
    pub fn from_points(points: Vec<Vector3<T>>) -> Result<Self> {
        let bbox = bbox_of_slice(&points)?;
        Ok(Self { points, bbox })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectMetrics {
    pub index: usize,
    #[serde(rename = "CD")]
    pub cd: f64,
    #[serde(rename = "F-Score")]
    pub fscore: f64,
    #[serde(rename = "IoU-B")]
    pub iou: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
    pub count: usize,
}

/// Scene-level evaluation.
///
/// CD-S and F-Score-S are computed once on the concatenation of all object
/// points; CD-O and F-Score-O are means of the per-object values. CD is the
/// bidirectional mean squared nearest-neighbor distance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
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
    pub fscore_threshold: f64,
    pub objects: Vec<ObjectMetrics>,
    /// Wall-clock timings; left out of the JSON when empty so reports of
    /// identical runs compare byte for byte.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub timings: Vec<StageTiming>,
}

pub const CSV_COLUMNS: [&str; 5] = ["CD-S", "CD-O", "F-Score-S", "F-Score-O", "IoU-B"];

impl MetricReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn csv_header(label: Option<&str>) -> String {
        let mut s = label.map(|l| format!("{l},")).unwrap_or_default();
        s.push_str(&CSV_COLUMNS.join(","));
        s
    }

    pub fn csv_row(&self, label: Option<&str>) -> String {
        let mut s = label.map(|l| format!("{l},")).unwrap_or_default();
        let vals = [self.cd_s, self.cd_o, self.fscore_s, self.fscore_o, self.iou_b];
        for (i, v) in vals.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            let _ = write!(s, "{v}");
        }
        s
    }
}

/// Compares matched predicted and ground-truth objects (same position = same instance).
pub fn scene_metrics<T: Real>(
    pred: &[EvalObject<T>],
    gt: &[EvalObject<T>],
    threshold: T,
) -> Result<MetricReport> {
    if pred.len() != gt.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predicted objects vs {} ground-truth objects",
            pred.len(),
            gt.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::EmptyInput("scene with no objects"));
    }
    let objects = pred
        .par_iter()
        .zip(gt.par_iter())
        .enumerate()
        .map(|(index, (p, g))| {
            Ok(ObjectMetrics {
                index,
                cd: chamfer_bidirectional(&p.points, &g.points)?.to_f64_lossy(),
                fscore: fscore(&p.points, &g.points, threshold)?.to_f64_lossy(),
                iou: bbox_iou(&p.bbox, &g.bbox).to_f64_lossy(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let all = |objs: &[EvalObject<T>]| objs.iter().flat_map(|o| o.points.iter().copied()).collect::<Vec<_>>();
    let (ps, gs) = (all(pred), all(gt));
    let n = objects.len() as f64;
    let mean = |f: fn(&ObjectMetrics) -> f64| objects.iter().map(f).sum::<f64>() / n;
    Ok(MetricReport {
        cd_s: chamfer_bidirectional(&ps, &gs)?.to_f64_lossy(),
        cd_o: mean(|o| o.cd),
        fscore_s: fscore(&ps, &gs, threshold)?.to_f64_lossy(),
        fscore_o: mean(|o| o.fscore),
        iou_b: mean(|o| o.iou),
        fscore_threshold: threshold.to_f64_lossy(),
        objects,
        timings: Vec::new(),
    })
}
