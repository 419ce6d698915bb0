use nalgebra::Vector3;
use rayon::prelude::*;

use super::descent::{descend, Objective};
use super::gradient::{chamfer_gradient, frozen_loss, Correspondences};
use super::params::{AlignMethod, AlignmentRecord, LossBreakdown, OptimizerConfig, ParamVector, PoseParams};
use crate::error::{Error, Result};
use crate::geometry::{bbox_of_slice, Rotation};
use crate::scalar::Real;

struct MeshObjective<'a, T: Real> {
    source: &'a [Vector3<T>],
    target: &'a [Vector3<T>],
    corr: Correspondences,
}

impl<T: Real> Objective<T> for MeshObjective<'_, T> {
    fn refresh(&mut self, p: &PoseParams<T>) -> Result<T> {
        self.corr = Correspondences::nearest(p, self.source, self.target, true)?;
        Ok(self.value(p))
    }

    fn value(&self, p: &PoseParams<T>) -> T {
        frozen_loss(p, self.source, self.target, &self.corr)
    }

    fn gradient(&self, p: &PoseParams<T>) -> ParamVector<T> {
        chamfer_gradient(p, self.source, self.target, &self.corr)
    }
}

/// Largest distance from the centroid.
pub(crate) fn cloud_radius<T: Real>(pts: &[Vector3<T>]) -> (Vector3<T>, T) {
    let c = pts.iter().fold(Vector3::zeros(), |a, p| a + p) / T::from_usize_lossy(pts.len().max(1));
    let r = pts.iter().fold(T::zero(), |a, p| crate::scalar::max(a, (p - c).norm()));
    (c, r)
}

/// Fits `(R, t, S)` mapping `source` onto `target` by minimizing the
/// bidirectional Chamfer distance.
pub fn opt_align_mesh<T: Real>(
    source: &[Vector3<T>],
    target: &[Vector3<T>],
    init: &PoseParams<T>,
    cfg: &OptimizerConfig,
) -> Result<AlignmentRecord> {
    if source.is_empty() || target.is_empty() {
        return Err(Error::EmptyInput("alignment of an empty cloud"));
    }
    let (_, radius) = cloud_radius(target);
    let mut obj = MeshObjective { source, target, corr: Correspondences::default() };
    let out = descend(&mut obj, *init, cfg, crate::scalar::max(radius, T::lit(1e-9)))?;
    let loss = out.loss.to_f64_lossy();
    Ok(AlignmentRecord::from_params(
        AlignMethod::OptMesh,
        &out.params,
        LossBreakdown { chamfer: loss, mask: None, total: loss },
        out.initial_loss.to_f64_lossy(),
        out.iterations,
        out.status,
    ))
}

/// Starting poses for pseudo-label fitting: yaw restarts evenly spaced over a
/// full turn, each with the per-axis box ratio as scale and the centroid
/// offset as translation.
pub fn initial_guesses<T: Real>(
    source: &[Vector3<T>],
    target: &[Vector3<T>],
    restarts: usize,
    cfg: &OptimizerConfig,
) -> Result<Vec<PoseParams<T>>> {
    let bs = bbox_of_slice(source)?;
    let bt = bbox_of_slice(target)?;
    let (es, et) = (bs.extents(), bt.extents());
    let (cs, ct) = (bs.center(), bt.center());
    let n = restarts.max(1);
    Ok((0..n)
        .map(|k| {
            let yaw = T::two_pi() * T::from_usize_lossy(k) / T::from_usize_lossy(n);
            let rot = Rotation::about_y(yaw);
            // Target extents seen along each rotated source axis.
            let seen = rot.to_matrix().abs().transpose() * et;
            let s = Vector3::from_fn(|a, _| {
                if es[a] > T::lit(1e-12) && seen[a] > T::lit(1e-12) { seen[a] / es[a] } else { T::one() }
            });
            let mut p = PoseParams {
                quaternion: rot.as_vector4(),
                translation: Vector3::zeros(),
                log_scale: s.map(|x| x.ln()),
            };
            p.clamp_scale(cfg.scale_min, cfg.scale_max);
            p.translation = ct - p.apply(&cs);
            p
        })
        .collect())
}

/// Runs [`opt_align_mesh`] from every initial guess in parallel and keeps the
/// lowest final loss (ties to the earlier restart).
pub fn opt_align_mesh_multistart<T: Real>(
    source: &[Vector3<T>],
    target: &[Vector3<T>],
    cfg: &OptimizerConfig,
) -> Result<AlignmentRecord> {
    let inits = initial_guesses(source, target, cfg.restarts, cfg)?;
    let results: Vec<Result<AlignmentRecord>> =
        inits.par_iter().map(|init| opt_align_mesh(source, target, init, cfg)).collect();
    let mut best: Option<AlignmentRecord> = None;
    for r in results {
        let r = r?;
        if best.as_ref().is_none_or(|b| r.loss.total < b.loss.total) {
            best = Some(r);
        }
    }
    best.ok_or(Error::EmptyInput("no restarts"))
}
