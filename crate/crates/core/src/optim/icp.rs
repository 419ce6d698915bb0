use nalgebra::{Matrix3, Vector3};

use super::mesh::cloud_radius;
use super::params::{AlignMethod, AlignStatus, AlignmentRecord, LossBreakdown, OptimizerConfig, PoseParams};
use crate::error::{Error, Result};
use crate::geometry::{AnisotropicScale, Rotation};
use crate::metrics::{chamfer_bidirectional, nearest_matches, NearestNeighborIndex};
use crate::scalar::Real;

/// Least-squares rotation and translation taking `a[i]` to `b[i]`.
pub fn kabsch<T: Real>(a: &[Vector3<T>], b: &[Vector3<T>]) -> (Matrix3<T>, Vector3<T>) {
    let n = T::from_usize_lossy(a.len().max(1));
    let ca = a.iter().fold(Vector3::zeros(), |s, p| s + p) / n;
    let cb = b.iter().fold(Vector3::zeros(), |s, p| s + p) / n;
    let mut h = Matrix3::zeros();
    for (p, q) in a.iter().zip(b) {
        h += (p - ca) * (q - cb).transpose();
    }
    let svd = h.svd(true, true);
    let (u, vt) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
    let mut d = Matrix3::identity();
    if (vt.transpose() * u.transpose()).determinant() < T::zero() {
        d[(2, 2)] = -T::one();
    }
    let r = vt.transpose() * d * u.transpose();
    (r, cb - r * ca)
}

/// Point-to-point ICP on clouds normalized to unit bounding-sphere radius,
/// followed by the isotropic scale `r_target / r_source`.
pub fn icp_align<T: Real>(
    source: &[Vector3<T>],
    target: &[Vector3<T>],
    cfg: &OptimizerConfig,
) -> Result<AlignmentRecord> {
    if source.is_empty() || target.is_empty() {
        return Err(Error::EmptyInput("alignment of an empty cloud"));
    }
    let (cs, rs) = cloud_radius(source);
    let (ct, rt) = cloud_radius(target);
    if !(rs > T::zero() && rt > T::zero()) {
        return Err(Error::InvalidArgument("cloud collapses to a point".into()));
    }
    let ns: Vec<_> = source.iter().map(|p| (p - cs) / rs).collect();
    let nt: Vec<_> = target.iter().map(|p| (p - ct) / rt).collect();
    let index = NearestNeighborIndex::build(&nt)?;

    let mut r = Matrix3::identity();
    let mut t = Vector3::zeros();
    let mut best = (r, t, T::lit(f64::INFINITY));
    let mut prev: Option<Vec<usize>> = None;
    let mut status = AlignStatus::MaxIterations;
    let mut iterations = 0;
    for it in 1..=cfg.icp_iterations.max(1) {
        iterations = it;
        let moved: Vec<_> = ns.iter().map(|p| r * p + t).collect();
        let m = nearest_matches(&moved, &index);
        let err = m.iter().fold(T::zero(), |a, (_, d)| a + *d) / T::from_usize_lossy(m.len());
        if err < best.2 {
            best = (r, t, err);
        }
        let ids: Vec<usize> = m.iter().map(|(i, _)| *i).collect();
        if prev.as_ref() == Some(&ids) {
            status = AlignStatus::Converged;
            break;
        }
        let matched: Vec<_> = ids.iter().map(|&i| nt[i]).collect();
        (r, t) = kabsch(&ns, &matched);
        prev = Some(ids);
    }
    let (r, t, _) = best;
    let s = rt / rs;
    let rot = Rotation::from_matrix(&r);
    let r = rot.to_matrix();
    let translation = ct + t * rt - r * cs * s;
    let params = PoseParams::new(&rot, translation, &AnisotropicScale::uniform(s)?);
    let cd = chamfer_bidirectional(&params.apply_all(source), target)?.to_f64_lossy();
    let initial = chamfer_bidirectional(source, target)?.to_f64_lossy();
    Ok(AlignmentRecord::from_params(
        AlignMethod::Icp,
        &params,
        LossBreakdown { chamfer: cd, mask: None, total: cd },
        initial,
        iterations,
        status,
    ))
}
