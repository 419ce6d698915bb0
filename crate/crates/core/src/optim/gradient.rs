use nalgebra::{Vector3, Vector4};

use super::params::{ParamVector, PoseParams};
use crate::error::{Error, Result};
use crate::metrics::{nearest_matches, NearestNeighborIndex};
use crate::scalar::Real;

/// Nearest-neighbor assignments held fixed between refreshes.
///
/// `source_to_target[i]` is the target matched to source point `i`, and
/// `target_to_source[j]` the source point matched to target `j`. An empty
/// list drops that direction from the objective.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Correspondences {
    pub source_to_target: Vec<usize>,
    pub target_to_source: Vec<usize>,
}

impl Correspondences {
    /// Fresh matches under `params`; `bidirectional = false` keeps only the
    /// target-to-source term.
    pub fn nearest<T: Real>(
        params: &PoseParams<T>,
        source: &[Vector3<T>],
        target: &[Vector3<T>],
        bidirectional: bool,
    ) -> Result<Self> {
        let moved = params.apply_all(source);
        let back = NearestNeighborIndex::build(&moved)?;
        let target_to_source = nearest_matches(target, &back).into_iter().map(|(i, _)| i).collect();
        let source_to_target = if bidirectional {
            let fwd = NearestNeighborIndex::build(target)?;
            nearest_matches(&moved, &fwd).into_iter().map(|(i, _)| i).collect()
        } else {
            Vec::new()
        };
        Ok(Self { source_to_target, target_to_source })
    }

    pub fn validate(&self, n_source: usize, n_target: usize) -> Result<()> {
        let ok_fwd = self.source_to_target.is_empty()
            || (self.source_to_target.len() == n_source && self.source_to_target.iter().all(|&j| j < n_target));
        let ok_back = self.target_to_source.is_empty()
            || (self.target_to_source.len() == n_target && self.target_to_source.iter().all(|&i| i < n_source));
        if ok_fwd && ok_back {
            Ok(())
        } else {
            Err(Error::InvalidArgument("correspondence indices out of range".into()))
        }
    }

    // (source index, target index, weight) of every matched pair.
    fn pairs<T: Real>(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        let wf = weight::<T>(self.source_to_target.len());
        let wb = weight::<T>(self.target_to_source.len());
        let fwd = self.source_to_target.iter().enumerate().map(move |(i, &j)| (i, j, wf));
        let back = self.target_to_source.iter().enumerate().map(move |(j, &i)| (i, j, wb));
        fwd.chain(back)
    }
}

fn weight<T: Real>(n: usize) -> T {
    if n == 0 {
        T::zero()
    } else {
        T::one() / T::from_usize_lossy(n)
    }
}

/// Chamfer objective with the given matches held fixed.
pub fn frozen_loss<T: Real>(
    params: &PoseParams<T>,
    source: &[Vector3<T>],
    target: &[Vector3<T>],
    corr: &Correspondences,
) -> T {
    let r = params.rotation_matrix();
    let s = params.scale_factors();
    let mut fwd = T::zero();
    for (i, &j) in corr.source_to_target.iter().enumerate() {
        fwd += (r * source[i].component_mul(&s) + params.translation - target[j]).norm_squared();
    }
    let mut back = T::zero();
    for (j, &i) in corr.target_to_source.iter().enumerate() {
        back += (r * source[i].component_mul(&s) + params.translation - target[j]).norm_squared();
    }
    fwd * weight(corr.source_to_target.len()) + back * weight(corr.target_to_source.len())
}

/// Analytic gradient of [`frozen_loss`] in the packed `(q, t, log s)` layout.
/// The quaternion block is projected onto the tangent space of the unit sphere.
pub fn chamfer_gradient<T: Real>(
    params: &PoseParams<T>,
    source: &[Vector3<T>],
    target: &[Vector3<T>],
    corr: &Correspondences,
) -> ParamVector<T> {
    let q = params.quaternion.normalize();
    let (w, v) = (q[0], Vector3::new(q[1], q[2], q[3]));
    let r = params.rotation_matrix();
    let s = params.scale_factors();
    let two = T::lit(2.0);
    let mut gq = Vector4::zeros();
    let mut gt = Vector3::zeros();
    let mut gl = Vector3::zeros();
    for (i, j, wt) in corr.pairs::<T>() {
        let u = source[i].component_mul(&s);
        let g = (r * u + params.translation - target[j]) * (two * wt);
        gt += g;
        gl += (r.transpose() * g).component_mul(&u);
        // d(R u)/dw = 2(w u + v x u)
        // d(R u)/dv = 2((v.u) I + v u^T - u v^T - w [u]x)
        let gw = two * (w * g.dot(&u) + g.dot(&v.cross(&u)));
        let gv = (g * v.dot(&u) + u * g.dot(&v) - v * g.dot(&u) - g.cross(&u) * w) * two;
        gq += Vector4::new(gw, gv.x, gv.y, gv.z);
    }
    gq -= q * gq.dot(&q);
    let mut out = ParamVector::zeros();
    out.fixed_rows_mut::<4>(0).copy_from(&gq);
    out.fixed_rows_mut::<3>(4).copy_from(&gt);
    out.fixed_rows_mut::<3>(7).copy_from(&gl);
    out
}
