use nalgebra::{Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AnisotropicScale, Rotation};
use crate::panorama::InstanceMask;
use crate::scalar::Real;

/// Mean squared pixel error plus `1 - IoU` between two binary masks.
pub fn mask_loss(gt: &InstanceMask, rendered: &InstanceMask) -> Result<f64> {
    if gt.width() != rendered.width() || gt.height() != rendered.height() {
        return Err(Error::ResolutionMismatch(gt.width(), gt.height(), rendered.width(), rendered.height()));
    }
    let n = gt.data().len();
    if n == 0 {
        return Ok(0.0);
    }
    let mut inter = 0usize;
    let mut union = 0usize;
    for (a, b) in gt.data().iter().zip(rendered.data()) {
        inter += (*a & *b) as usize;
        union += (*a | *b) as usize;
    }
    let mse = (union - inter) as f64 / n as f64;
    let iou = if union == 0 { 1.0 } else { inter as f64 / union as f64 };
    Ok(mse + (1.0 - iou))
}

/// Rotation, translation and scale of one object pose.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseComponents<T: Real> {
    pub rotation: Rotation<T>,
    pub translation: Vector3<T>,
    pub scale: AnisotropicScale<T>,
}

impl<T: Real> PoseComponents<T> {
    pub fn new(rotation: Rotation<T>, translation: Vector3<T>, scale: AnisotropicScale<T>) -> Self {
        Self { rotation, translation, scale }
    }
}

/// L1 over quaternion, translation and scale; the predicted quaternion is
/// sign-aligned with the reference first.
pub fn pgd_loss<T: Real>(pred: &PoseComponents<T>, star: &PoseComponents<T>) -> T {
    pgd_loss_raw(
        &pred.rotation.as_vector4(),
        &pred.translation,
        pred.scale.factors(),
        &star.rotation.as_vector4(),
        &star.translation,
        star.scale.factors(),
    )
}

/// Same as [`pgd_loss`] on raw (not necessarily unit, either sign) quaternions
/// stored as (w, x, y, z).
pub fn pgd_loss_raw<T: Real>(
    q_pred: &Vector4<T>,
    t_pred: &Vector3<T>,
    s_pred: &Vector3<T>,
    q_star: &Vector4<T>,
    t_star: &Vector3<T>,
    s_star: &Vector3<T>,
) -> T {
    let qs = q_star.normalize();
    let mut qp = q_pred.normalize();
    if qp.dot(&qs) < T::zero() {
        qp = -qp;
    }
    l1(&(qp - qs).data.0[0]) + l1(&(t_pred - t_star).data.0[0]) + l1(&(s_pred - s_star).data.0[0])
}

fn l1<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |a, x| a + x.abs())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub cd: f64,
    pub pgd: f64,
    pub mask: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { cd: 0.1, pgd: 1.0, mask: 0.1 }
    }
}

impl LossWeights {
    pub fn new(cd: f64, pgd: f64, mask: f64) -> Result<Self> {
        let w = Self { cd, pgd, mask };
        if [cd, pgd, mask].iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidArgument(format!("loss weights must be non-negative: {w:?}")));
        }
        Ok(w)
    }
}

pub fn total_loss(cd: f64, pgd: f64, mask: f64, w: &LossWeights) -> f64 {
    w.cd * cd + w.pgd * pgd + w.mask * mask
}
