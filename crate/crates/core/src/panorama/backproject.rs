use nalgebra::Vector3;

use super::projection::direction_at;
use super::{Image, InstanceMask, PanoramaImage};
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, PointCloud, RigidExtrinsic};
use crate::scalar::Real;

/// Back-projected points plus the number of masked pixels skipped for
/// non-positive or non-finite depth.
#[derive(Clone, Debug)]
pub struct Backprojection<T: Real> {
    pub cloud: PointCloud<T>,
    pub skipped: usize,
}

/// Lifts masked panorama pixels to `depth · direction(u, v)` with the camera at
/// the origin, visiting every `stride`-th row and column. Depth is the
/// Euclidean distance along the pixel ray.
pub fn backproject_pano_depth<T: Real>(
    pano_depth: &PanoramaImage<T>,
    mask: &InstanceMask,
    stride: usize,
) -> Result<Backprojection<T>> {
    let img = pano_depth.image();
    check_inputs(img, mask, stride)?;
    let (w, h) = (img.width(), img.height());
    let half = T::lit(0.5);
    let mut points = Vec::new();
    let mut skipped = 0;
    for v in (0..h).step_by(stride) {
        for u in (0..w).step_by(stride) {
            if !mask.get(u, v) {
                continue;
            }
            let depth = img.get(u, v, 0);
            if !(depth > T::zero()) || !depth.is_finite_value() {
                skipped += 1;
                continue;
            }
            let d = direction_at(
                w,
                h,
                T::from_usize_lossy(u) + half,
                T::from_usize_lossy(v) + half,
            );
            points.push(d * depth);
        }
    }
    Ok(Backprojection {
        cloud: PointCloud::new(points)?,
        skipped,
    })
}

/// Pinhole back-projection of a z-depth raster into the world frame.
pub fn backproject_perspective_depth<T: Real>(
    depth: &Image<T>,
    intrinsics: &CameraIntrinsics<T>,
    extrinsic: &RigidExtrinsic<T>,
    mask: &InstanceMask,
) -> Result<Backprojection<T>> {
    check_inputs(depth, mask, 1)?;
    if depth.width() != intrinsics.width || depth.height() != intrinsics.height {
        return Err(Error::ResolutionMismatch(
            depth.width(),
            depth.height(),
            intrinsics.width,
            intrinsics.height,
        ));
    }
    let cam_to_world = extrinsic.inverse();
    let half = T::lit(0.5);
    let mut points: Vec<Vector3<T>> = Vec::new();
    let mut skipped = 0;
    for v in 0..depth.height() {
        for u in 0..depth.width() {
            if !mask.get(u, v) {
                continue;
            }
            let z = depth.get(u, v, 0);
            if !(z > T::zero()) || !z.is_finite_value() {
                skipped += 1;
                continue;
            }
            let p = intrinsics.unproject(
                T::from_usize_lossy(u) + half,
                T::from_usize_lossy(v) + half,
                z,
            );
            points.push(cam_to_world.apply(&p));
        }
    }
    Ok(Backprojection {
        cloud: PointCloud::new(points)?,
        skipped,
    })
}

fn check_inputs<T: Real>(img: &Image<T>, mask: &InstanceMask, stride: usize) -> Result<()> {
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be at least 1".into()));
    }
    if !mask.same_size(img) {
        return Err(Error::ResolutionMismatch(
            mask.width(),
            mask.height(),
            img.width(),
            img.height(),
        ));
    }
    Ok(())
}
