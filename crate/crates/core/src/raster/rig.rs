use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, CameraIntrinsics, PinholeCamera, RigidExtrinsic, Rotation};
use crate::scalar::Real;

/// Cameras of the predefined object views.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewRig<T: Real> {
    views: Vec<PinholeCamera<T>>,
}

impl<T: Real> ViewRig<T> {
    pub fn new(views: Vec<PinholeCamera<T>>) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::EmptyInput("view rig needs at least one camera"));
        }
        Ok(Self { views })
    }

    pub fn views(&self) -> &[PinholeCamera<T>] {
        &self.views
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }
}

/// Layout of the default object rig.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RigConfig {
    pub azimuths_deg: Vec<f64>,
    /// Downward pitch applied to every view.
    pub pitch_deg: f64,
    /// Fraction of the image height the projected box spans.
    pub fill: f64,
    /// Upper bound on the horizontal fraction, for wide objects.
    pub max_horizontal_fill: f64,
    pub vertical_fov_deg: f64,
    pub resolution: usize,
}

impl Default for RigConfig {
    fn default() -> Self {
        Self {
            azimuths_deg: vec![0.0, 90.0, 180.0, 270.0],
            pitch_deg: 20.0,
            fill: 0.8,
            max_horizontal_fill: 0.95,
            vertical_fov_deg: 60.0,
            resolution: 518,
        }
    }
}

/// Four horizontal views at azimuths 0/90/180/270 degrees with 20 degrees of
/// downward pitch, aimed at the box center, 518x518 pixels.
pub fn default_view_rig<T: Real>(object_bbox: &Aabb<T>) -> Result<ViewRig<T>> {
    view_rig(object_bbox, &RigConfig::default())
}

/// Each camera sits at the distance where the projected box corners span
/// `cfg.fill` of the image height, backed off further if the horizontal span
/// would exceed `cfg.max_horizontal_fill`.
pub fn view_rig<T: Real>(object_bbox: &Aabb<T>, cfg: &RigConfig) -> Result<ViewRig<T>> {
    if object_bbox.is_degenerate() {
        return Err(Error::InvalidArgument("degenerate bounding box".into()));
    }
    if !(cfg.fill > 0.0 && cfg.fill < 1.0 && cfg.max_horizontal_fill > 0.0 && cfg.max_horizontal_fill < 1.0) {
        return Err(Error::InvalidArgument("rig fill must be in (0, 1)".into()));
    }
    let k = CameraIntrinsics::from_vertical_fov(
        T::lit(cfg.vertical_fov_deg.to_radians()),
        cfg.resolution,
        cfg.resolution,
    )?;
    let center = object_bbox.center();
    let corners = object_bbox.corners();
    let radius = object_bbox.diagonal() * T::lit(0.5);
    let views = cfg
        .azimuths_deg
        .iter()
        .map(|az| {
            let orient = Rotation::about_y(T::lit(az.to_radians()))
                .compose(&Rotation::about_x(T::lit(cfg.pitch_deg.to_radians())));
            let forward = orient.rotate(&Vector3::z());
            let place = |d: T| {
                PinholeCamera::new(k, RigidExtrinsic::from_camera_pose(&orient, &(center - forward * d)))
            };
            let d = solve_distance(&corners, radius, T::lit(cfg.fill), T::lit(cfg.max_horizontal_fill), &place);
            place(d)
        })
        .collect();
    ViewRig::new(views)
}

/// Horizontal and vertical image fractions covered by the projected corners.
fn coverage<T: Real>(corners: &[Vector3<T>; 8], cam: &PinholeCamera<T>) -> Option<(T, T)> {
    let (mut x0, mut x1, mut y0, mut y1) = (T::max_value()?, T::min_value()?, T::max_value()?, T::min_value()?);
    for c in corners {
        let (x, y) = cam.project_world(c)?;
        x0 = crate::scalar::min(x0, x);
        x1 = crate::scalar::max(x1, x);
        y0 = crate::scalar::min(y0, y);
        y1 = crate::scalar::max(y1, y);
    }
    let fx = (x1 - x0) / T::from_usize_lossy(cam.intrinsics.width);
    let fy = (y1 - y0) / T::from_usize_lossy(cam.intrinsics.height);
    Some((fx, fy))
}

fn solve_distance<T: Real>(
    corners: &[Vector3<T>; 8],
    radius: T,
    fill: T,
    max_h: T,
    place: &dyn Fn(T) -> PinholeCamera<T>,
) -> T {
    let fits = |d: T| coverage(corners, &place(d)).is_some_and(|(h, v)| v <= fill && h <= max_h);
    let mut lo = radius * T::lit(1.0001) + T::lit(1e-3);
    let mut hi = lo * T::lit(2.0);
    while !fits(hi) {
        hi *= T::lit(2.0);
    }
    for _ in 0..200 {
        let mid = (lo + hi) * T::lit(0.5);
        if fits(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= T::lit(1e-12) * hi {
            break;
        }
    }
    hi
}
