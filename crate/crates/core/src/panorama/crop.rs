//! Perspective crops of an equirectangular panorama.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::projection::{angles_from_direction, direction_at, direction_to_pixel_dims};
use super::{Image, InstanceMask, PanoramaImage};
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, PinholeCamera, RigidExtrinsic, Rotation};
use crate::scalar::Real;

pub const DEFAULT_CROP_RESOLUTION: usize = 518;

/// Viewing direction, field of view and output size of one perspective crop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CropSpec {
    /// Longitude of the crop center, radians.
    pub theta: f64,
    /// Latitude of the crop center, radians.
    pub phi: f64,
    /// Horizontal field of view, radians.
    pub fov: f64,
    pub width: usize,
    pub height: usize,
}

impl CropSpec {
    pub fn new(theta: f64, phi: f64, fov: f64) -> Result<Self> {
        let spec = Self {
            theta,
            phi,
            fov,
            width: DEFAULT_CROP_RESOLUTION,
            height: DEFAULT_CROP_RESOLUTION,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_resolution(mut self, width: usize, height: usize) -> Self {
        self.width = width;
        self.height = height;
        self
    }

    pub fn validate(&self) -> Result<()> {
        use std::f64::consts::{FRAC_PI_2, PI};
        if !(self.fov > 0.0 && self.fov < PI) {
            return Err(Error::InvalidArgument(format!("crop fov {} not in (0, pi)", self.fov)));
        }
        if !(-FRAC_PI_2..=FRAC_PI_2).contains(&self.phi) {
            return Err(Error::InvalidArgument(format!(
                "crop latitude {} outside [-pi/2, pi/2]",
                self.phi
            )));
        }
        if !self.theta.is_finite() {
            return Err(Error::NonFinite("crop longitude"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidArgument("crop resolution must be non-zero".into()));
        }
        Ok(())
    }

    /// Camera-to-world orientation: yaw θ about +y after pitching by φ about x,
    /// so the canonical forward axis +z lands on direction (θ, φ). Zero roll.
    pub fn orientation<T: Real>(&self) -> Rotation<T> {
        Rotation::about_y(T::lit(self.theta)).compose(&Rotation::about_x(T::lit(-self.phi)))
    }

    pub fn camera<T: Real>(&self) -> Result<PinholeCamera<T>> {
        self.validate()?;
        let k = CameraIntrinsics::from_horizontal_fov(T::lit(self.fov), self.width, self.height)?;
        Ok(PinholeCamera::new(
            k,
            RigidExtrinsic::from_camera_pose(&self.orientation(), &Vector3::zeros()),
        ))
    }
}

/// Output of [`extract_perspective_crop`].
#[derive(Clone, Debug)]
pub struct PerspectiveCrop<T: Real> {
    pub image: Image<T>,
    pub mask: InstanceMask,
    pub intrinsics: CameraIntrinsics<T>,
    /// World-to-camera extrinsic of the crop camera (camera at the panorama center).
    pub extrinsic: RigidExtrinsic<T>,
}

impl<T: Real> PerspectiveCrop<T> {
    pub fn camera(&self) -> PinholeCamera<T> {
        PinholeCamera::new(self.intrinsics, self.extrinsic)
    }
}

/// Renders `pano ⊙ mask` through a pinhole camera looking along (θ, φ).
///
/// Color uses bilinear resampling of the masked panorama with horizontal
/// wrap-around and clamped rows; the crop mask uses nearest-neighbor lookup so
/// it stays binary.
pub fn extract_perspective_crop<T: Real>(
    pano: &PanoramaImage<T>,
    mask: &InstanceMask,
    spec: &CropSpec,
) -> Result<PerspectiveCrop<T>> {
    if !mask.same_size(pano.image()) {
        return Err(Error::ResolutionMismatch(
            mask.width(),
            mask.height(),
            pano.width(),
            pano.height(),
        ));
    }
    let camera = spec.camera::<T>()?;
    let img = pano.image();
    let channels = img.channels();
    let (w, h) = (pano.width(), pano.height());
    let mut out = Image::filled(spec.width, spec.height, channels, T::zero());
    let mut out_mask = InstanceMask::zeros(spec.width, spec.height);
    let cam_to_world = camera.extrinsic.rotation.inverse().to_matrix();
    let half = T::lit(0.5);
    let mut sample = vec![T::zero(); channels];
    for j in 0..spec.height {
        for i in 0..spec.width {
            let ray_cam = camera.intrinsics.unproject(
                T::from_usize_lossy(i) + half,
                T::from_usize_lossy(j) + half,
                T::one(),
            );
            let d = cam_to_world * ray_cam;
            let (x, y) = direction_to_pixel_dims(w, h, &d)?;
            bilinear_masked(img, mask, x, y, &mut sample);
            for (c, v) in sample.iter().enumerate() {
                out.set(i, j, c, *v);
            }
            let (nu, nv) = nearest_pixel(w, h, x, y);
            out_mask.set(i, j, mask.get(nu, nv));
        }
    }
    Ok(PerspectiveCrop {
        image: out,
        mask: out_mask,
        intrinsics: camera.intrinsics,
        extrinsic: camera.extrinsic,
    })
}

#[inline]
fn wrap_col(u: i64, w: usize) -> usize {
    u.rem_euclid(w as i64) as usize
}

#[inline]
fn clamp_row(v: i64, h: usize) -> usize {
    v.clamp(0, h as i64 - 1) as usize
}

fn nearest_pixel<T: Real>(w: usize, h: usize, x: T, y: T) -> (usize, usize) {
    let half = T::lit(0.5);
    (
        wrap_col((x + half).floor_i64(), w),
        clamp_row((y + half).floor_i64(), h),
    )
}

fn bilinear_masked<T: Real>(img: &Image<T>, mask: &InstanceMask, x: T, y: T, out: &mut [T]) {
    let (w, h) = (img.width(), img.height());
    let x0 = x.floor_i64();
    let y0 = y.floor_i64();
    let fx = x - T::lit(x0 as f64);
    let fy = y - T::lit(y0 as f64);
    let one = T::one();
    let taps = [
        (x0, y0, (one - fx) * (one - fy)),
        (x0 + 1, y0, fx * (one - fy)),
        (x0, y0 + 1, (one - fx) * fy),
        (x0 + 1, y0 + 1, fx * fy),
    ];
    out.iter_mut().for_each(|v| *v = T::zero());
    for (u, v, wgt) in taps {
        let (u, v) = (wrap_col(u, w), clamp_row(v, h));
        if !mask.get(u, v) {
            continue;
        }
        for (c, o) in out.iter_mut().enumerate() {
            *o += wgt * img.get(u, v, c);
        }
    }
}

/// Crop spec centered on the mask's mean direction whose field of view covers the
/// mask's angular extent times `1 + padding`.
pub fn crop_spec_for_mask(mask: &InstanceMask, padding: f64, resolution: usize) -> Result<CropSpec> {
    if mask.is_empty() {
        return Err(Error::EmptyInput("mask has no pixels"));
    }
    let (w, h) = (mask.width(), mask.height());
    let mut dirs = Vec::with_capacity(mask.count());
    let mut mean = Vector3::<f64>::zeros();
    for v in 0..h {
        for u in 0..w {
            if mask.get(u, v) {
                let d = direction_at(w, h, u as f64 + 0.5, v as f64 + 0.5);
                mean += d;
                dirs.push(d);
            }
        }
    }
    let center = if mean.norm() > 1e-9 {
        mean
    } else {
        dirs[0]
    };
    let (theta, phi) = angles_from_direction(&center)?;
    let probe = CropSpec {
        theta,
        phi,
        fov: 1.0,
        width: resolution,
        height: resolution,
    };
    let to_cam = probe.orientation::<f64>().inverse().to_matrix();
    // Half a pixel of angular margin around the outermost pixel centers.
    let half_pixel = std::f64::consts::PI / h as f64 * 0.5;
    let mut half_extent = 0.0f64;
    for d in &dirs {
        let c = to_cam * d;
        if c.z <= 1e-6 {
            half_extent = std::f64::consts::FRAC_PI_2;
            break;
        }
        let ax = (c.x / c.z).abs().atan();
        let ay = (c.y / c.z).abs().atan();
        half_extent = half_extent.max(ax.max(ay) + half_pixel);
    }
    let fov = (2.0 * half_extent * (1.0 + padding)).clamp(1e-3, 170f64.to_radians());
    let spec = CropSpec { fov, ..probe };
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panorama::projection::direction_from_angles;

    fn stripe_pano() -> PanoramaImage<f64> {
        let (w, h) = (256, 128);
        let mut img = Image::filled(w, h, 3, 0.0);
        for v in 0..h {
            for u in 0..w {
                img.set(u, v, 0, (u / 8 % 2) as f64);
                img.set(u, v, 1, v as f64 / h as f64);
                img.set(u, v, 2, 0.25);
            }
        }
        PanoramaImage::new(img).unwrap()
    }

    #[test]
    fn straight_ahead_center_matches_panorama_center() {
        let pano = stripe_pano();
        let mask = InstanceMask::ones(256, 128);
        // Odd crop size puts a pixel center exactly on the optical axis.
        let spec = CropSpec::new(0.0, 0.0, 90f64.to_radians())
            .unwrap()
            .with_resolution(65, 65);
        let crop = extract_perspective_crop(&pano, &mask, &spec).unwrap();
        let center = crop.image.pixel(32, 32);
        // Forward lies on the corner shared by pano pixels (127..128, 63..64);
        // the bilinear blend of the four equals their average.
        for c in 0..3 {
            let avg = (pano.image().get(127, 63, c)
                + pano.image().get(128, 63, c)
                + pano.image().get(127, 64, c)
                + pano.image().get(128, 64, c))
                / 4.0;
            assert!((center[c] - avg).abs() < 1e-9);
        }
        assert!(crop.mask.get(32, 32));
    }

    #[test]
    fn crop_intrinsics_focal_formula() {
        let pano = stripe_pano();
        let mask = InstanceMask::ones(256, 128);
        let spec = CropSpec::new(0.3, 0.1, 90f64.to_radians()).unwrap();
        let crop = extract_perspective_crop(&pano, &mask, &spec).unwrap();
        let f = (518.0 / 2.0) / (spec.fov / 2.0).tan();
        assert_eq!(crop.intrinsics.fx, f);
        assert!((f - 259.0).abs() < 1e-9);
        assert_eq!(crop.intrinsics.width, 518);
    }

    #[test]
    fn center_ray_reproduces_view_direction() {
        for &(theta, phi) in &[(0.0, 0.0), (2.5, -0.7), (-3.0, 1.2), (1.0, 0.3)] {
            let spec = CropSpec::new(theta, phi, 1.0).unwrap();
            let cam = spec.camera::<f64>().unwrap();
            let d = cam.ray_direction(259.0, 259.0);
            let (t, p) = angles_from_direction(&d).unwrap();
            assert!((t - theta).abs() < 1e-6 && (p - phi).abs() < 1e-6);
            assert!((d - direction_from_angles(theta, phi)).norm() < 1e-9);
            // Zero roll: the camera's right axis stays horizontal.
            let right = cam.extrinsic.rotation.inverse().rotate(&Vector3::x());
            assert!(right.y.abs() < 1e-12);
        }
    }

    #[test]
    fn masked_out_pixels_are_black() {
        let pano = stripe_pano();
        let mask = InstanceMask::zeros(256, 128);
        let crop =
            extract_perspective_crop(&pano, &mask, &CropSpec::new(0.0, 0.0, 1.0).unwrap()).unwrap();
        assert!(crop.image.data().iter().all(|&v| v == 0.0));
        assert!(crop.mask.is_empty());
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(CropSpec::new(0.0, 0.0, 0.0).is_err());
        assert!(CropSpec::new(0.0, 0.0, std::f64::consts::PI).is_err());
        assert!(CropSpec::new(0.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn mask_spec_covers_mask() {
        let (w, h) = (256, 128);
        let mask = InstanceMask::from_fn(w, h, |u, v| (140..160).contains(&u) && (50..70).contains(&v));
        let spec = crop_spec_for_mask(&mask, 0.2, 128).unwrap();
        let pano = PanoramaImage::new(Image::filled(w, h, 1, 1.0f64)).unwrap();
        let crop = extract_perspective_crop(&pano, &mask, &spec).unwrap();
        let (u0, v0, u1, v1) = crop.mask.bounds().unwrap();
        assert!(u0 > 0 && v0 > 0 && u1 < 127 && v1 < 127, "{:?}", (u0, v0, u1, v1));
        // The padded object fills most of the crop.
        assert!(u1 - u0 > 80);
    }
}
