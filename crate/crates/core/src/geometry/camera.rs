use nalgebra::Vector3;

use super::RigidExtrinsic;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Pinhole intrinsics in pixels.
///
/// Image-plane coordinates are continuous with pixel `(i, j)` covering
/// `[i, i+1) x [j, j+1)`, so its center sits at `(i + 0.5, j + 0.5)`. Rows grow
/// downward while the camera y axis points up.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraIntrinsics<T: Real> {
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    pub width: usize,
    pub height: usize,
}

impl<T: Real> CameraIntrinsics<T> {
    pub fn new(fx: T, fy: T, cx: T, cy: T, width: usize, height: usize) -> Result<Self> {
        if !(fx > T::zero() && fy > T::zero()) {
            return Err(Error::InvalidArgument("focal lengths must be positive".into()));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("image size must be non-zero".into()));
        }
        let (w, h) = (T::from_usize_lossy(width), T::from_usize_lossy(height));
        if !(cx >= T::zero() && cx <= w && cy >= T::zero() && cy <= h) {
            return Err(Error::InvalidArgument(
                "principal point must lie inside the image".into(),
            ));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// Square-pixel intrinsics with horizontal field of view `fov_x` and a
    /// centered principal point: `f = (width / 2) / tan(fov_x / 2)`.
    pub fn from_horizontal_fov(fov_x: T, width: usize, height: usize) -> Result<Self> {
        if !(fov_x > T::zero() && fov_x < T::pi()) {
            return Err(Error::InvalidArgument("field of view must be in (0, pi)".into()));
        }
        let half_w = T::from_usize_lossy(width) * T::lit(0.5);
        let f = half_w / (fov_x * T::lit(0.5)).tan();
        Self::new(
            f,
            f,
            half_w,
            T::from_usize_lossy(height) * T::lit(0.5),
            width,
            height,
        )
    }

    /// Same as [`Self::from_horizontal_fov`] but for the vertical field of view.
    pub fn from_vertical_fov(fov_y: T, width: usize, height: usize) -> Result<Self> {
        if !(fov_y > T::zero() && fov_y < T::pi()) {
            return Err(Error::InvalidArgument("field of view must be in (0, pi)".into()));
        }
        let half_h = T::from_usize_lossy(height) * T::lit(0.5);
        let f = half_h / (fov_y * T::lit(0.5)).tan();
        Self::new(
            f,
            f,
            T::from_usize_lossy(width) * T::lit(0.5),
            half_h,
            width,
            height,
        )
    }

    pub fn vertical_fov(&self) -> T {
        T::lit(2.0) * (T::from_usize_lossy(self.height) * T::lit(0.5) / self.fy).atan()
    }

    /// Image-plane position of a camera-frame point in front of the camera.
    #[inline]
    pub fn project(&self, p: &Vector3<T>) -> Option<(T, T)> {
        if p.z <= T::zero() {
            return None;
        }
        Some((self.cx + self.fx * p.x / p.z, self.cy - self.fy * p.y / p.z))
    }

    /// Camera-frame point at z-depth `depth` behind image-plane position `(x, y)`.
    #[inline]
    pub fn unproject(&self, x: T, y: T, depth: T) -> Vector3<T> {
        Vector3::new(
            (x - self.cx) / self.fx * depth,
            -(y - self.cy) / self.fy * depth,
            depth,
        )
    }

    /// Intrinsics for the same field of view rendered at `width` x `height`.
    pub fn rescaled(&self, width: usize, height: usize) -> Self {
        let sx = T::from_usize_lossy(width) / T::from_usize_lossy(self.width);
        let sy = T::from_usize_lossy(height) / T::from_usize_lossy(self.height);
        Self {
            fx: self.fx * sx,
            fy: self.fy * sy,
            cx: self.cx * sx,
            cy: self.cy * sy,
            width,
            height,
        }
    }
}

/// Intrinsics plus world-to-camera extrinsic.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PinholeCamera<T: Real> {
    pub intrinsics: CameraIntrinsics<T>,
    pub extrinsic: RigidExtrinsic<T>,
}

impl<T: Real> PinholeCamera<T> {
    pub fn new(intrinsics: CameraIntrinsics<T>, extrinsic: RigidExtrinsic<T>) -> Self {
        Self {
            intrinsics,
            extrinsic,
        }
    }

    pub fn project_world(&self, p: &Vector3<T>) -> Option<(T, T)> {
        self.intrinsics.project(&self.extrinsic.apply(p))
    }

    /// Unit world-frame direction of the ray through image-plane position `(x, y)`.
    pub fn ray_direction(&self, x: T, y: T) -> Vector3<T> {
        let c = self.intrinsics.unproject(x, y, T::one());
        (self.extrinsic.rotation.inverse().rotate(&c)).normalize()
    }

    pub fn center(&self) -> Vector3<T> {
        self.extrinsic.camera_center()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn focal_from_fov_matches_formula() {
        let k = CameraIntrinsics::<f64>::from_horizontal_fov(std::f64::consts::FRAC_PI_2, 518, 518)
            .unwrap();
        assert!((k.fx - 259.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_intrinsics() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 5.0, 1.0, 4, 4).is_err());
    }

    #[test]
    fn project_unproject_round_trip() {
        let k = CameraIntrinsics::new(300.0, 310.0, 160.0, 120.0, 320, 240).unwrap();
        let p = Vector3::new(0.3, -0.2, 2.5);
        let (x, y) = k.project(&p).unwrap();
        assert!((k.unproject(x, y, p.z) - p).norm() < 1e-12);
        assert!(k.project(&Vector3::new(0.0, 0.0, -1.0)).is_none());
    }
}
