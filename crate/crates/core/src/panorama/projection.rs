//! Pixel <-> direction mapping of equirectangular images.
//!
//! Longitude θ ∈ [-π, π) is measured about +y with θ = 0 at +z; latitude φ is
//! positive upward. A unit direction is `(cos φ sin θ, sin φ, cos φ cos θ)`.
//! Pixel `(u, v)` has its center at image-plane position `(u + 0.5, v + 0.5)`.

use nalgebra::Vector3;

use super::PanoramaImage;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[inline]
pub fn direction_from_angles<T: Real>(theta: T, phi: T) -> Vector3<T> {
    let (cp, sp) = (phi.cos(), phi.sin());
    Vector3::new(cp * theta.sin(), sp, cp * theta.cos())
}

/// `(θ, φ)` of a non-zero direction, with θ wrapped into [-π, π).
pub fn angles_from_direction<T: Real>(d: &Vector3<T>) -> Result<(T, T)> {
    let n = d.norm();
    if !(n > T::zero()) || !n.is_finite_value() {
        return Err(Error::InvalidArgument("direction must be finite and non-zero".into()));
    }
    let d = d / n;
    let mut theta = d.x.atan2(d.z);
    if theta >= T::pi() {
        theta -= T::two_pi();
    }
    let phi = crate::scalar::max(crate::scalar::min(d.y, T::one()), -T::one()).asin();
    Ok((theta, phi))
}

/// Direction through continuous image-plane position `(x, y)` of a `width` x
/// `height` equirectangular image.
#[inline]
pub fn direction_at<T: Real>(width: usize, height: usize, x: T, y: T) -> Vector3<T> {
    let theta = x / T::from_usize_lossy(width) * T::two_pi() - T::pi();
    let phi = T::frac_pi_2() - y / T::from_usize_lossy(height) * T::pi();
    direction_from_angles(theta, phi)
}

/// Unit direction of pixel `(u, v)`'s center.
pub fn pixel_to_direction<T: Real>(
    pano: &PanoramaImage<T>,
    u: usize,
    v: usize,
) -> Result<Vector3<T>> {
    let (w, h) = (pano.width(), pano.height());
    if u >= w || v >= h {
        return Err(Error::PixelOutOfBounds {
            u: u as i64,
            v: v as i64,
            width: w,
            height: h,
        });
    }
    Ok(direction_at(
        w,
        h,
        T::from_usize_lossy(u) + T::lit(0.5),
        T::from_usize_lossy(v) + T::lit(0.5),
    ))
}

/// Continuous pixel-index coordinates of a direction: the inverse of
/// [`pixel_to_direction`], so integer results land on pixel centers. The
/// horizontal coordinate lies in [-0.5, W - 0.5).
pub fn direction_to_pixel<T: Real>(pano: &PanoramaImage<T>, d: &Vector3<T>) -> Result<(T, T)> {
    direction_to_pixel_dims(pano.width(), pano.height(), d)
}

pub(crate) fn direction_to_pixel_dims<T: Real>(
    width: usize,
    height: usize,
    d: &Vector3<T>,
) -> Result<(T, T)> {
    let (theta, phi) = angles_from_direction(d)?;
    let half = T::lit(0.5);
    let u = (theta + T::pi()) / T::two_pi() * T::from_usize_lossy(width) - half;
    let v = (T::frac_pi_2() - phi) / T::pi() * T::from_usize_lossy(height) - half;
    Ok((u, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panorama::Image;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pano(h: usize) -> PanoramaImage<f64> {
        PanoramaImage::new(Image::filled(2 * h, h, 1, 0.0)).unwrap()
    }

    #[test]
    fn image_center_looks_forward() {
        let d = direction_at::<f64>(1024, 512, 512.0, 256.0);
        assert!((d - Vector3::z()).norm() < 1e-6);
        // The pixel at (W/2, H/2) is half a pixel off the exact center.
        let p = pixel_to_direction(&pano(512), 512, 256).unwrap();
        assert!(p.angle(&Vector3::z()) <= 0.5f64.hypot(0.5) * std::f64::consts::PI / 512.0 + 1e-12);
    }

    #[test]
    fn top_row_center_points_up() {
        let p = pano(512);
        let d = pixel_to_direction(&p, 512, 0).unwrap();
        let half_pixel = std::f64::consts::PI / 512.0 * 0.5;
        assert!(d.angle(&Vector3::y()) <= half_pixel + 1e-12);
    }

    #[test]
    fn forward_maps_to_center() {
        let (u, v) = direction_to_pixel(&pano(512), &Vector3::z()).unwrap();
        assert!((u - 512.0).abs() <= 0.5 && (v - 256.0).abs() <= 0.5);
    }

    #[test]
    fn backward_maps_to_seam() {
        let p = pano(512);
        for d in [Vector3::new(0.0, 0.0, -1.0), Vector3::new(-0.0, 0.0, -1.0)] {
            let (u, v) = direction_to_pixel(&p, &d).unwrap();
            let at_seam = u.abs() <= 0.5 || (u - 1024.0).abs() <= 0.5;
            assert!(at_seam, "u = {u}");
            assert!((v - 256.0).abs() <= 0.5);
        }
    }

    #[test]
    fn zero_direction_rejected() {
        assert!(direction_to_pixel(&pano(8), &Vector3::zeros()).is_err());
    }

    #[test]
    fn out_of_bounds_pixel_rejected() {
        assert!(pixel_to_direction(&pano(8), 16, 0).is_err());
        assert!(pixel_to_direction(&pano(8), 0, 8).is_err());
    }

    #[test]
    fn random_directions_round_trip() {
        let p = pano(512);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let d = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            if d.norm() < 1e-3 {
                continue;
            }
            let (u, v) = direction_to_pixel(&p, &d).unwrap();
            let back = direction_at(1024, 512, u + 0.5, v + 0.5);
            let (u2, v2) = direction_to_pixel(&p, &back).unwrap();
            let du = (u - u2).abs().min(1024.0 - (u - u2).abs());
            assert!(du.hypot(v - v2) < 0.5);
            assert!((back - d.normalize()).norm() < 1e-9);
        }
    }

    #[test]
    fn every_pixel_round_trips() {
        let p = pano(64);
        for v in 0..64 {
            for u in 0..128 {
                let d = pixel_to_direction(&p, u, v).unwrap();
                assert!((d.norm() - 1.0).abs() < 1e-12);
                let (x, y) = direction_to_pixel(&p, &d).unwrap();
                assert!((x - u as f64).hypot(y - v as f64) < 0.5);
            }
        }
    }
}
