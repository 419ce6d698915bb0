use nalgebra::Vector3;
use panoalign::geometry::primitives::cuboid;
use panoalign::geometry::{
    CameraIntrinsics, ObjectWorldTransform, PinholeCamera, RigidExtrinsic, Rotation,
};
use panoalign::panorama::projection::direction_at;
use panoalign::raster::{rasterize_silhouette, render_depth_pointcloud, render_panorama};
use proptest::prelude::*;

fn camera_at(eye: Vector3<f64>, yaw: f64, size: usize) -> PinholeCamera<f64> {
    let k = CameraIntrinsics::from_horizontal_fov(1.0, size, size).unwrap();
    PinholeCamera::new(k, RigidExtrinsic::from_camera_pose(&Rotation::about_y(yaw), &eye))
}

/// Distance along unit `d` from the center of a box with half extents `h`.
fn box_exit(d: &Vector3<f64>, h: &Vector3<f64>) -> f64 {
    (0..3).filter(|&i| d[i] != 0.0).map(|i| h[i] / d[i].abs()).fold(f64::INFINITY, f64::min)
}

#[test]
fn facing_square_fills_its_projected_footprint() {
    // A 1 x 1 face at distance 4, seen with f = (64 / 2) / tan(0.5).
    let m = cuboid(Vector3::new(1.0, 1.0, 0.2));
    let cam = camera_at(Vector3::new(0.0, 0.0, -4.1), 0.0, 64);
    let r = rasterize_silhouette(&m, &cam);
    let f = cam.intrinsics.fx;
    let side = f / 4.0;
    let expected = side * side;
    assert!((r.covered() as f64 - expected).abs() < 4.0 * side, "{} vs {expected}", r.covered());
    assert!((r.depth_at(32, 32) - 4.0).abs() < 1e-12);
    assert_eq!(r.mask().count(), r.covered());
    for (s, d) in r.silhouette.iter().zip(&r.depth) {
        assert_eq!(*s == 1, d.is_finite());
    }
}

#[test]
fn nearer_surfaces_win_the_depth_test() {
    let mut m = cuboid(Vector3::new(1.0, 1.0, 1.0));
    m.append(&cuboid(Vector3::new(0.4, 0.4, 0.4)).map_vertices(|p| p + Vector3::new(0.0, 0.0, -2.0)));
    let cam = camera_at(Vector3::new(0.0, 0.0, -5.0), 0.0, 64);
    let r = rasterize_silhouette(&m, &cam);
    assert!((r.depth_at(32, 32) - 2.8).abs() < 1e-12);
}

#[test]
fn panorama_inside_a_box_matches_the_ray_exit_distance() {
    let h = Vector3::new(3.0, 1.4, 2.0);
    let room = cuboid(h * 2.0);
    let (w, ht) = (128, 64);
    let r = render_panorama(&[&room], w, ht, &Vector3::zeros());
    for v in 0..ht {
        for u in 0..w {
            let d = direction_at(w, ht, u as f64 + 0.5, v as f64 + 0.5);
            let depth = r.depth.image().get(u, v, 0);
            assert!((depth - box_exit(&d, &h)).abs() < 1e-9);
            assert_eq!(r.ids[v * w + u], Some(0));
        }
    }
}

#[test]
fn panorama_ids_follow_the_nearest_mesh() {
    let room = cuboid(Vector3::new(8.0f64, 3.0, 8.0));
    let obj = cuboid(Vector3::new(0.5, 0.5, 0.5)).map_vertices(|p| p + Vector3::new(0.0, 0.0, 2.0));
    let r = render_panorama(&[&obj, &room], 256, 128, &Vector3::zeros());
    let mask = r.mask_of(0);
    // Straight ahead hits the near face of the object.
    assert!(mask.get(128, 64));
    assert!((r.depth.image().get(128, 64, 0) - 1.75).abs() < 1e-3);
    assert!(!mask.get(0, 64));
    assert_eq!(mask.count() + r.mask_of(1).count(), 256 * 128);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rendered_points_lie_on_the_visible_surface(yaw in -3.1..3.1f64, dist in 2.5..6.0f64, sx in 0.5..2.0f64) {
        let m = cuboid(Vector3::new(1.0, 1.0, 1.0));
        let t = ObjectWorldTransform::from_rigid_scale(
            RigidExtrinsic::from_rotation(Rotation::about_y(yaw)),
            panoalign::geometry::AnisotropicScale::new(sx, 1.0, 1.0).unwrap(),
        );
        let placed = m.transformed(&t);
        let cam = camera_at(Vector3::new(0.0, 0.3, -dist), 0.0, 48);
        let pts = render_depth_pointcloud(&placed, &cam).into_points();
        prop_assert!(!pts.is_empty());
        let inv = t.inverse_matrix();
        for p in &pts {
            let l = (inv * p.push(1.0)).xyz();
            let r = l.abs().max();
            prop_assert!((r - 0.5).abs() < 1e-9);
            // Front half only: no point is farther than the box center plus its radius.
            prop_assert!((p - cam.center()).norm() <= dist + 1e-9 + 0.5 * (sx * sx + 2.0).sqrt());
        }
    }
}
