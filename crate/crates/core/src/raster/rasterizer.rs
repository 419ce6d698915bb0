use nalgebra::Vector3;

use crate::geometry::{PinholeCamera, PointCloud, TriangleMesh};
use crate::panorama::{Image, InstanceMask};
use crate::scalar::Real;

/// Triangles are clipped against this camera-space depth before projection.
pub const NEAR_PLANE: f64 = 1e-4;

/// Silhouette and z-depth rasters of one view.
///
/// `silhouette[i] == 1` exactly where `depth[i]` is finite.
#[derive(Clone, Debug, PartialEq)]
pub struct RenderTarget<T> {
    pub width: usize,
    pub height: usize,
    pub silhouette: Vec<u8>,
    pub depth: Vec<T>,
}

impl<T: Real> RenderTarget<T> {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            silhouette: vec![0; width * height],
            depth: vec![T::lit(f64::INFINITY); width * height],
        }
    }

    #[inline]
    pub fn depth_at(&self, u: usize, v: usize) -> T {
        self.depth[v * self.width + u]
    }

    pub fn covered(&self) -> usize {
        self.silhouette.iter().map(|&s| s as usize).sum()
    }

    pub fn mask(&self) -> InstanceMask {
        InstanceMask::new(self.width, self.height, self.silhouette.clone())
            .expect("silhouette is binary")
    }

    pub fn depth_image(&self) -> Image<T> {
        Image::new(self.width, self.height, 1, self.depth.clone()).expect("depth raster size")
    }
}

/// Z-buffered rasterization of `mesh` seen from `cam`.
///
/// A pixel is covered when its center lies inside a triangle of either winding;
/// centers exactly on an edge belong to the triangle for which that edge is a
/// top or left edge, so shared edges are never drawn twice or skipped.
pub fn rasterize_silhouette<T: Real>(mesh: &TriangleMesh<T>, cam: &PinholeCamera<T>) -> RenderTarget<T> {
    rasterize_triangles(mesh.vertices(), mesh.triangles(), cam)
}

pub fn rasterize_triangles<T: Real>(
    vertices: &[Vector3<T>],
    triangles: &[[usize; 3]],
    cam: &PinholeCamera<T>,
) -> RenderTarget<T> {
    let k = &cam.intrinsics;
    let mut target = RenderTarget::empty(k.width, k.height);
    let camera_space: Vec<Vector3<T>> = vertices.iter().map(|v| cam.extrinsic.apply(v)).collect();
    let near = T::lit(NEAR_PLANE);
    let mut poly: Vec<Vector3<T>> = Vec::with_capacity(4);
    for tri in triangles {
        let pts = [camera_space[tri[0]], camera_space[tri[1]], camera_space[tri[2]]];
        if pts.iter().all(|p| p.z < near) {
            continue;
        }
        clip_near(&pts, near, &mut poly);
        if poly.len() < 3 {
            continue;
        }
        let screen: Vec<ScreenVertex<T>> = poly
            .iter()
            .map(|p| ScreenVertex {
                x: k.cx + k.fx * p.x / p.z,
                y: k.cy - k.fy * p.y / p.z,
                inv_z: T::one() / p.z,
            })
            .collect();
        for i in 1..screen.len() - 1 {
            draw_triangle(&mut target, [screen[0], screen[i], screen[i + 1]]);
        }
    }
    target
}

#[derive(Clone, Copy)]
struct ScreenVertex<T> {
    x: T,
    y: T,
    inv_z: T,
}

/// Sutherland-Hodgman against the single plane `z = near`.
fn clip_near<T: Real>(tri: &[Vector3<T>; 3], near: T, out: &mut Vec<Vector3<T>>) {
    out.clear();
    for i in 0..3 {
        let a = tri[i];
        let b = tri[(i + 1) % 3];
        let a_in = a.z >= near;
        let b_in = b.z >= near;
        if a_in {
            out.push(a);
        }
        if a_in != b_in {
            let t = (near - a.z) / (b.z - a.z);
            let mut p = a + (b - a) * t;
            p.z = near;
            out.push(p);
        }
    }
}

#[inline]
fn edge<T: Real>(ax: T, ay: T, bx: T, by: T, px: T, py: T) -> T {
    (bx - ax) * (py - ay) - (by - ay) * (px - ax)
}

#[inline]
fn is_top_left<T: Real>(a: &ScreenVertex<T>, b: &ScreenVertex<T>) -> bool {
    let dy = b.y - a.y;
    dy > T::zero() || (dy == T::zero() && b.x < a.x)
}

fn draw_triangle<T: Real>(target: &mut RenderTarget<T>, v: [ScreenVertex<T>; 3]) {
    let [a, mut b, mut c] = v;
    let mut area = edge(a.x, a.y, b.x, b.y, c.x, c.y);
    if area < T::zero() {
        std::mem::swap(&mut b, &mut c);
        area = -area;
    }
    if !(area > T::zero()) || !area.is_finite_value() {
        return;
    }
    let half = T::lit(0.5);
    let min_x = crate::scalar::min(a.x, crate::scalar::min(b.x, c.x));
    let max_x = crate::scalar::max(a.x, crate::scalar::max(b.x, c.x));
    let min_y = crate::scalar::min(a.y, crate::scalar::min(b.y, c.y));
    let max_y = crate::scalar::max(a.y, crate::scalar::max(b.y, c.y));
    let (w, h) = (target.width as i64, target.height as i64);
    let i0 = (min_x - half).floor_i64().max(0);
    let i1 = ((max_x - half).floor_i64() + 1).min(w - 1);
    let j0 = (min_y - half).floor_i64().max(0);
    let j1 = ((max_y - half).floor_i64() + 1).min(h - 1);
    if i0 > i1 || j0 > j1 {
        return;
    }
    let tl_ab = is_top_left(&a, &b);
    let tl_bc = is_top_left(&b, &c);
    let tl_ca = is_top_left(&c, &a);
    let inside = |e: T, top_left: bool| e > T::zero() || (e == T::zero() && top_left);
    for j in j0..=j1 {
        let py = T::lit(j as f64) + half;
        for i in i0..=i1 {
            let px = T::lit(i as f64) + half;
            let e_bc = edge(b.x, b.y, c.x, c.y, px, py);
            let e_ca = edge(c.x, c.y, a.x, a.y, px, py);
            let e_ab = edge(a.x, a.y, b.x, b.y, px, py);
            if !(inside(e_bc, tl_bc) && inside(e_ca, tl_ca) && inside(e_ab, tl_ab)) {
                continue;
            }
            let inv_z = (e_bc * a.inv_z + e_ca * b.inv_z + e_ab * c.inv_z) / area;
            let z = T::one() / inv_z;
            let idx = j as usize * target.width + i as usize;
            if z < target.depth[idx] {
                target.depth[idx] = z;
                target.silhouette[idx] = 1;
            }
        }
    }
}

/// Back-projects every covered pixel of the rendered depth into the world frame.
pub fn render_depth_pointcloud<T: Real>(mesh: &TriangleMesh<T>, cam: &PinholeCamera<T>) -> PointCloud<T> {
    let target = rasterize_silhouette(mesh, cam);
    depth_to_world_points(&target, cam)
}

pub(crate) fn depth_to_world_points<T: Real>(target: &RenderTarget<T>, cam: &PinholeCamera<T>) -> PointCloud<T> {
    let to_world = cam.extrinsic.inverse();
    let half = T::lit(0.5);
    let mut points = Vec::new();
    for v in 0..target.height {
        for u in 0..target.width {
            let z = target.depth_at(u, v);
            if z.is_finite_value() {
                let p = cam.intrinsics.unproject(
                    T::from_usize_lossy(u) + half,
                    T::from_usize_lossy(v) + half,
                    z,
                );
                points.push(to_world.apply(&p));
            }
        }
    }
    PointCloud::new(points).expect("finite depth")
}
