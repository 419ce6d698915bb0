//! Equirectangular rendering by ray casting from a single center point.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::geometry::{Aabb, TriangleMesh};
use crate::panorama::{projection::direction_at, Image, InstanceMask, PanoramaImage};
use crate::scalar::Real;

/// Per-pixel nearest hit of a panoramic ray cast.
#[derive(Clone, Debug, PartialEq)]
pub struct PanoramaRender<T: Real> {
    /// Distance along each pixel ray; +inf where nothing was hit.
    pub depth: PanoramaImage<T>,
    /// Index of the mesh hit at each pixel.
    pub ids: Vec<Option<usize>>,
}

impl<T: Real> PanoramaRender<T> {
    pub fn mask_of(&self, id: usize) -> InstanceMask {
        let (w, h) = (self.depth.width(), self.depth.height());
        InstanceMask::from_fn(w, h, |u, v| self.ids[v * w + u] == Some(id))
    }
}

/// Casts one ray through every pixel center from `origin`; nearest hit wins,
/// exact distance ties go to the lower mesh index.
pub fn render_panorama<T: Real>(
    meshes: &[&TriangleMesh<T>],
    width: usize,
    height: usize,
    origin: &Vector3<T>,
) -> PanoramaRender<T> {
    let boxes: Vec<Option<Aabb<T>>> = meshes.iter().map(|m| m.bbox().ok()).collect();
    let half = T::lit(0.5);
    let rows: Vec<(Vec<T>, Vec<Option<usize>>)> = (0..height)
        .into_par_iter()
        .map(|v| {
            let mut depth = Vec::with_capacity(width);
            let mut ids = Vec::with_capacity(width);
            for u in 0..width {
                let dir = direction_at(
                    width,
                    height,
                    T::from_usize_lossy(u) + half,
                    T::from_usize_lossy(v) + half,
                );
                let (t, id) = cast(meshes, &boxes, origin, &dir);
                depth.push(t);
                ids.push(id);
            }
            (depth, ids)
        })
        .collect();
    let mut depth = Vec::with_capacity(width * height);
    let mut ids = Vec::with_capacity(width * height);
    for (d, i) in rows {
        depth.extend(d);
        ids.extend(i);
    }
    PanoramaRender {
        depth: PanoramaImage::new(Image::new(width, height, 1, depth).expect("raster size"))
            .expect("2:1 panorama"),
        ids,
    }
}

fn cast<T: Real>(
    meshes: &[&TriangleMesh<T>],
    boxes: &[Option<Aabb<T>>],
    origin: &Vector3<T>,
    dir: &Vector3<T>,
) -> (T, Option<usize>) {
    let mut best = T::lit(f64::INFINITY);
    let mut best_id = None;
    for (id, (mesh, bbox)) in meshes.iter().zip(boxes).enumerate() {
        let Some(bbox) = bbox else { continue };
        match ray_box(origin, dir, bbox) {
            Some(t_enter) if t_enter < best => {}
            _ => continue,
        }
        for tri in mesh.triangles() {
            let v = mesh.vertices();
            if let Some(t) = ray_triangle(origin, dir, &v[tri[0]], &v[tri[1]], &v[tri[2]]) {
                if t < best {
                    best = t;
                    best_id = Some(id);
                }
            }
        }
    }
    (best, best_id)
}

/// Entry distance of a ray into a box (0 when starting inside).
pub(crate) fn ray_box<T: Real>(o: &Vector3<T>, d: &Vector3<T>, b: &Aabb<T>) -> Option<T> {
    let mut t0 = T::zero();
    let mut t1 = T::lit(f64::INFINITY);
    let eps = T::lit(1e-9);
    for i in 0..3 {
        if d[i].abs() < T::lit(1e-300) {
            if o[i] < b.min[i] - eps || o[i] > b.max[i] + eps {
                return None;
            }
            continue;
        }
        let inv = T::one() / d[i];
        let (mut a, mut c) = ((b.min[i] - eps - o[i]) * inv, (b.max[i] + eps - o[i]) * inv);
        if a > c {
            std::mem::swap(&mut a, &mut c);
        }
        t0 = crate::scalar::max(t0, a);
        t1 = crate::scalar::min(t1, c);
        if t0 > t1 {
            return None;
        }
    }
    Some(t0)
}

/// Möller-Trumbore intersection distance, two-sided, positive hits only.
pub(crate) fn ray_triangle<T: Real>(
    o: &Vector3<T>,
    d: &Vector3<T>,
    a: &Vector3<T>,
    b: &Vector3<T>,
    c: &Vector3<T>,
) -> Option<T> {
    let e1 = b - a;
    let e2 = c - a;
    let p = d.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < T::lit(1e-14) {
        return None;
    }
    let inv = T::one() / det;
    let s = o - a;
    let u = s.dot(&p) * inv;
    if u < T::zero() || u > T::one() {
        return None;
    }
    let q = s.cross(&e1);
    let v = d.dot(&q) * inv;
    if v < T::zero() || u + v > T::one() {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t > T::lit(1e-9)).then_some(t)
}
