//! Closed triangle meshes of simple solids, centered on the origin with
//! outward-facing counter-clockwise triangles.

use nalgebra::Vector3;

use super::TriangleMesh;
use crate::scalar::Real;

/// Axis-aligned box with the given full extents.
pub fn cuboid<T: Real>(size: Vector3<T>) -> TriangleMesh<T> {
    let h = size * T::lit(0.5);
    let vertices = (0..8)
        .map(|i| {
            Vector3::new(
                if i & 1 == 0 { -h.x } else { h.x },
                if i & 2 == 0 { -h.y } else { h.y },
                if i & 4 == 0 { -h.z } else { h.z },
            )
        })
        .collect();
    let triangles = vec![
        [0, 4, 6], [0, 6, 2], // -x
        [1, 3, 7], [1, 7, 5], // +x
        [0, 1, 5], [0, 5, 4], // -y
        [2, 6, 7], [2, 7, 3], // +y
        [0, 2, 3], [0, 3, 1], // -z
        [4, 5, 7], [4, 7, 6], // +z
    ];
    TriangleMesh::new(vertices, triangles).expect("valid cuboid")
}

pub fn unit_cube<T: Real>() -> TriangleMesh<T> {
    cuboid(Vector3::repeat(T::one()))
}

/// Latitude-longitude sphere.
pub fn uv_sphere<T: Real>(radius: T, segments: usize, rings: usize) -> TriangleMesh<T> {
    let segments = segments.max(3);
    let rings = rings.max(2);
    let mut vertices = vec![Vector3::new(T::zero(), radius, T::zero())];
    for r in 1..rings {
        let phi = T::pi() * T::from_usize_lossy(r) / T::from_usize_lossy(rings);
        for s in 0..segments {
            let theta = T::two_pi() * T::from_usize_lossy(s) / T::from_usize_lossy(segments);
            vertices.push(Vector3::new(
                radius * phi.sin() * theta.sin(),
                radius * phi.cos(),
                radius * phi.sin() * theta.cos(),
            ));
        }
    }
    vertices.push(Vector3::new(T::zero(), -radius, T::zero()));
    let bottom = vertices.len() - 1;
    let ring = |r: usize, s: usize| 1 + (r - 1) * segments + s % segments;
    let mut triangles = Vec::new();
    for s in 0..segments {
        triangles.push([0, ring(1, s), ring(1, s + 1)]);
    }
    for r in 1..rings - 1 {
        for s in 0..segments {
            let (a, b) = (ring(r, s), ring(r, s + 1));
            let (c, d) = (ring(r + 1, s), ring(r + 1, s + 1));
            triangles.push([a, c, d]);
            triangles.push([a, d, b]);
        }
    }
    for s in 0..segments {
        triangles.push([bottom, ring(rings - 1, s + 1), ring(rings - 1, s)]);
    }
    TriangleMesh::new(vertices, triangles).expect("valid sphere")
}

/// Capped cylinder along y.
pub fn cylinder<T: Real>(radius: T, height: T, segments: usize) -> TriangleMesh<T> {
    let segments = segments.max(3);
    let hh = height * T::lit(0.5);
    let mut vertices = vec![
        Vector3::new(T::zero(), hh, T::zero()),
        Vector3::new(T::zero(), -hh, T::zero()),
    ];
    for s in 0..segments {
        let theta = T::two_pi() * T::from_usize_lossy(s) / T::from_usize_lossy(segments);
        let (x, z) = (radius * theta.sin(), radius * theta.cos());
        vertices.push(Vector3::new(x, hh, z));
        vertices.push(Vector3::new(x, -hh, z));
    }
    let top = |s: usize| 2 + 2 * (s % segments);
    let bot = |s: usize| 3 + 2 * (s % segments);
    let mut triangles = Vec::new();
    for s in 0..segments {
        triangles.push([0, top(s), top(s + 1)]);
        triangles.push([1, bot(s + 1), bot(s)]);
        triangles.push([top(s), bot(s), bot(s + 1)]);
        triangles.push([top(s), bot(s + 1), top(s + 1)]);
    }
    TriangleMesh::new(vertices, triangles).expect("valid cylinder")
}

/// Extruded L profile: a `width` x `height` footprint in the xy plane with an
/// `arm` thick vertical bar on the left and horizontal bar at the bottom,
/// extruded `depth` along z. Re-centered on its bounding box.
pub fn l_shape<T: Real>(width: T, height: T, arm: T, depth: T) -> TriangleMesh<T> {
    // Profile polygon, counter-clockwise.
    let profile = [
        (T::zero(), T::zero()),
        (width, T::zero()),
        (width, arm),
        (arm, arm),
        (arm, height),
        (T::zero(), height),
    ];
    let hz = depth * T::lit(0.5);
    let mut vertices = Vec::new();
    for &(x, y) in &profile {
        vertices.push(Vector3::new(x, y, hz));
    }
    for &(x, y) in &profile {
        vertices.push(Vector3::new(x, y, -hz));
    }
    let n = profile.len();
    // Front cap (+z) split into two convex rectangles.
    let mut triangles = vec![
        [0, 1, 2], [0, 2, 3],
        [0, 3, 4], [0, 4, 5],
    ];
    // Back cap (-z), reversed winding.
    triangles.extend([[n, n + 2, n + 1], [n, n + 3, n + 2], [n, n + 4, n + 3], [n, n + 5, n + 4]]);
    for i in 0..n {
        let j = (i + 1) % n;
        triangles.push([i, i + n, j + n]);
        triangles.push([i, j + n, j]);
    }
    let mut mesh = TriangleMesh::new(vertices, triangles).expect("valid L shape");
    mesh.recenter().expect("non-empty");
    mesh
}
