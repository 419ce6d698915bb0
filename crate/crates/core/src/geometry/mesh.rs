use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{bbox_of_slice, Aabb, ObjectWorldTransform, PointCloud};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Triangles with area below this are removed when a mesh is built.
pub const DEGENERATE_AREA: f64 = 1e-12;

/// Indexed triangle mesh with optional per-vertex colors.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangleMesh<T: Real> {
    vertices: Vec<Vector3<T>>,
    triangles: Vec<[usize; 3]>,
    colors: Option<Vec<[u8; 3]>>,
    dropped_degenerate: usize,
}

impl<T: Real> TriangleMesh<T> {
    /// Validates indices and drops degenerate triangles (logged, counted in
    /// [`Self::dropped_degenerate`]).
    pub fn new(vertices: Vec<Vector3<T>>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.iter().any(|p| !p.iter().all(|v| v.is_finite_value())) {
            return Err(Error::NonFinite("mesh vertices"));
        }
        let n = vertices.len();
        for tri in &triangles {
            for &i in tri {
                if i >= n {
                    return Err(Error::IndexOutOfRange { index: i, len: n });
                }
            }
        }
        let before = triangles.len();
        let min_area = T::lit(DEGENERATE_AREA);
        let triangles: Vec<_> = triangles
            .into_iter()
            .filter(|t| triangle_area(&vertices, t) >= min_area)
            .collect();
        let dropped = before - triangles.len();
        if dropped > 0 {
            log::warn!("dropped {dropped} degenerate triangles");
        }
        Ok(Self {
            vertices,
            triangles,
            colors: None,
            dropped_degenerate: dropped,
        })
    }

    pub fn with_colors(mut self, colors: Vec<[u8; 3]>) -> Result<Self> {
        if colors.len() != self.vertices.len() {
            return Err(Error::InvalidArgument("one color per vertex required".into()));
        }
        self.colors = Some(colors);
        Ok(self)
    }

    #[inline]
    pub fn vertices(&self) -> &[Vector3<T>] {
        &self.vertices
    }

    #[inline]
    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn colors(&self) -> Option<&[[u8; 3]]> {
        self.colors.as_deref()
    }

    pub fn dropped_degenerate(&self) -> usize {
        self.dropped_degenerate
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, i: usize) -> [Vector3<T>; 3] {
        let [a, b, c] = self.triangles[i];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self) -> T {
        self.triangles
            .iter()
            .fold(T::zero(), |acc, t| acc + triangle_area(&self.vertices, t))
    }

    pub fn bbox(&self) -> Result<Aabb<T>> {
        bbox_of_slice(&self.vertices)
    }

    /// Moves the bounding-box center to the origin and returns the applied offset
    /// (the old center).
    pub fn recenter(&mut self) -> Result<Vector3<T>> {
        let c = self.bbox()?.center();
        for v in &mut self.vertices {
            *v -= c;
        }
        Ok(c)
    }

    pub fn transformed(&self, t: &ObjectWorldTransform<T>) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| t.apply_point(v)).collect(),
            triangles: self.triangles.clone(),
            colors: self.colors.clone(),
            dropped_degenerate: self.dropped_degenerate,
        }
    }

    pub fn map_vertices(&self, f: impl Fn(&Vector3<T>) -> Vector3<T>) -> Self {
        Self {
            vertices: self.vertices.iter().map(f).collect(),
            ..self.clone()
        }
    }

    /// Appends another mesh, re-indexing its triangles.
    pub fn append(&mut self, other: &Self) {
        let offset = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles.extend(
            other
                .triangles
                .iter()
                .map(|t| [t[0] + offset, t[1] + offset, t[2] + offset]),
        );
        self.colors = match (self.colors.take(), &other.colors) {
            (Some(mut a), Some(b)) => {
                a.extend_from_slice(b);
                Some(a)
            }
            _ => None,
        };
    }
}

fn triangle_area<T: Real>(v: &[Vector3<T>], t: &[usize; 3]) -> T {
    let (a, b, c) = (v[t[0]], v[t[1]], v[t[2]]);
    (b - a).cross(&(c - a)).norm() * T::lit(0.5)
}

/// Surface samples with the index of the triangle each was drawn from.
#[derive(Clone, Debug)]
pub struct SurfaceSamples<T: Real> {
    pub cloud: PointCloud<T>,
    pub faces: Vec<usize>,
}

/// Draws `n` points uniformly with respect to surface area.
///
/// Triangles are chosen with probability proportional to their area and the point
/// inside each triangle uses the square-root barycentric warp. The sequence is
/// fully determined by `seed`.
pub fn sample_mesh_surface<T: Real>(
    m: &TriangleMesh<T>,
    n: usize,
    seed: u64,
) -> Result<PointCloud<T>> {
    Ok(sample_mesh_surface_with_faces(m, n, seed)?.cloud)
}

pub fn sample_mesh_surface_with_faces<T: Real>(
    m: &TriangleMesh<T>,
    n: usize,
    seed: u64,
) -> Result<SurfaceSamples<T>> {
    if m.is_empty() {
        return Err(Error::EmptyInput("mesh has no triangles"));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let mut cumulative = Vec::with_capacity(m.triangles.len());
    let mut total = 0.0f64;
    for t in &m.triangles {
        total += triangle_area(&m.vertices, t).to_f64_lossy();
        cumulative.push(total);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut faces = Vec::with_capacity(n);
    for _ in 0..n {
        let target = rng.gen::<f64>() * total;
        let face = cumulative
            .partition_point(|&c| c <= target)
            .min(cumulative.len() - 1);
        let r1 = rng.gen::<f64>().sqrt();
        let r2 = rng.gen::<f64>();
        let (wa, wb, wc) = (T::lit(1.0 - r1), T::lit(r1 * (1.0 - r2)), T::lit(r1 * r2));
        let [a, b, c] = m.triangle(face);
        points.push(a * wa + b * wb + c * wc);
        faces.push(face);
    }
    Ok(SurfaceSamples {
        cloud: PointCloud::from_points_unchecked(points),
        faces,
    })
}
