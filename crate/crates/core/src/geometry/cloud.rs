use nalgebra::Vector3;

use super::ObjectWorldTransform;
use crate::error::{Error, Result};
use crate::scalar::{self, Real};

/// Ordered set of 3D points with optional per-point RGB colors.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud<T: Real> {
    points: Vec<Vector3<T>>,
    colors: Option<Vec<[u8; 3]>>,
}

impl<T: Real> PointCloud<T> {
    pub fn new(points: Vec<Vector3<T>>) -> Result<Self> {
        if points.iter().any(|p| !p.iter().all(|v| v.is_finite_value())) {
            return Err(Error::NonFinite("point cloud"));
        }
        Ok(Self {
            points,
            colors: None,
        })
    }

    pub fn with_colors(points: Vec<Vector3<T>>, colors: Vec<[u8; 3]>) -> Result<Self> {
        if colors.len() != points.len() {
            return Err(Error::InvalidArgument(format!(
                "{} colors for {} points",
                colors.len(),
                points.len()
            )));
        }
        let mut cloud = Self::new(points)?;
        cloud.colors = Some(colors);
        Ok(cloud)
    }

    /// Skips the finiteness scan; callers guarantee finite input.
    pub(crate) fn from_points_unchecked(points: Vec<Vector3<T>>) -> Self {
        Self {
            points,
            colors: None,
        }
    }

    #[inline]
    pub fn points(&self) -> &[Vector3<T>] {
        &self.points
    }

    pub fn colors(&self) -> Option<&[[u8; 3]]> {
        self.colors.as_deref()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Vector3<T>> {
        self.points
    }

    pub fn centroid(&self) -> Option<Vector3<T>> {
        if self.points.is_empty() {
            return None;
        }
        let sum = self
            .points
            .iter()
            .fold(Vector3::zeros(), |acc: Vector3<T>, p| acc + p);
        Some(sum / T::from_usize_lossy(self.points.len()))
    }

    /// Concatenation preserving order; colors kept only if every part has them.
    pub fn concat<'a>(parts: impl IntoIterator<Item = &'a PointCloud<T>>) -> Self {
        let mut points = Vec::new();
        let mut colors = Some(Vec::new());
        for part in parts {
            points.extend_from_slice(&part.points);
            match (&mut colors, &part.colors) {
                (Some(acc), Some(c)) => acc.extend_from_slice(c),
                _ => colors = None,
            }
        }
        Self { points, colors }
    }

    pub fn map_points(&self, f: impl Fn(&Vector3<T>) -> Vector3<T>) -> Self {
        Self {
            points: self.points.iter().map(f).collect(),
            colors: self.colors.clone(),
        }
    }
}

/// Axis-aligned box given by its min and max corners.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb<T: Real> {
    pub min: Vector3<T>,
    pub max: Vector3<T>,
}

impl<T: Real> Aabb<T> {
    pub fn new(min: Vector3<T>, max: Vector3<T>) -> Result<Self> {
        if (0..3).any(|i| min[i] > max[i]) {
            return Err(Error::InvalidArgument("box min exceeds max".into()));
        }
        Ok(Self { min, max })
    }

    pub fn center(&self) -> Vector3<T> {
        (self.min + self.max) * T::lit(0.5)
    }

    pub fn extents(&self) -> Vector3<T> {
        self.max - self.min
    }

    pub fn diagonal(&self) -> T {
        self.extents().norm()
    }

    pub fn volume(&self) -> T {
        let e = self.extents();
        e.x * e.y * e.z
    }

    pub fn contains(&self, p: &Vector3<T>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn corners(&self) -> [Vector3<T>; 8] {
        let (a, b) = (self.min, self.max);
        [
            Vector3::new(a.x, a.y, a.z),
            Vector3::new(b.x, a.y, a.z),
            Vector3::new(a.x, b.y, a.z),
            Vector3::new(b.x, b.y, a.z),
            Vector3::new(a.x, a.y, b.z),
            Vector3::new(b.x, a.y, b.z),
            Vector3::new(a.x, b.y, b.z),
            Vector3::new(b.x, b.y, b.z),
        ]
    }

    pub fn overlaps(&self, other: &Self) -> bool {
        (0..3).all(|i| self.min[i] <= other.max[i] && other.min[i] <= self.max[i])
    }

    pub fn is_degenerate(&self) -> bool {
        (0..3).any(|i| self.max[i] <= self.min[i])
    }

    pub fn expanded(&self, margin: T) -> Self {
        let m = Vector3::repeat(margin);
        Self {
            min: self.min - m,
            max: self.max + m,
        }
    }
}

/// Tight axis-aligned bounds of a point set.
pub fn bbox_of_points<T: Real>(pts: &PointCloud<T>) -> Result<Aabb<T>> {
    bbox_of_slice(pts.points())
}

pub fn bbox_of_slice<T: Real>(pts: &[Vector3<T>]) -> Result<Aabb<T>> {
    let first = pts.first().ok_or(Error::EmptyInput("bounding box of empty point set"))?;
    let (mut min, mut max) = (*first, *first);
    for p in &pts[1..] {
        for i in 0..3 {
            min[i] = scalar::min(min[i], p[i]);
            max[i] = scalar::max(max[i], p[i]);
        }
    }
    Ok(Aabb { min, max })
}

/// Applies `T` to every point (homogeneous multiply, de-homogenized), keeping order.
pub fn apply_transform_points<T: Real>(
    t: &ObjectWorldTransform<T>,
    pts: &PointCloud<T>,
) -> PointCloud<T> {
    pts.map_points(|p| t.apply_point(p))
}
