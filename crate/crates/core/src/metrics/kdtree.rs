use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Exact nearest-neighbor queries over a fixed point set.
///
/// Ties on distance resolve to the lowest point index, in both the kd-tree
/// and the brute-force mode, so the two modes return identical answers.
#[derive(Clone, Debug)]
pub struct NearestNeighborIndex<T: Real> {
    points: Vec<Vector3<T>>,
    // Implicit balanced tree: order[lo..hi] is a subtree whose median element
    // is the splitting point, split axis stored per median position.
    order: Vec<usize>,
    axis: Vec<u8>,
    mode: SearchMode,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SearchMode {
    #[default]
    KdTree,
    BruteForce,
}

const LEAF: usize = 8;

impl<T: Real> NearestNeighborIndex<T> {
    pub fn build(points: &[Vector3<T>]) -> Result<Self> {
        Self::with_mode(points, SearchMode::KdTree)
    }

    pub fn brute_force(points: &[Vector3<T>]) -> Result<Self> {
        Self::with_mode(points, SearchMode::BruteForce)
    }

    pub fn with_mode(points: &[Vector3<T>], mode: SearchMode) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput("nearest-neighbor index over no points"));
        }
        let mut order: Vec<usize> = (0..points.len()).collect();
        let mut axis = vec![0u8; points.len()];
        if mode == SearchMode::KdTree {
            split(points, &mut order, &mut axis, 0);
        }
        Ok(Self { points: points.to_vec(), order, axis, mode })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vector3<T>] {
        &self.points
    }

    pub fn mode(&self) -> SearchMode {
        self.mode
    }

    /// Index of the nearest point and its squared distance.
    pub fn nearest(&self, q: &Vector3<T>) -> (usize, T) {
        match self.mode {
            SearchMode::BruteForce => {
                let mut best = (usize::MAX, T::lit(f64::INFINITY));
                for (i, p) in self.points.iter().enumerate() {
                    let d = (p - q).norm_squared();
                    if d < best.1 {
                        best = (i, d);
                    }
                }
                best
            }
            SearchMode::KdTree => {
                let mut best = (usize::MAX, T::lit(f64::INFINITY));
                self.search(q, 0, self.order.len(), &mut best);
                best
            }
        }
    }

    fn search(&self, q: &Vector3<T>, lo: usize, hi: usize, best: &mut (usize, T)) {
        if hi - lo <= LEAF {
            for &i in &self.order[lo..hi] {
                consider(best, i, (self.points[i] - q).norm_squared());
            }
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let pivot = self.order[mid];
        let ax = self.axis[mid] as usize;
        let diff = q[ax] - self.points[pivot][ax];
        let (near, far) = if diff < T::zero() { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.search(q, near.0, near.1, best);
        consider(best, pivot, (self.points[pivot] - q).norm_squared());
        // Equal-distance candidates on the far side may carry a lower index.
        if diff * diff <= best.1 {
            self.search(q, far.0, far.1, best);
        }
    }
}

#[inline]
fn consider<T: Real>(best: &mut (usize, T), i: usize, d: T) {
    if d < best.1 || (d == best.1 && i < best.0) {
        *best = (i, d);
    }
}

fn split<T: Real>(points: &[Vector3<T>], order: &mut [usize], axis: &mut [u8], _depth: usize) {
    if order.len() <= LEAF {
        return;
    }
    // Split along the widest extent.
    let mut lo = points[order[0]];
    let mut hi = lo;
    for &i in order.iter() {
        let p = points[i];
        for k in 0..3 {
            lo[k] = crate::scalar::min(lo[k], p[k]);
            hi[k] = crate::scalar::max(hi[k], p[k]);
        }
    }
    let ext = hi - lo;
    let ax = if ext.x >= ext.y && ext.x >= ext.z { 0 } else if ext.y >= ext.z { 1 } else { 2 };
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        points[a][ax].partial_cmp(&points[b][ax]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b))
    });
    axis[mid] = ax as u8;
    let (left, rest) = order.split_at_mut(mid);
    let (laxis, raxis) = axis.split_at_mut(mid);
    split(points, left, laxis, _depth + 1);
    split(points, &mut rest[1..], &mut raxis[1..], _depth + 1);
}
