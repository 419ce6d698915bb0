use nalgebra::Vector3;
use rayon::prelude::*;

use super::kdtree::{NearestNeighborIndex, SearchMode};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Nearest candidate index and squared distance for every query point,
/// in query order.
pub fn nearest_matches<T: Real>(
    queries: &[Vector3<T>],
    index: &NearestNeighborIndex<T>,
) -> Vec<(usize, T)> {
    queries.par_iter().map(|q| index.nearest(q)).collect()
}

fn mean_sq<T: Real>(queries: &[Vector3<T>], onto: &[Vector3<T>], mode: SearchMode) -> Result<T> {
    if queries.is_empty() || onto.is_empty() {
        return Err(Error::EmptyInput("chamfer distance of an empty cloud"));
    }
    let index = NearestNeighborIndex::with_mode(onto, mode)?;
    // Collect in order, then sum sequentially: identical result for any thread count.
    let d = nearest_matches(queries, &index);
    let sum = d.iter().fold(T::zero(), |acc, (_, x)| acc + *x);
    Ok(sum / T::from_usize_lossy(queries.len()))
}

/// Mean over `target` of the squared distance to the nearest `candidate` point.
pub fn chamfer_single<T: Real>(target: &[Vector3<T>], candidate: &[Vector3<T>]) -> Result<T> {
    mean_sq(target, candidate, SearchMode::KdTree)
}

pub fn chamfer_bidirectional<T: Real>(a: &[Vector3<T>], b: &[Vector3<T>]) -> Result<T> {
    Ok(chamfer_single(a, b)? + chamfer_single(b, a)?)
}

pub fn chamfer_single_with<T: Real>(
    target: &[Vector3<T>],
    candidate: &[Vector3<T>],
    mode: SearchMode,
) -> Result<T> {
    mean_sq(target, candidate, mode)
}

pub fn chamfer_bidirectional_with<T: Real>(
    a: &[Vector3<T>],
    b: &[Vector3<T>],
    mode: SearchMode,
) -> Result<T> {
    Ok(mean_sq(a, b, mode)? + mean_sq(b, a, mode)?)
}
