use nalgebra::{Matrix3, Vector3};

use super::ObjectWorldTransform;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Smallest eigenvalue tolerated for a covariance to count as PSD.
pub const PSD_TOLERANCE: f64 = 1e-9;

/// One anisotropic Gaussian primitive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gaussian<T: Real> {
    pub center: Vector3<T>,
    pub covariance: Matrix3<T>,
    pub color: [f32; 3],
    pub opacity: f32,
}

/// Collection of Gaussian primitives with symmetric PSD covariances.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GaussianSet<T: Real> {
    elements: Vec<Gaussian<T>>,
}

impl<T: Real> GaussianSet<T> {
    pub fn new(elements: Vec<Gaussian<T>>) -> Result<Self> {
        for g in &elements {
            check_covariance(&g.covariance)?;
            if !g.center.iter().all(|v| v.is_finite_value()) {
                return Err(Error::NonFinite("gaussian center"));
            }
        }
        Ok(Self { elements })
    }

    pub fn elements(&self) -> &[Gaussian<T>] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn centers(&self) -> Vec<Vector3<T>> {
        self.elements.iter().map(|g| g.center).collect()
    }
}

fn check_covariance<T: Real>(c: &Matrix3<T>) -> Result<()> {
    let asym = (c - c.transpose()).abs().max();
    let scale = c.abs().max().max(T::one());
    if asym > T::lit(1e-12) * scale {
        return Err(Error::InvalidArgument("covariance not symmetric".into()));
    }
    let min_eig = c.symmetric_eigenvalues().min();
    if min_eig < -T::lit(PSD_TOLERANCE) {
        return Err(Error::InvalidArgument(format!(
            "covariance not positive semi-definite (min eigenvalue {})",
            min_eig.to_f64_lossy()
        )));
    }
    Ok(())
}

/// Moves centers through `T` and maps every covariance to `A Σ Aᵀ`, with `A`
/// the linear block of `T`. The output is explicitly re-symmetrized.
pub fn apply_transform_gaussians<T: Real>(
    t: &ObjectWorldTransform<T>,
    g: &GaussianSet<T>,
) -> GaussianSet<T> {
    let a = t.linear();
    let at = a.transpose();
    let half = T::lit(0.5);
    GaussianSet {
        elements: g
            .elements
            .iter()
            .map(|e| {
                let c = a * e.covariance * at;
                Gaussian {
                    center: t.apply_point(&e.center),
                    covariance: (c + c.transpose()) * half,
                    ..*e
                }
            })
            .collect(),
    }
}
