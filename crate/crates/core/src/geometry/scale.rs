use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Per-axis positive scale factors `diag(s_x, s_y, s_z)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnisotropicScale<T: Real> {
    factors: Vector3<T>,
}

impl<T: Real> AnisotropicScale<T> {
    pub fn new(sx: T, sy: T, sz: T) -> Result<Self> {
        Self::from_vector(Vector3::new(sx, sy, sz))
    }

    pub fn from_vector(v: Vector3<T>) -> Result<Self> {
        for s in v.iter() {
            if !s.is_finite_value() || *s <= T::zero() {
                return Err(Error::NonPositiveScale(s.to_f64_lossy()));
            }
        }
        Ok(Self { factors: v })
    }

    pub fn uniform(s: T) -> Result<Self> {
        Self::new(s, s, s)
    }

    pub fn identity() -> Self {
        Self {
            factors: Vector3::repeat(T::one()),
        }
    }

    pub fn from_log(log: &Vector3<T>) -> Self {
        Self {
            factors: log.map(|v| v.exp()),
        }
    }

    #[inline]
    pub fn factors(&self) -> &Vector3<T> {
        &self.factors
    }

    pub fn log(&self) -> Vector3<T> {
        self.factors.map(|v| v.ln())
    }

    pub fn to_matrix(&self) -> Matrix3<T> {
        Matrix3::from_diagonal(&self.factors)
    }

    #[inline]
    pub fn apply(&self, p: &Vector3<T>) -> Vector3<T> {
        p.component_mul(&self.factors)
    }

    pub fn inverse(&self) -> Self {
        Self {
            factors: self.factors.map(|v| T::one() / v),
        }
    }

    pub fn is_uniform(&self, tol: T) -> bool {
        let f = &self.factors;
        (f.x - f.y).abs() <= tol && (f.y - f.z).abs() <= tol
    }
}

impl<T: Real> Default for AnisotropicScale<T> {
    fn default() -> Self {
        Self::identity()
    }
}
