//! Geometry, losses, pose optimizers and coarse-to-fine refinement for placing
//! generated 3D objects into the world frame of an equirectangular panorama.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`, which is what the CLI uses.

pub mod error;
pub mod geometry;
pub mod io;
pub mod metrics;
pub mod optim;
pub mod panorama;
pub mod pipeline;
pub mod raster;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Rotation64 = geometry::Rotation<f64>;
pub type RigidExtrinsic64 = geometry::RigidExtrinsic<f64>;
pub type AnisotropicScale64 = geometry::AnisotropicScale<f64>;
pub type ObjectWorldTransform64 = geometry::ObjectWorldTransform<f64>;
pub type CameraIntrinsics64 = geometry::CameraIntrinsics<f64>;
pub type PinholeCamera64 = geometry::PinholeCamera<f64>;
pub type PointCloud64 = geometry::PointCloud<f64>;
pub type TriangleMesh64 = geometry::TriangleMesh<f64>;
pub type GaussianSet64 = geometry::GaussianSet<f64>;
pub type Aabb64 = geometry::Aabb<f64>;
