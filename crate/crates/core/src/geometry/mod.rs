//! Rotations, rigid extrinsics, anisotropic scale, object-to-world transforms
//! and the three object representations (point clouds, meshes, Gaussians).

mod camera;
mod cloud;
pub(crate) mod extrinsic;
mod gaussian;
mod mesh;
pub mod primitives;
mod rotation;
mod scale;
mod transform;

pub use camera::{CameraIntrinsics, PinholeCamera};
pub use cloud::{apply_transform_points, bbox_of_points, bbox_of_slice, Aabb, PointCloud};
pub use extrinsic::{relative_pose, RigidExtrinsic};
pub use gaussian::{apply_transform_gaussians, Gaussian, GaussianSet, PSD_TOLERANCE};
pub use mesh::{
    sample_mesh_surface, sample_mesh_surface_with_faces, SurfaceSamples, TriangleMesh,
    DEGENERATE_AREA,
};
pub use rotation::Rotation;
pub(crate) use rotation::quaternion_matrix;
pub use scale::AnisotropicScale;
pub use transform::{compose_object_world, ObjectWorldTransform};
