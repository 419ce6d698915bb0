//! Deterministic silhouette/depth rendering: pinhole rasterization, the object
//! view rig, and equirectangular ray casting.

mod rasterizer;
mod raycast;
mod rig;

pub use rasterizer::{
    rasterize_silhouette, rasterize_triangles, render_depth_pointcloud, RenderTarget, NEAR_PLANE,
};
pub use raycast::{render_panorama, PanoramaRender};
pub use rig::{default_view_rig, view_rig, RigConfig, ViewRig};
