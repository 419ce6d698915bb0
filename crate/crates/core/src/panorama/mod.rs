//! Equirectangular panorama model, perspective crops and depth back-projection.

mod backproject;
mod crop;
mod image;
pub mod projection;

pub use backproject::{backproject_pano_depth, backproject_perspective_depth, Backprojection};
pub use crop::{
    crop_spec_for_mask, extract_perspective_crop, CropSpec, PerspectiveCrop,
    DEFAULT_CROP_RESOLUTION,
};
pub use image::{Image, InstanceMask, PanoramaImage};
pub use projection::{
    angles_from_direction, direction_from_angles, direction_to_pixel, pixel_to_direction,
};

pub const DEFAULT_PANORAMA_HEIGHT: usize = 512;
pub const DEFAULT_PANORAMA_WIDTH: usize = 1024;
