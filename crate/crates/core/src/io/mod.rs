//! File formats: OBJ and binary PLY for geometry, PNG and PFM for rasters,
//! JSON and JSON-lines for specs, transforms and alignment records.

mod json;
mod obj;
mod ply;
mod raster;

pub use json::{read_json, read_jsonl, write_json, write_jsonl, TransformRecord};
pub use obj::{load_object_mesh, read_obj, write_obj, LoadedObject};
pub use ply::{
    read_cloud_ply, read_gaussians_ply, read_mesh_ply, write_cloud_ply, write_gaussians_ply,
    write_mesh_ply,
};
pub use raster::{read_mask_png, read_pfm, read_png, write_mask_png, write_pfm, write_png};
