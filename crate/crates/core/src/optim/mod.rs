//! Offline pose fitting: Chamfer-driven descent against full meshes or
//! partial RGBD observations, and an ICP baseline.

mod descent;
mod gradient;
mod icp;
mod mesh;
mod params;
mod rgbd;

pub use gradient::{chamfer_gradient, frozen_loss, Correspondences};
pub use icp::{icp_align, kabsch};
pub use mesh::{initial_guesses, opt_align_mesh, opt_align_mesh_multistart};
pub use params::{
    AlignMethod, AlignStatus, AlignmentRecord, LossBreakdown, OptimizerConfig, ParamVector,
    PoseParams,
};
pub use rgbd::opt_align_rgbd;
