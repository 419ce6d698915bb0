//! Losses, evaluation metrics and the nearest-neighbor index behind them.

mod chamfer;
mod eval;
mod kdtree;
mod losses;

pub use chamfer::{
    chamfer_bidirectional, chamfer_bidirectional_with, chamfer_single, chamfer_single_with,
    nearest_matches,
};
pub use eval::{
    bbox_iou, fscore, scene_metrics, EvalObject, MetricReport, ObjectMetrics, StageTiming,
    CSV_COLUMNS, DEFAULT_FSCORE_THRESHOLD,
};
pub use kdtree::{NearestNeighborIndex, SearchMode};
pub use losses::{mask_loss, pgd_loss, pgd_loss_raw, total_loss, LossWeights, PoseComponents};
