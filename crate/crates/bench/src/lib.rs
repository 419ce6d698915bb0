//! Synthetic-scene benchmark for panoalign: scene generation, per-object
//! alignment and refinement, fusion, evaluation and reporting.

pub mod checks;
pub mod config;
pub mod output;
pub mod run;
pub mod synth;

pub use config::{Method, RunConfig};
pub use run::{run, run_benchmark, BenchOutput, BenchReport};
pub use synth::{generate_scene, SyntheticScene, SyntheticSceneSpec};
