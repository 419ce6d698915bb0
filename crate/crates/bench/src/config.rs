use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use panoalign::metrics::DEFAULT_FSCORE_THRESHOLD;
use panoalign::optim::OptimizerConfig;
use panoalign::pipeline::{default_local_refiner, C2fConfig, LocalRefiner};
use serde::{Deserialize, Serialize};

use crate::synth::{scene_dir_name, SyntheticSceneSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// RGBD optimizer (depth Chamfer plus mask) from the perturbed init.
    Opt,
    /// Normalized ICP from the perturbed init.
    Icp,
    /// RGBD optimizer followed by coarse-to-fine refinement.
    C2f,
    /// Predicted extrinsics and scales read from JSON-lines files.
    FileSource,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Opt => "opt",
            Method::Icp => "icp",
            Method::C2f => "c2f",
            Method::FileSource => "file-source",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefinerSettings {
    pub max_rotation_deg: f64,
    pub max_translation_fraction: f64,
    pub iterations: usize,
}

impl Default for RefinerSettings {
    fn default() -> Self {
        let r = default_local_refiner();
        Self {
            max_rotation_deg: r.max_rotation_deg,
            max_translation_fraction: r.max_translation_fraction,
            iterations: r.cfg.max_iterations,
        }
    }
}

impl RefinerSettings {
    pub fn refiner(&self, base: &OptimizerConfig, seed: u64) -> LocalRefiner {
        LocalRefiner {
            cfg: OptimizerConfig {
                optimize_scale: false,
                max_iterations: self.iterations,
                seed,
                ..base.clone()
            },
            max_rotation_deg: self.max_rotation_deg,
            max_translation_fraction: self.max_translation_fraction,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSettings {
    /// Surface samples per object for the metrics.
    pub samples: usize,
    pub fscore_threshold: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self { samples: 2048, fscore_threshold: DEFAULT_FSCORE_THRESHOLD }
    }
}

/// Extra checks evaluated in bench mode; each failing one makes the exit code
/// nonzero. Report consistency is always checked.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckSettings {
    /// The predictions are ground truth: CD-S < 1e-6, F-Score-S and IoU-B > 0.999.
    pub oracle: bool,
    /// Also run this method and compare per-object CD.
    pub baseline: Option<Method>,
    /// Fraction of paired objects on which the main method must not be worse.
    pub baseline_win_rate: f64,
    /// Run everything twice and require byte-identical reports.
    pub determinism: bool,
}

impl Default for CheckSettings {
    fn default() -> Self {
        Self { oracle: false, baseline: None, baseline_win_rate: 0.8, determinism: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub method: Method,
    /// Refine after alignment; always on for `c2f`.
    pub refine: bool,
    pub scenes: usize,
    pub scene: SyntheticSceneSpec,
    pub optimizer: OptimizerConfig,
    pub c2f: C2fConfig,
    pub refiner: RefinerSettings,
    pub eval: EvalSettings,
    pub checks: CheckSettings,
    /// Directory of predictions for `file-source`: `scene_XXX.jsonl` or
    /// `scene_XXX/gt_predictions.jsonl` per scene.
    pub predictions: Option<PathBuf>,
    pub out: PathBuf,
    /// Export fused scenes as PLY plus manifest under `out/fused`.
    pub export: bool,
    /// Worker threads; 0 uses every core.
    pub jobs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            method: Method::Opt,
            refine: false,
            scenes: 5,
            scene: SyntheticSceneSpec::default(),
            optimizer: OptimizerConfig::default(),
            c2f: C2fConfig::default(),
            refiner: RefinerSettings::default(),
            eval: EvalSettings::default(),
            checks: CheckSettings::default(),
            predictions: None,
            out: PathBuf::from("out"),
            export: false,
            jobs: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn refines(&self) -> bool {
        self.refine || self.method == Method::C2f
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.scene.validate()?;
        self.optimizer.validate()?;
        if self.refines() {
            self.c2f.validate()?;
        }
        if self.eval.samples == 0 || !(self.eval.fscore_threshold > 0.0) {
            bail!("evaluation needs samples and a positive F-Score threshold");
        }
        if !(0.0..=1.0).contains(&self.checks.baseline_win_rate) {
            bail!("baseline win rate must be in [0, 1]");
        }
        if self.method == Method::FileSource || self.checks.baseline == Some(Method::FileSource) {
            let dir = self.predictions.as_ref().context("file-source needs a predictions directory")?;
            for i in 0..self.scenes {
                prediction_file(dir, i)?;
            }
        }
        Ok(())
    }
}

/// Predictions file of scene `index` under `dir`.
pub fn prediction_file(dir: &Path, index: usize) -> anyhow::Result<PathBuf> {
    let name = scene_dir_name(index);
    let flat = dir.join(format!("{name}.jsonl"));
    if flat.is_file() {
        return Ok(flat);
    }
    let nested = dir.join(&name).join("gt_predictions.jsonl");
    if nested.is_file() {
        return Ok(nested);
    }
    bail!("no predictions for {name} under {}", dir.display())
}
