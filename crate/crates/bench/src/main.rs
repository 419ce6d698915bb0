use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use panoalign::io::write_jsonl;
use panoalign_bench::config::{Method, RunConfig};
use panoalign_bench::output::{write_all, write_predictions};
use panoalign_bench::run::{generate_scenes, run, run_benchmark};
use panoalign_bench::synth::write_scene;

#[derive(Parser)]
#[command(name = "panoalign", version, about = "Synthetic panorama alignment benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic scenes (depth panorama, masks, meshes, ground truth).
    Generate(Common),
    /// Align every object and write predictions plus alignment records.
    Align(Common),
    /// Coarse-to-fine refine the predictions given by `predictions` in the config.
    Refine(Common),
    /// Score the predictions given by `predictions` in the config.
    Evaluate(Common),
    /// Full run with checks; exits nonzero when a check fails.
    Bench(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    /// Scene seed; every random draw of the run derives from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, 0 for all cores.
    #[arg(long)]
    jobs: Option<usize>,
}

impl Common {
    fn config(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(m) = self.method {
            cfg.method = m;
        }
        if let Some(s) = self.seed {
            cfg.scene.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(j) = self.jobs {
            cfg.jobs = j;
        }
        Ok(cfg)
    }
}

fn generate(cfg: &RunConfig) -> anyhow::Result<()> {
    cfg.scene.validate()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build()?;
    let scenes = pool.install(|| generate_scenes(cfg));
    for (scene, err, _) in &scenes {
        write_scene(scene, &cfg.out)?;
        if let Some(e) = err {
            log::warn!("scene {}: {e}", scene.index);
        }
    }
    println!("wrote {} scenes to {}", scenes.len(), cfg.out.display());
    Ok(())
}

fn summarize(out: &panoalign_bench::BenchOutput) {
    let r = &out.report;
    if let Some(m) = &r.mean {
        println!(
            "{} over {} scenes: CD-S {:.6} CD-O {:.6} F-Score-S {:.4} F-Score-O {:.4} IoU-B {:.4}",
            r.method.name(),
            m.scenes,
            m.cd_s,
            m.cd_o,
            m.fscore_s,
            m.fscore_o,
            m.iou_b
        );
    }
    if !r.quarantined.is_empty() {
        println!("{} quarantined", r.quarantined.len());
    }
    for t in &out.timings {
        println!("{:<32} {:>10.4} s  (n = {})", t.stage, t.seconds, t.count);
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Generate(c) => generate(&c.config()?)?,
        Command::Align(c) => {
            let mut cfg = c.config()?;
            cfg.refine = false;
            if cfg.method == Method::C2f {
                cfg.method = Method::Opt;
            }
            let out = run(&cfg)?;
            write_predictions(&cfg.out.join("predictions"), &out)?;
            let records: Vec<_> = out.report.objects.iter().filter_map(|o| o.alignment.clone()).collect();
            write_jsonl(&cfg.out.join("alignments.jsonl"), &records)?;
            write_all(&cfg.out, &out)?;
            summarize(&out);
        }
        Command::Refine(c) => {
            let mut cfg = c.config()?;
            cfg.method = Method::FileSource;
            cfg.refine = true;
            let out = run(&cfg)?;
            write_predictions(&cfg.out.join("refined"), &out)?;
            let traces: Vec<_> = out.report.objects.iter().filter_map(|o| o.refinement.clone()).collect();
            write_jsonl(&cfg.out.join("traces.jsonl"), &traces)?;
            write_all(&cfg.out, &out)?;
            summarize(&out);
        }
        Command::Evaluate(c) => {
            let mut cfg = c.config()?;
            cfg.method = Method::FileSource;
            cfg.refine = false;
            let out = run(&cfg)?;
            write_all(&cfg.out, &out)?;
            summarize(&out);
        }
        Command::Bench(c) => {
            let cfg = c.config()?;
            let out = run_benchmark(&cfg).context("benchmark run")?;
            write_all(&cfg.out, &out)?;
            summarize(&out);
            for ch in &out.report.checks {
                println!("{} {}: {}", if ch.passed { "PASS" } else { "FAIL" }, ch.name, ch.detail);
            }
            if !out.report.passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
