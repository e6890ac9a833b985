//! `forge`: batch generation, detection cleanup, background previews,
//! evaluation and output validation.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use forge_core::augment::BgPool;
use forge_core::manifest::{self, PROVENANCE_FILE};
use forge_core::metrics;
use forge_core::pipeline::{self, GenerationConfig, Generator};
use forge_core::raster;

const CONFIG_ENV: &str = "PLACID_FORGE_CONFIG";

#[derive(Parser, Debug)]
#[command(name = "forge", version, about = "Synthetic compositing video generator and metrics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build every `*.spec.json` in a manifest directory.
    Gen {
        #[arg(long)]
        manifests: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = CONFIG_ENV)]
        config: Option<PathBuf>,
        /// Overrides `global_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `workers`.
        #[arg(long)]
        workers: Option<usize>,
        /// Replace existing sample directories.
        #[arg(long)]
        overwrite: bool,
    },
    /// Clean grounded detections and extract cutouts plus the inpaint mask.
    Clean {
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = CONFIG_ENV)]
        config: Option<PathBuf>,
    },
    /// Render one background from a pool.
    Bg {
        #[arg(long, value_enum)]
        kind: BgKind,
        /// Canvas size as WxH.
        #[arg(long, value_parser = parse_size)]
        size: (u32, u32),
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        photo_dir: Option<PathBuf>,
    },
    /// Evaluation metrics.
    Metrics {
        #[command(subcommand)]
        action: MetricsAction,
    },
    /// Check generated samples against the output invariants.
    Validate {
        /// A sample directory or a directory of samples.
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum MetricsAction {
    /// Crop found objects and write a work order for external encoders.
    Prepare {
        #[arg(long)]
        cases: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score cases; writes a JSON report and prints a table.
    Score {
        #[arg(long)]
        cases: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BgKind {
    Plain,
    Procedural,
    Photo,
}

fn parse_size(s: &str) -> std::result::Result<(u32, u32), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got `{s}`"))?;
    let w: u32 = w.parse().map_err(|_| format!("bad width in `{s}`"))?;
    let h: u32 = h.parse().map_err(|_| format!("bad height in `{s}`"))?;
    if w == 0 || h == 0 {
        return Err(format!("size must be positive, got `{s}`"));
    }
    Ok((w, h))
}

/// Errors that map to exit code 2.
#[derive(Debug)]
struct ConfigError(anyhow::Error);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_error(e: impl Into<anyhow::Error>) -> anyhow::Error {
    anyhow!(ConfigError(e.into()))
}

fn load_config(path: Option<&Path>) -> Result<GenerationConfig> {
    match path {
        Some(p) => pipeline::load_config(p)
            .with_context(|| format!("loading config {}", p.display()))
            .map_err(config_error),
        None => Ok(GenerationConfig::default()),
    }
}

enum Outcome {
    Ok,
    Partial,
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Gen {
            manifests,
            out,
            config,
            seed,
            workers,
            overwrite,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(s) = seed {
                cfg.global_seed = s;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            cfg.overwrite |= overwrite;
            let gen = Generator::new(cfg).map_err(config_error)?;
            let summary = pipeline::run_batch(&manifests, &out, &gen)
                .with_context(|| format!("reading manifests from {}", manifests.display()))?;
            println!(
                "built {} failed {} in {:.2}s",
                summary.built,
                summary.failed,
                summary.elapsed.as_secs_f64()
            );
            for f in &summary.failures {
                eprintln!("FAILED {}: {}", f.spec, f.reason);
            }
            Ok(if summary.failed > 0 { Outcome::Partial } else { Outcome::Ok })
        }
        Command::Clean {
            detections,
            image,
            out,
            config,
        } => {
            let cfg = load_config(config.as_deref())?;
            let report = pipeline::run_clean(&detections, &image, &out, &cfg.clean, cfg.inpaint_dilation_px)?;
            println!(
                "kept {} objects, rejected {}",
                report.objects.len(),
                report.rejected.len()
            );
            for r in &report.rejected {
                println!("rejected {:?}: {}", r.indices, r.reason);
            }
            Ok(Outcome::Ok)
        }
        Command::Bg {
            kind,
            size,
            seed,
            out,
            photo_dir,
        } => {
            let pool = match kind {
                BgKind::Plain => BgPool::PlainColor,
                BgKind::Procedural => BgPool::Procedural,
                BgKind::Photo => BgPool::Photo,
            };
            if matches!(kind, BgKind::Photo) && photo_dir.is_none() {
                return Err(config_error(anyhow!("--kind photo needs --photo-dir")));
            }
            let img = pipeline::make_background(pool, size, seed, photo_dir.as_deref())?;
            raster::save_rgb(&img, &out)?;
            Ok(Outcome::Ok)
        }
        Command::Metrics { action } => match action {
            MetricsAction::Prepare { cases, out } => {
                let set = metrics::load_eval_set(&cases).map_err(config_error)?;
                let order = metrics::prepare_crops(&set, &out)?;
                println!("{} crop pairs, {} images -> {}", order.pairs.len(), order.images.len(), out.display());
                Ok(Outcome::Ok)
            }
            MetricsAction::Score { cases, out } => {
                let set = metrics::load_eval_set(&cases).map_err(config_error)?;
                let report = metrics::score_eval_set(&set)?;
                std::fs::write(&out, manifest::to_pretty_json(&report))
                    .with_context(|| format!("writing {}", out.display()))?;
                let table = metrics::format_table(&report);
                std::fs::write(out.with_extension("txt"), &table)
                    .with_context(|| format!("writing table next to {}", out.display()))?;
                print!("{table}");
                Ok(Outcome::Ok)
            }
        },
        Command::Validate { dir } => {
            let dirs = if dir.join(PROVENANCE_FILE).is_file() {
                vec![dir]
            } else {
                let mut v: Vec<PathBuf> = std::fs::read_dir(&dir)
                    .with_context(|| format!("reading {}", dir.display()))?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.join(PROVENANCE_FILE).is_file())
                    .collect();
                v.sort();
                if v.is_empty() {
                    bail!("no generated samples under {}", dir.display());
                }
                v
            };
            let mut bad = 0;
            for d in &dirs {
                let violations = manifest::validate_output_dir(d)?;
                if violations.is_empty() {
                    println!("ok {}", d.display());
                } else {
                    bad += 1;
                    for v in violations {
                        println!("INVALID {}: {v}", d.display());
                    }
                }
            }
            Ok(if bad > 0 { Outcome::Partial } else { Outcome::Ok })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
