use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use aysense::commands;
use aysense::config::PipelineConfig;
use aysense::pipeline::ActivityDatasetSpec;
use aysense::scenesim::Activity;
use clap::{Args, Parser, Subcommand};

/// Human sensing from 60 GHz beam-training channel estimates.
#[derive(Debug, Parser)]
#[command(name = "aysense", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Pipeline configuration (TOML); built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root seed; overrides the training seed of the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (or checkpoint file for `train`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize one CIR capture per AP of a scene file.
    Simulate {
        scene: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Track subjects in captures and fuse the APs.
    Track {
        #[arg(required = true)]
        captures: Vec<PathBuf>,
        /// Scene file of a simulated capture, for detection-rate numbers.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Extract µD spectrograms along tracks written by `track`.
    Mud {
        #[arg(required = true)]
        captures: Vec<PathBuf>,
        /// Directory holding the tracks CSVs.
        #[arg(long)]
        tracks: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Write a synthetic single-subject activity dataset.
    Dataset {
        /// Comma-separated activities, in label order.
        #[arg(long, default_value = "walking,sitting,waving", value_delimiter = ',')]
        activities: Vec<String>,
        #[arg(long, default_value_t = 6)]
        scenes_per_class: usize,
        #[arg(long, default_value_t = 10)]
        windows_per_scene: usize,
        #[arg(long, default_value_t = 2e-3)]
        noise_std: f64,
        /// Independent draw of scenes; use different splits for train and test.
        #[arg(long, default_value_t = 0)]
        split: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Train the classifier on a dataset manifest.
    Train {
        manifest: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a checkpoint on a dataset manifest.
    Eval {
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate, track, classify and fuse a scene in one pass.
    E2e {
        scene: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

impl Common {
    fn config(&self) -> Result<PipelineConfig> {
        let mut cfg = commands::load_config(self.config.as_deref())?;
        if let Some(s) = self.seed {
            cfg.train.seed = s;
        }
        Ok(cfg)
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn out(&self) -> Result<PathBuf> {
        self.out.clone().context("--out is required")
    }
}

fn parse_activity(name: &str) -> Result<Activity> {
    match Activity::from_name(name.trim()) {
        Some(a) => Ok(a),
        None => bail!("unknown activity {name:?}"),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { scene, common } => {
            let cfg = common.config()?;
            let scene = commands::load_scene(&scene)?;
            for p in commands::simulate(&scene, &cfg, common.seed(), &common.out()?)? {
                println!("{}", p.display());
            }
        }
        Command::Track { captures, truth, common } => {
            let cfg = common.config()?;
            let truth = truth.map(|p| commands::load_scene(&p)).transpose()?;
            let out = commands::track(&captures, &cfg, truth.as_ref(), &common.out()?)?;
            for t in &out.tracks {
                let ids: std::collections::BTreeSet<u32> =
                    t.steps.iter().flatten().map(|e| e.id).collect();
                println!("ap{}: {} confirmed tracks", t.ap.id, ids.len());
            }
            if let Some(r) = out.report {
                for (ap, rate) in r.per_ap {
                    println!("detection rate ap{ap}: {rate:.3}");
                }
                println!("detection rate union: {:.3}", r.union);
                println!("detection rate fused: {:.3}", r.fused);
            }
        }
        Command::Mud { captures, tracks, common } => {
            let cfg = common.config()?;
            for (ap, specs) in commands::mud(&captures, &tracks, &cfg, &common.out()?)? {
                println!("ap{ap}: {} spectrograms", specs.len());
            }
        }
        Command::Dataset {
            activities,
            scenes_per_class,
            windows_per_scene,
            noise_std,
            split,
            common,
        } => {
            let cfg = common.config()?;
            let spec = ActivityDatasetSpec {
                activities: activities
                    .iter()
                    .map(|a| parse_activity(a))
                    .collect::<Result<_>>()?,
                scenes_per_class,
                windows_per_scene,
                noise_std,
                cfo_range_hz: 40.0,
                split,
            };
            let manifest = commands::dataset(&spec, &cfg, common.seed(), &common.out()?)?;
            println!("{}", manifest.display());
        }
        Command::Train { manifest, common } => {
            let cfg = common.config()?;
            let r = commands::train_cmd(&manifest, &cfg, &common.out()?)?;
            if let Some(last) = r.history.last() {
                println!("final loss {:.4}", last.loss);
            }
            println!("train accuracy {:.3}", r.train_accuracy);
        }
        Command::Eval {
            manifest,
            checkpoint,
            common,
        } => {
            let r = commands::eval_cmd(&manifest, &checkpoint, &common.out()?)?;
            println!("accuracy {:.3}", r.accuracy);
        }
        Command::E2e {
            scene,
            checkpoint,
            common,
        } => {
            let cfg = common.config()?;
            let scene = commands::load_scene(&scene)?;
            let (net, labels) = commands::load_model(&checkpoint)?;
            let out = commands::e2e(&scene, &cfg, &net, &labels, common.seed(), &common.out()?)?;
            for ((ap, id), tl) in commands::timelines(&out) {
                let names: Vec<&str> = tl
                    .iter()
                    .map(|(_, l)| labels.get(*l).map_or("?", String::as_str))
                    .collect();
                println!("ap{ap} track {id}: {}", names.join(" "));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
