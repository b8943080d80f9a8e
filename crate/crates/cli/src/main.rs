//! `coastseg`: synthesize scenes, train, evaluate, ablate and gradient-check.

mod commands;
mod config;
mod manifest;
mod store;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use commands::{
    AblateSettings, EvalSettings, EvalSplit, GradcheckSettings, Outcome, SynthSettings,
    TrainSettings,
};
use config::{FlatConfig, PostprocFlat};
use manifest::{absolute, Manifest};

const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

pub(crate) fn config_error(msg: impl Into<String>) -> anyhow::Error {
    coastseg::Error::Config(msg.into()).into()
}

#[derive(Parser)]
#[command(
    name = "coastseg",
    version,
    about = "Robust coastal-water segmentation toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic benchmark of coastline scenes.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 40)]
        count: usize,
        /// Fraction of scenes in the training split.
        #[arg(long, default_value_t = 0.8)]
        split: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 32)]
        height: usize,
        #[arg(long, default_value_t = 32)]
        width: usize,
    },
    /// Train the segmenter and write the model plus a per-epoch report.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        opts: TrainOpts,
    },
    /// Score a model or precomputed masks against the labels.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, conflicts_with = "masks", required_unless_present = "masks")]
        model: Option<PathBuf>,
        /// Directory of PGM masks named after the scenes (`scene_000.pgm`, ...).
        #[arg(long)]
        masks: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = EvalSplit::Validation)]
        split: EvalSplit,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Refine masks with opening/closing, area cleanup and column connectivity.
        #[arg(long)]
        postprocess: bool,
        #[arg(long, default_value_t = 3)]
        open_close_k: usize,
        #[arg(long, default_value_t = 8)]
        min_sea_area: usize,
        #[arg(long, default_value_t = 8)]
        min_land_area: usize,
        #[arg(long)]
        no_column_connectivity: bool,
        #[arg(long)]
        write_masks: bool,
    },
    /// Leave-one-term-out ablation of the composite loss.
    Ablate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        opts: TrainOpts,
    },
    /// Compare analytic gradients with central finite differences.
    Gradcheck {
        /// Side length of the random instances (at most 12).
        #[arg(long, default_value_t = 12)]
        size: usize,
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-5)]
        tolerance: f64,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        /// Check only these terms (ce, hsv, coast, conn, sea); repeatable.
        #[arg(long = "term")]
        terms: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Repeat a run from its manifest into a new directory.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct TrainOpts {
    /// Key = value config file; see README for the keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set lambda_conn=0`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Cross-entropy only: zero every auxiliary weight.
    #[arg(long)]
    ce_only: bool,
}

impl TrainOpts {
    fn resolve(&self) -> Result<FlatConfig> {
        let mut c = config::load(self.config.as_deref(), &self.sets)?;
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.epochs {
            c.epochs = v;
        }
        if let Some(v) = self.learning_rate {
            c.learning_rate = v;
        }
        if let Some(v) = self.batch_size {
            c.batch_size = v;
        }
        if self.ce_only {
            c.lambda_hsv = 0.0;
            c.lambda_coast = 0.0;
            c.lambda_conn = 0.0;
            c.lambda_sea = 0.0;
        }
        c.to_train_config()?;
        Ok(c)
    }
}

fn data_path(p: &Path) -> Result<String> {
    absolute(p).with_context(|| format!("dataset {}", p.display()))
}

/// Runs `body`, then stamps the duration and writes the manifest into `out`.
fn with_manifest(out: Option<&Path>, body: impl FnOnce() -> Result<Outcome>) -> Result<()> {
    let start = Instant::now();
    let Outcome {
        mut manifest,
        failure,
    } = body()?;
    manifest.duration_seconds = start.elapsed().as_secs_f64();
    if let Some(dir) = out {
        manifest.write(dir)?;
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn replay(manifest: &Manifest, out: &Path) -> Result<()> {
    match manifest.command.as_str() {
        "synth" => with_manifest(Some(out), || commands::synth(&manifest.settings()?, out)),
        "train" => with_manifest(Some(out), || {
            commands::train_cmd(&manifest.settings()?, out)
        }),
        "eval" => with_manifest(Some(out), || commands::eval(&manifest.settings()?, out)),
        "ablate" => with_manifest(Some(out), || {
            commands::ablate_cmd(&manifest.settings()?, out)
        }),
        "gradcheck" => with_manifest(Some(out), || {
            commands::gradcheck_cmd(&manifest.settings()?, Some(out))
        }),
        other => Err(config_error(format!(
            "manifest names unknown command `{other}`"
        ))),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            out,
            count,
            split,
            seed,
            height,
            width,
        } => {
            let s = SynthSettings {
                count,
                split,
                seed,
                height,
                width,
            };
            with_manifest(Some(&out), || commands::synth(&s, &out))
        }
        Command::Train { data, out, opts } => {
            let s = TrainSettings {
                data: data_path(&data)?,
                train: opts.resolve()?,
            };
            with_manifest(Some(&out), || commands::train_cmd(&s, &out))
        }
        Command::Eval {
            data,
            out,
            model,
            masks,
            split,
            threshold,
            postprocess,
            open_close_k,
            min_sea_area,
            min_land_area,
            no_column_connectivity,
            write_masks,
        } => {
            let s = EvalSettings {
                data: data_path(&data)?,
                model: model.as_deref().map(absolute).transpose()?,
                masks: masks.as_deref().map(absolute).transpose()?,
                split,
                threshold,
                postprocess: postprocess.then_some(PostprocFlat {
                    threshold,
                    open_close_k,
                    min_sea_area,
                    min_land_area,
                    enforce_column_connectivity: !no_column_connectivity,
                }),
                write_masks,
            };
            with_manifest(Some(&out), || commands::eval(&s, &out))
        }
        Command::Ablate { data, out, opts } => {
            let s = AblateSettings {
                data: data_path(&data)?,
                train: opts.resolve()?,
            };
            with_manifest(Some(&out), || commands::ablate_cmd(&s, &out))
        }
        Command::Gradcheck {
            size,
            instances,
            seed,
            tolerance,
            step,
            terms,
            out,
        } => {
            let s = GradcheckSettings {
                size,
                instances,
                seed,
                tolerance,
                step,
                terms,
            };
            with_manifest(out.as_deref(), || {
                commands::gradcheck_cmd(&s, out.as_deref())
            })
        }
        Command::Rerun { manifest, out } => replay(&Manifest::read(&manifest)?, &out),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use coastseg::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::Io { .. } | E::Netpbm(_) => EXIT_IO,
                E::Divergence { .. } | E::GradCheck(_) => EXIT_NUMERIC,
                _ => EXIT_CONFIG,
            };
        }
        if cause.is::<std::io::Error>() || cause.is::<csv::Error>() {
            return EXIT_IO;
        }
        if cause.is::<toml::de::Error>() || cause.is::<toml::ser::Error>() {
            return EXIT_CONFIG;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
