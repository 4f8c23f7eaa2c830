use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use occlusion_core::car::{LossConfig, ALPHA_GRID};
use occlusion_core::counterfactual::FillPolicy;
use occlusion_core::dataset::Schema;
use occlusion_core::jobs::{self, JobError, RunSummary};
use occlusion_core::occluder::Category;
use occlusion_core::report::{DropOrder, Membership};

#[derive(Parser)]
#[command(name = "occlude", version, about = "Occluded action-recognition dataset tooling")]
struct Cli {
    /// Worker threads (defaults to all cores)
    #[arg(long, global = true, env = "OCCLUDE_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Paste occluders over tracked actors at each degree
    Synthesize {
        #[arg(long, conflicts_with_all = ["frames", "tracks"])]
        manifest: Option<PathBuf>,
        /// Directory holding one frame directory per clip
        #[arg(long, requires = "tracks")]
        frames: Option<PathBuf>,
        /// Directory holding `<clip_id>.csv` track files
        #[arg(long, requires = "frames")]
        tracks: Option<PathBuf>,
        #[arg(long)]
        occluders: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.25, 0.5, 0.75])]
        degrees: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = occlusion_core::track::DEFAULT_MAX_GAP)]
        max_gap: usize,
        #[arg(long, default_value_t = occlusion_core::occluder::DEFAULT_MIN_OPAQUE_PIXELS)]
        min_opaque_pixels: u64,
        /// Restrict sampling to one occluder category
        #[arg(long)]
        category: Option<Category>,
        /// RFC 3339 timestamp written to annotations; falls back to SOURCE_DATE_EPOCH
        #[arg(long)]
        generation_time: Option<String>,
    },
    /// Recompute metrics.json for every synthesized clip in a directory
    Metrics {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Erase the actor from a clip using per-frame masks
    Counterfactual {
        #[arg(long)]
        frames: PathBuf,
        #[arg(long)]
        masks: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// constant:R,G,B | frame_mean | horizontal_inpaint
        #[arg(long, default_value = "constant:114,114,114")]
        fill: FillPolicy,
    },
    /// Write the annotation CSV for a synthesized directory
    Annotate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// d (full), s (simplified) or im (class and file only)
        #[arg(long, default_value = "d")]
        schema: Schema,
    },
    /// Loss and gradients for factual/counterfactual prediction pairs
    CarLoss {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
        #[arg(long, default_value = "standard")]
        orientation: String,
        /// Emit a batch-mean table over alphas instead of per-record lines
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        sweep: Option<Vec<f64>>,
        /// Output file (stdout when omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Accuracy and robustness tables from prediction dumps
    Report {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        occluded: Option<PathBuf>,
        /// Synthesized directory supplying per-clip factor values
        #[arg(long, conflicts_with = "factor_csv")]
        factors_from: Option<PathBuf>,
        #[arg(long, default_value = "degree")]
        factor: String,
        /// CSV with clip_id,value columns
        #[arg(long)]
        factor_csv: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.25, 0.5, 0.75, 1.0])]
        bins: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1, 5])]
        k: Vec<usize>,
        /// Parent-class table; `bundled` uses the built-in map
        #[arg(long)]
        parents: Option<String>,
        #[arg(long, value_enum, default_value_t = MembershipArg::First)]
        membership: MembershipArg,
        /// BASELINE:OCCLUDED prediction dumps, one per model
        #[arg(long = "model")]
        models: Vec<String>,
        #[arg(long, value_enum, default_value_t = DropOrderArg::DifferenceThenAverage)]
        drop_order: DropOrderArg,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MembershipArg {
    First,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum DropOrderArg {
    DifferenceThenAverage,
    AverageThenDifference,
}

fn generation_time(flag: Option<String>) -> Result<String, JobError> {
    if let Some(t) = flag {
        return Ok(t);
    }
    match std::env::var("SOURCE_DATE_EPOCH") {
        Ok(v) => {
            let secs: i64 = v
                .trim()
                .parse()
                .map_err(|_| JobError::Config(format!("SOURCE_DATE_EPOCH `{v}` is not an integer")))?;
            chrono::DateTime::from_timestamp(secs, 0)
                .map(|t| t.to_rfc3339())
                .ok_or_else(|| JobError::Config(format!("SOURCE_DATE_EPOCH `{v}` out of range")))
        }
        Err(_) => Ok(jobs::DEFAULT_GENERATION_TIME.to_owned()),
    }
}

fn run(cli: Cli) -> Result<RunSummary, JobError> {
    let workers = cli.workers;
    occlusion_core::exec::with_workers(workers, move || match cli.command {
        Command::Synthesize {
            manifest,
            frames,
            tracks,
            occluders,
            out,
            degrees,
            seed,
            max_gap,
            min_opaque_pixels,
            category,
            generation_time: gt,
        } => {
            let mut cfg = jobs::SynthesizeConfig::new(occluders, out);
            cfg.manifest = manifest;
            cfg.frames_root = frames;
            cfg.tracks_dir = tracks;
            cfg.degrees = degrees;
            cfg.seed = seed;
            cfg.max_gap = max_gap;
            cfg.min_opaque_pixels = min_opaque_pixels;
            cfg.category = category;
            cfg.generation_time = generation_time(gt)?;
            cfg.workers = workers;
            jobs::synthesize(&cfg)
        }
        Command::Metrics { input } => jobs::metrics(&input),
        Command::Counterfactual { frames, masks, out, fill } => {
            jobs::counterfactual(&jobs::CounterfactualConfig { frames, masks, out, fill })
        }
        Command::Annotate { input, out, schema } => jobs::annotate(&input, &out, schema),
        Command::CarLoss {
            pairs,
            labels,
            alpha,
            epsilon,
            orientation,
            sweep,
            out,
        } => {
            let loss = LossConfig {
                alpha,
                label_smoothing_epsilon: epsilon,
                orientation: jobs::parse_orientation(&orientation)?,
            };
            let sweep = sweep.map(|s| if s.is_empty() { ALPHA_GRID.to_vec() } else { s });
            let (text, summary) = jobs::car_loss(&jobs::CarLossConfig { pairs, labels, loss, sweep })?;
            match out {
                Some(path) => occlusion_core::frames::write_atomic(&path, text.as_bytes())?,
                None => std::io::stdout()
                    .write_all(text.as_bytes())
                    .map_err(|e| JobError::Other(format!("stdout: {e}")))?,
            }
            Ok(summary)
        }
        Command::Report {
            predictions,
            occluded,
            factors_from,
            factor,
            factor_csv,
            bins,
            k,
            parents,
            membership,
            models,
            drop_order,
            out,
        } => {
            let factors = match (factors_from, factor_csv) {
                (Some(root), _) => Some(jobs::FactorSource::Synthesized {
                    root,
                    factor: factor.parse()?,
                }),
                (None, Some(csv)) => Some(jobs::FactorSource::Csv(csv)),
                (None, None) => None,
            };
            let model_pairs = models
                .iter()
                .map(|m| {
                    m.split_once(':')
                        .map(|(b, o)| (PathBuf::from(b), PathBuf::from(o)))
                        .ok_or_else(|| JobError::Config(format!("--model `{m}` must be BASELINE:OCCLUDED")))
                })
                .collect::<Result<_, _>>()?;
            jobs::report(&jobs::ReportConfig {
                predictions,
                occluded,
                factors,
                bins,
                ks: k,
                parents: parents.map(|p| (p != "bundled").then(|| PathBuf::from(p))),
                membership: match membership {
                    MembershipArg::First => Membership::First,
                    MembershipArg::All => Membership::All,
                },
                model_pairs,
                drop_order: match drop_order {
                    DropOrderArg::DifferenceThenAverage => DropOrder::DifferenceThenAverage,
                    DropOrderArg::AverageThenDifference => DropOrder::AverageThenDifference,
                },
                out,
            })
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli).context("occlude failed") {
        Ok(summary) => {
            for f in &summary.failures {
                log::warn!("{}: {}", f.item, f.error);
            }
            log::info!(
                "{}: {} outputs, {} failures in {} ms",
                summary.subcommand,
                summary.outputs.len(),
                summary.failures.len(),
                summary.wall_time_ms
            );
            ExitCode::from(summary.exit_code() as u8)
        }
        Err(e) => {
            let code = e.downcast_ref::<JobError>().map_or(1, JobError::exit_code);
            eprintln!("error: {e:#}");
            ExitCode::from(code as u8)
        }
    }
}
