//! Batch jobs behind each CLI subcommand.
//!
//! Every job takes a plain config struct, writes its outputs atomically and
//! returns a [`RunSummary`]. Clip-level failures are collected in the summary
//! instead of aborting the batch; the exit code is 1 when any were recorded.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::car::{self, CeOrientation, LabelRecord, LossConfig, PredictionPair};
use crate::compositor::{self, check_degree, OcclusionSpec, Placement};
use crate::counterfactual::{self, FillPolicy};
use crate::dataset::{self, ClipAnnotation, Manifest, ManifestEntry, Schema};
use crate::exec::{self, Exec};
use crate::frames::{self, write_atomic, write_json_atomic, ClipInfo, FrameIoError};
use crate::metrics::{self, OcclusionMetrics};
use crate::occluder::{Category, OccluderCatalog};
use crate::report::{self, DropOrder, Membership, ParentClassMap, PredictionRecord};
use crate::rng;
use crate::track::{self, ActorTrack};

pub const RUN_SUMMARY: &str = "run_summary.json";
pub const ANNOTATIONS_CSV: &str = "annotations.csv";
pub const PLACEMENTS_JSON: &str = "placements.json";
pub const METRICS_JSON: &str = "metrics.json";
pub const SPEC_JSON: &str = "spec.json";
pub const TRACK_FILE: &str = "track.csv";
pub const ANNOTATION_JSON: &str = "annotation.json";

/// Timestamp stamped on annotations when none is configured.
pub const DEFAULT_GENERATION_TIME: &str = "1970-01-01T00:00:00+00:00";

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "OCCLUDE_WORKERS";

#[derive(Debug, Error)]
pub enum JobError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] FrameIoError),
    #[error("{0}")]
    Other(String),
}

impl JobError {
    pub fn exit_code(&self) -> i32 {
        match self {
            JobError::Config(_) => 2,
            _ => 1,
        }
    }
}

fn config(msg: impl std::fmt::Display) -> JobError {
    JobError::Config(msg.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub item: String,
    pub error: String,
}

/// Machine-readable account of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub seed: Option<u64>,
    pub counts: BTreeMap<String, usize>,
    pub failures: Vec<Failure>,
    pub outputs: Vec<String>,
    pub started_at: String,
    pub wall_time_ms: u128,
}

impl RunSummary {
    fn start(subcommand: &str, seed: Option<u64>) -> (Self, Instant) {
        let s = Self {
            tool: env!("CARGO_PKG_NAME").to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            subcommand: subcommand.to_owned(),
            seed,
            counts: BTreeMap::new(),
            failures: Vec::new(),
            outputs: Vec::new(),
            started_at: chrono::Utc::now().to_rfc3339(),
            wall_time_ms: 0,
        };
        (s, Instant::now())
    }

    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else {
            1
        }
    }

    fn finish(mut self, t0: Instant, dir: Option<&Path>) -> Result<Self, JobError> {
        self.outputs.sort();
        self.wall_time_ms = t0.elapsed().as_millis();
        if let Some(dir) = dir {
            write_json_atomic(&dir.join(RUN_SUMMARY), &self)?;
        }
        Ok(self)
    }
}

fn create_dir(dir: &Path) -> Result<(), JobError> {
    std::fs::create_dir_all(dir).map_err(|source| {
        JobError::Io(FrameIoError::Io {
            path: dir.to_path_buf(),
            source,
        })
    })
}

// ---------------------------------------------------------------- synthesize

#[derive(Debug, Clone)]
pub struct SynthesizeConfig {
    pub manifest: Option<PathBuf>,
    /// Directory of per-clip frame directories, used when no manifest is given.
    pub frames_root: Option<PathBuf>,
    /// Directory of `<clip_id>.csv` / `.json` / `.txt` track files.
    pub tracks_dir: Option<PathBuf>,
    pub occluders: PathBuf,
    pub out: PathBuf,
    pub degrees: Vec<f64>,
    pub seed: u64,
    pub max_gap: usize,
    pub min_opaque_pixels: u64,
    pub category: Option<Category>,
    pub generation_time: String,
    pub workers: Option<usize>,
}

impl SynthesizeConfig {
    pub fn new(occluders: PathBuf, out: PathBuf) -> Self {
        Self {
            manifest: None,
            frames_root: None,
            tracks_dir: None,
            occluders,
            out,
            degrees: compositor::DEFAULT_DEGREES.to_vec(),
            seed: 0,
            max_gap: track::DEFAULT_MAX_GAP,
            min_opaque_pixels: crate::occluder::DEFAULT_MIN_OPAQUE_PIXELS,
            category: None,
            generation_time: DEFAULT_GENERATION_TIME.to_owned(),
            workers: None,
        }
    }

    fn validate(&self) -> Result<(), JobError> {
        if self.degrees.is_empty() {
            return Err(config("at least one degree is required"));
        }
        for &d in &self.degrees {
            check_degree(d).map_err(config)?;
        }
        let mut names: Vec<String> = self.degrees.iter().map(|&d| degree_tag(d)).collect();
        names.sort();
        names.dedup();
        if names.len() != self.degrees.len() {
            return Err(config("degrees must differ at percent resolution"));
        }
        chrono::DateTime::parse_from_rfc3339(&self.generation_time)
            .map_err(|e| config(format!("generation time `{}`: {e}", self.generation_time)))?;
        if self.manifest.is_none() && (self.frames_root.is_none() || self.tracks_dir.is_none()) {
            return Err(config("give either --manifest or both --frames and --tracks"));
        }
        Ok(())
    }
}

/// Output suffix for a degree, e.g. `d25` for 0.25.
pub fn degree_tag(degree: f64) -> String {
    format!("d{:02}", (degree * 100.0).round() as u32)
}

pub fn output_name(clip_id: &str, degree: f64) -> String {
    format!("{clip_id}_{}", degree_tag(degree))
}

fn find_track(dir: &Path, clip_id: &str) -> Option<PathBuf> {
    ["csv", "json", "txt"]
        .iter()
        .map(|ext| dir.join(format!("{clip_id}.{ext}")))
        .find(|p| p.is_file())
}

fn discover_clips(cfg: &SynthesizeConfig) -> Result<Vec<ManifestEntry>, JobError> {
    if let Some(m) = &cfg.manifest {
        return Ok(Manifest::load(m).map_err(config)?.clips);
    }
    let root = cfg.frames_root.as_ref().expect("validated");
    let tracks = cfg.tracks_dir.as_ref().expect("validated");
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(|e| config(format!("{}: {e}", root.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    Ok(dirs
        .into_iter()
        .map(|frames| {
            let clip_id = frames.file_name().unwrap_or_default().to_string_lossy().into_owned();
            ManifestEntry {
                track: find_track(tracks, &clip_id),
                clip_id,
                action_class: None,
                frames,
                masks: None,
            }
        })
        .collect())
}

struct ClipOutput {
    name: String,
    annotation: ClipAnnotation,
}

fn synthesize_one(
    entry: &ManifestEntry,
    cfg: &SynthesizeConfig,
    catalog: &OccluderCatalog,
) -> Result<Vec<Result<ClipOutput, Failure>>, String> {
    let track_path = entry.track.as_ref().ok_or("no track file")?;
    let raw = track::parse_track(track_path).map_err(|e| format!("{}: {e}", track_path.display()))?;
    let track = track::interpolate_track(&raw, cfg.max_gap);
    let frames = frames::load_frames(&entry.frames).map_err(|e| e.to_string())?;
    let info = frames::read_clip_info(&entry.frames).ok();
    let fps = info.as_ref().map_or(track.fps, |i| i.fps);
    let action_class = entry
        .action_class
        .clone()
        .or_else(|| info.as_ref().and_then(|i| i.action_class.clone()))
        .unwrap_or_else(|| "unknown".to_owned());

    let seed = rng::clip_seed(cfg.seed, &entry.clip_id);
    let asset = catalog.sample(seed, cfg.category).map_err(|e| e.to_string())?;

    Ok(cfg
        .degrees
        .iter()
        .map(|&degree| {
            let name = output_name(&entry.clip_id, degree);
            let fail = |error: String| Failure { item: name.clone(), error };
            let spec = OcclusionSpec::new(degree, asset.id.clone(), seed).map_err(|e| fail(e.to_string()))?;
            let clip = compositor::synthesize_clip(&frames, &track, &spec, catalog, Exec::default())
                .map_err(|e| fail(e.to_string()))?;
            let m = metrics::clip_metrics(&track, &clip.placements, degree).map_err(|e| fail(e.to_string()))?;
            let video_duration = track.frame_count as f64 / fps;
            let annotation = ClipAnnotation {
                action_class: action_class.clone(),
                file_name: name.clone(),
                occluder_type: asset.category.to_string(),
                occluder_file_name: asset.file_name().to_owned(),
                occluder_pixel_ratio: m.mean_area_ratio,
                occluder_size_ratio: degree,
                occlusion_duration: m.duration_ratio * video_duration,
                video_duration,
                fps,
                clip_generation_time: cfg.generation_time.clone(),
            };
            let dest = cfg.out.join(&name);
            frames::write_dir_atomic::<JobError>(&dest, |dir| {
                frames::write_frames(dir, &clip.frames)?;
                write_json_atomic(&dir.join(PLACEMENTS_JSON), &clip.placements)?;
                write_json_atomic(&dir.join(METRICS_JSON), &m)?;
                write_json_atomic(&dir.join(SPEC_JSON), &spec)?;
                write_json_atomic(&dir.join(ANNOTATION_JSON), &annotation)?;
                write_json_atomic(
                    &dir.join(frames::CLIP_SIDECAR),
                    &ClipInfo {
                        fps,
                        action_class: Some(action_class.clone()),
                    },
                )?;
                write_atomic(&dir.join(TRACK_FILE), track.to_text().as_bytes())?;
                Ok(())
            })
            .map_err(|e| fail(e.to_string()))?;
            Ok(ClipOutput { name, annotation })
        })
        .collect())
}

/// Generate occluded versions of every source clip at every configured degree.
pub fn synthesize(cfg: &SynthesizeConfig) -> Result<RunSummary, JobError> {
    cfg.validate()?;
    let (mut summary, t0) = RunSummary::start("synthesize", Some(cfg.seed));
    let (catalog, rejected) = OccluderCatalog::load_dir(&cfg.occluders, cfg.min_opaque_pixels).map_err(config)?;
    if catalog.is_empty() {
        return Err(config(format!("no usable occluders under {}", cfg.occluders.display())));
    }
    let clips = discover_clips(cfg)?;
    create_dir(&cfg.out)?;

    let results = exec::with_workers(cfg.workers, || {
        Exec::default().map(&clips, |entry| synthesize_one(entry, cfg, &catalog))
    });

    let mut annotations = Vec::new();
    for (entry, r) in clips.iter().zip(results) {
        match r {
            Ok(outputs) => {
                for o in outputs {
                    match o {
                        Ok(o) => {
                            summary.outputs.push(o.name);
                            annotations.push(o.annotation);
                        }
                        Err(f) => summary.failures.push(f),
                    }
                }
            }
            Err(error) => summary.failures.push(Failure {
                item: entry.clip_id.clone(),
                error,
            }),
        }
    }
    for f in &summary.failures {
        log::warn!("{}: {}", f.item, f.error);
    }
    annotations.sort_by(|a, b| a.file_name.cmp(&b.file_name));
    dataset::write_annotations(&annotations, &cfg.out.join(ANNOTATIONS_CSV)).map_err(|e| JobError::Other(e.to_string()))?;

    summary.counts.insert("source_clips".into(), clips.len());
    summary.counts.insert("occluders".into(), catalog.len());
    summary.counts.insert("occluders_rejected".into(), rejected.len());
    summary.counts.insert("outputs".into(), annotations.len());
    summary.counts.insert("annotations".into(), annotations.len());
    summary.finish(t0, Some(&cfg.out))
}

// ------------------------------------------------------------------- metrics

/// Clip output directories (those holding a `spec.json`) under `root`, sorted.
pub fn output_dirs(root: &Path) -> Result<Vec<PathBuf>, JobError> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(|e| config(format!("{}: {e}", root.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(SPEC_JSON).is_file())
        .collect();
    dirs.sort();
    Ok(dirs)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Recompute metrics for one synthesized clip directory from its placements,
/// track and spec.
pub fn recompute_metrics(dir: &Path) -> Result<OcclusionMetrics, String> {
    let spec: OcclusionSpec = read_json(&dir.join(SPEC_JSON))?;
    let placements: Vec<Placement> = read_json(&dir.join(PLACEMENTS_JSON))?;
    let track: ActorTrack = track::parse_track(&dir.join(TRACK_FILE)).map_err(|e| e.to_string())?;
    metrics::clip_metrics(&track, &placements, spec.degree).map_err(|e| e.to_string())
}

/// Rewrite `metrics.json` in every synthesized clip directory under `root`.
pub fn metrics(root: &Path) -> Result<RunSummary, JobError> {
    let (mut summary, t0) = RunSummary::start("metrics", None);
    let dirs = output_dirs(root)?;
    let results = Exec::default().map(&dirs, |d| recompute_metrics(d));
    for (d, r) in dirs.iter().zip(results) {
        let name = d.file_name().unwrap_or_default().to_string_lossy().into_owned();
        match r {
            Ok(m) => {
                write_json_atomic(&d.join(METRICS_JSON), &m)?;
                summary.outputs.push(name);
            }
            Err(error) => summary.failures.push(Failure { item: name, error }),
        }
    }
    summary.counts.insert("clips".into(), dirs.len());
    summary.finish(t0, Some(root))
}

// ------------------------------------------------------------ counterfactual

#[derive(Debug, Clone)]
pub struct CounterfactualConfig {
    pub frames: PathBuf,
    pub masks: PathBuf,
    pub out: PathBuf,
    pub fill: FillPolicy,
}

/// Erase the actor from one clip. Frames without masks pass through and are
/// listed as failures.
pub fn counterfactual(cfg: &CounterfactualConfig) -> Result<RunSummary, JobError> {
    let (mut summary, t0) = RunSummary::start("counterfactual", None);
    let frames = frames::load_frames(&cfg.frames).map_err(config)?;
    let masks = counterfactual::load_masks(&cfg.masks, frames.len()).map_err(config)?;
    let erased = counterfactual::erase_actor(&frames, &masks, &cfg.fill, Exec::default()).map_err(config)?;
    let info = frames::read_clip_info(&cfg.frames).ok();
    frames::write_dir_atomic::<JobError>(&cfg.out, |dir| {
        frames::write_frames(dir, &erased.frames)?;
        if let Some(info) = &info {
            write_json_atomic(&dir.join(frames::CLIP_SIDECAR), info)?;
        }
        Ok(())
    })?;
    for i in &erased.missing_masks {
        summary.failures.push(Failure {
            item: frames::frame_file_name(*i),
            error: "no mask; frame left unchanged".into(),
        });
    }
    summary.counts.insert("frames".into(), erased.frames.len());
    summary.counts.insert("missing_masks".into(), erased.missing_masks.len());
    summary.outputs = (0..erased.frames.len()).map(frames::frame_file_name).collect();
    summary.finish(t0, Some(&cfg.out))
}

// ------------------------------------------------------------------ annotate

/// Collect `annotation.json` from every synthesized clip under `root` and
/// write them as one CSV in the requested schema tier.
pub fn annotate(root: &Path, out: &Path, schema: Schema) -> Result<RunSummary, JobError> {
    let (mut summary, t0) = RunSummary::start("annotate", None);
    let mut records = Vec::new();
    for d in output_dirs(root)? {
        let name = d.file_name().unwrap_or_default().to_string_lossy().into_owned();
        match read_json::<ClipAnnotation>(&d.join(ANNOTATION_JSON)) {
            Ok(a) => {
                records.push(a);
                summary.outputs.push(name);
            }
            Err(error) => summary.failures.push(Failure { item: name, error }),
        }
    }
    records.sort_by(|a, b| a.file_name.cmp(&b.file_name));
    dataset::write_annotations_with(&records, out, schema).map_err(|e| JobError::Other(e.to_string()))?;
    summary.counts.insert("records".into(), records.len());
    summary.finish(t0, None)
}

// ------------------------------------------------------------------ car-loss

#[derive(Debug, Clone)]
pub struct CarLossConfig {
    pub pairs: PathBuf,
    pub labels: PathBuf,
    pub loss: LossConfig,
    /// When set, emit a batch-mean table over these alphas instead of
    /// per-record lines.
    pub sweep: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
struct PairLine {
    #[serde(default)]
    id: Option<String>,
    p: Vec<f64>,
    c: Vec<f64>,
}

/// One output line of `car-loss`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossLine {
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub loss: f64,
    pub cross_entropy: f64,
    pub kl: f64,
    pub grad_p: Vec<f64>,
    pub grad_c: Vec<f64>,
}

fn jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, JobError> {
    let text = std::fs::read_to_string(path).map_err(|e| config(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| config(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}

pub fn parse_orientation(s: &str) -> Result<CeOrientation, JobError> {
    match s {
        "standard" => Ok(CeOrientation::Standard),
        "swapped" => Ok(CeOrientation::Swapped),
        _ => Err(config(format!("unknown cross-entropy orientation `{s}`"))),
    }
}

/// Compute per-record losses and gradients (or an alpha sweep table).
/// Returns the text to emit plus the summary.
pub fn car_loss(cfg: &CarLossConfig) -> Result<(String, RunSummary), JobError> {
    let (mut summary, t0) = RunSummary::start("car-loss", None);
    cfg.loss.validate().map_err(config)?;
    let pairs: Vec<PairLine> = jsonl(&cfg.pairs)?;
    let labels: Vec<LabelRecord> = jsonl(&cfg.labels)?;
    if pairs.len() != labels.len() {
        return Err(config(format!("{} pairs but {} labels", pairs.len(), labels.len())));
    }

    let mut good_pairs = Vec::new();
    let mut good_labels = Vec::new();
    let mut ids = Vec::new();
    for (i, (p, l)) in pairs.into_iter().zip(labels).enumerate() {
        let parsed = PredictionPair::new(p.p, p.c).and_then(|pair| {
            let label = l.to_distribution(pair.len())?;
            Ok((pair, label))
        });
        match parsed {
            Ok((pair, label)) => {
                good_pairs.push(pair);
                good_labels.push(label);
                ids.push((i, p.id));
            }
            Err(e) => summary.failures.push(Failure {
                item: format!("record {i}"),
                error: e.to_string(),
            }),
        }
    }

    let text = if let Some(alphas) = &cfg.sweep {
        let rows = car::alpha_sweep(&good_pairs, &good_labels, alphas, &cfg.loss, Exec::default()).map_err(config)?;
        summary.counts.insert("alphas".into(), rows.len());
        car::sweep_table_csv(&rows).map_err(|e| JobError::Other(e.to_string()))?
    } else {
        let lines = Exec::default().map_indexed(&good_pairs, |j, pair| {
            let label = &good_labels[j];
            let terms = car::car_loss(pair, label, &cfg.loss)?;
            let grad = car::car_loss_gradient(pair, label, &cfg.loss)?;
            Ok::<_, car::CarError>((terms, grad))
        });
        let mut out = String::new();
        for ((index, id), r) in ids.into_iter().zip(lines) {
            match r {
                Ok((t, g)) => {
                    let line = LossLine {
                        index,
                        id,
                        loss: t.loss,
                        cross_entropy: t.cross_entropy,
                        kl: t.kl,
                        grad_p: g.d_p,
                        grad_c: g.d_c,
                    };
                    out.push_str(&serde_json::to_string(&line).expect("loss line serializes"));
                    out.push('\n');
                }
                Err(e) => summary.failures.push(Failure {
                    item: format!("record {index}"),
                    error: e.to_string(),
                }),
            }
        }
        out
    };
    summary.counts.insert("records".into(), good_pairs.len());
    Ok((text, summary.finish(t0, None)?))
}

// -------------------------------------------------------------------- report

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Factor {
    Degree,
    AreaRatio,
    DurationRatio,
}

impl std::str::FromStr for Factor {
    type Err = JobError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "degree" => Ok(Factor::Degree),
            "area" | "area_ratio" => Ok(Factor::AreaRatio),
            "duration" | "duration_ratio" => Ok(Factor::DurationRatio),
            _ => Err(config(format!("unknown factor `{s}` (degree, area, duration)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum FactorSource {
    /// Synthesis output directory; clip ids are the output names.
    Synthesized { root: PathBuf, factor: Factor },
    /// CSV with `clip_id,value` columns.
    Csv(PathBuf),
}

#[derive(Debug, Clone)]
pub struct ReportConfig {
    pub predictions: PathBuf,
    pub occluded: Option<PathBuf>,
    pub factors: Option<FactorSource>,
    pub bins: Vec<f64>,
    pub ks: Vec<usize>,
    /// `None` skips the parent table; `Some(None)` uses the bundled map.
    pub parents: Option<Option<PathBuf>>,
    pub membership: Membership,
    /// Extra `(baseline, occluded)` dumps, one pair per model, for the
    /// per-class drop table.
    pub model_pairs: Vec<(PathBuf, PathBuf)>,
    pub drop_order: DropOrder,
    pub out: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TopKRow {
    split: String,
    k: usize,
    accuracy: f64,
    records: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ClassDropRow {
    class: String,
    drop: f64,
}

#[derive(Debug, Clone, Deserialize)]
struct FactorCsvRow {
    clip_id: String,
    value: f64,
}

pub fn load_factors(source: &FactorSource) -> Result<BTreeMap<String, f64>, JobError> {
    match source {
        FactorSource::Csv(path) => {
            let mut rdr = csv::Reader::from_path(path).map_err(|e| config(format!("{}: {e}", path.display())))?;
            rdr.deserialize::<FactorCsvRow>()
                .map(|r| r.map(|r| (r.clip_id, r.value)).map_err(|e| config(format!("{}: {e}", path.display()))))
                .collect()
        }
        FactorSource::Synthesized { root, factor } => {
            let mut out = BTreeMap::new();
            for d in output_dirs(root)? {
                let m: OcclusionMetrics = read_json(&d.join(METRICS_JSON)).map_err(config)?;
                let v = match factor {
                    Factor::Degree => m.degree,
                    Factor::AreaRatio => m.mean_area_ratio,
                    Factor::DurationRatio => m.duration_ratio,
                };
                out.insert(d.file_name().unwrap_or_default().to_string_lossy().into_owned(), v);
            }
            Ok(out)
        }
    }
}

/// Source clip id for a synthesized output name (`clip_d25` -> `clip`).
pub fn source_clip_id(name: &str) -> Option<&str> {
    let (clip, tag) = name.rsplit_once("_d")?;
    (!tag.is_empty() && tag.bytes().all(|b| b.is_ascii_digit())).then_some(clip)
}

/// Baseline records re-keyed so every occluded output has a counterpart.
/// Occluded ids already present in the baseline are kept as they are.
fn align_baseline(baseline: &[PredictionRecord], occluded: &[PredictionRecord]) -> Vec<PredictionRecord> {
    let by_id: BTreeMap<&str, &PredictionRecord> = baseline.iter().map(|r| (r.clip_id.as_str(), r)).collect();
    occluded
        .iter()
        .filter_map(|o| {
            let id = o.clip_id.as_str();
            let src = by_id.get(id).or_else(|| source_clip_id(id).and_then(|s| by_id.get(s)))?;
            let mut r = (*src).clone();
            r.clip_id = o.clip_id.clone();
            Some(r)
        })
        .collect()
}

fn load_records(path: &Path) -> Result<Vec<PredictionRecord>, JobError> {
    report::load_predictions(path).map_err(|e| config(format!("{}: {e}", path.display())))
}

fn write_table(dir: &Path, name: &str, csv: String, summary: &mut RunSummary) -> Result<(), JobError> {
    write_atomic(&dir.join(name), csv.as_bytes())?;
    summary.outputs.push(name.to_owned());
    Ok(())
}

/// Emit the robustness tables as CSV (plus a JSON bundle) under `cfg.out`.
pub fn report(cfg: &ReportConfig) -> Result<RunSummary, JobError> {
    let (mut summary, t0) = RunSummary::start("report", None);
    if cfg.ks.is_empty() || cfg.ks.contains(&0) {
        return Err(config("k values must be >= 1"));
    }
    create_dir(&cfg.out)?;
    let baseline = load_records(&cfg.predictions)?;
    let occluded = cfg.occluded.as_deref().map(load_records).transpose()?;
    let rep = |e: report::ReportError| JobError::Other(e.to_string());
    let mut bundle = serde_json::Map::new();

    let mut topk = Vec::new();
    for (split, records) in [("baseline", Some(&baseline)), ("occluded", occluded.as_ref())] {
        let Some(records) = records else { continue };
        for &k in &cfg.ks {
            topk.push(TopKRow {
                split: split.into(),
                k,
                accuracy: report::top_k_accuracy(records, k, Exec::default()).map_err(rep)?,
                records: records.len(),
            });
        }
    }
    bundle.insert("top_k".into(), serde_json::to_value(&topk).expect("serializable"));
    write_table(&cfg.out, "top_k.csv", report::rows_to_csv(&topk).map_err(rep)?, &mut summary)?;

    if let (Some(occ), Some(source)) = (&occluded, &cfg.factors) {
        let factors = load_factors(source)?;
        let aligned = align_baseline(&baseline, occ);
        let table = report::accuracy_drop_by_factor(&aligned, occ, &factors, &cfg.bins, cfg.ks[0]).map_err(rep)?;
        for b in table.empty_bins() {
            log::info!("factor bin {b} is empty");
        }
        summary.counts.insert("unbinned_clips".into(), table.unbinned.len());
        bundle.insert("factor_drop".into(), serde_json::to_value(&table).expect("serializable"));
        write_table(&cfg.out, "factor_drop.csv", report::rows_to_csv(&table.rows).map_err(rep)?, &mut summary)?;
    }

    if let Some(parents) = &cfg.parents {
        let map = match parents {
            Some(p) => ParentClassMap::load(p).map_err(|e| config(e.to_string()))?,
            None => ParentClassMap::bundled(),
        };
        let rows = report::parent_class_aggregate(&baseline, &map, cfg.ks[0], cfg.membership).map_err(rep)?;
        bundle.insert("parents".into(), serde_json::to_value(&rows).expect("serializable"));
        write_table(&cfg.out, "parents.csv", report::rows_to_csv(&rows).map_err(rep)?, &mut summary)?;
    }

    if !cfg.model_pairs.is_empty() {
        let mut models = Vec::new();
        for (b, o) in &cfg.model_pairs {
            models.push((load_records(b)?, load_records(o)?));
        }
        let drops = report::per_class_drop(&models, cfg.ks[0], cfg.drop_order).map_err(rep)?;
        let rows: Vec<ClassDropRow> = drops.into_iter().map(|(class, drop)| ClassDropRow { class, drop }).collect();
        bundle.insert("class_drop".into(), serde_json::to_value(&rows).expect("serializable"));
        write_table(&cfg.out, "class_drop.csv", report::rows_to_csv(&rows).map_err(rep)?, &mut summary)?;
    }

    write_json_atomic(&cfg.out.join("report.json"), &bundle)?;
    summary.outputs.push("report.json".into());
    summary.counts.insert("records".into(), baseline.len());
    summary.finish(t0, Some(&cfg.out))
}
