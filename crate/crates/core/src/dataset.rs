//! Annotation CSV and clip manifest.
//!
//! The full tracking-occlusion schema has ten columns, written in this order:
//! `action_class, file_name, occluder_type, occluder_file_name,
//! occluder_pixel_ratio, occluder_size_ratio, occlusion_duration,
//! video_duration, fps, clip_generation_time`. Reading is keyed by header
//! name, so column order in input files is free.

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frames::{write_atomic, FrameIoError};

pub const ANNOTATION_FIELDS: [&str; 10] = [
    "action_class",
    "file_name",
    "occluder_type",
    "occluder_file_name",
    "occluder_pixel_ratio",
    "occluder_size_ratio",
    "occlusion_duration",
    "video_duration",
    "fps",
    "clip_generation_time",
];

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Io(#[from] FrameIoError),
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("schema error: missing column(s) {missing:?}")]
    Schema { missing: Vec<String> },
    #[error("{} invalid row(s); first: {}", .0.len(), .0[0])]
    Rows(Vec<RowError>),
    #[error("invalid record {file_name}: {msg}")]
    InvalidRecord { file_name: String, msg: String },
    #[error("manifest {path}: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("unknown schema `{0}` (expected d, s or im)")]
    UnknownSchema(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    /// 1-based line in the file; the header is line 1.
    pub line: u64,
    pub msg: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.msg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipAnnotation {
    pub action_class: String,
    pub file_name: String,
    pub occluder_type: String,
    pub occluder_file_name: String,
    pub occluder_pixel_ratio: f64,
    pub occluder_size_ratio: f64,
    /// Seconds.
    pub occlusion_duration: f64,
    /// Seconds.
    pub video_duration: f64,
    pub fps: f64,
    /// RFC 3339 / ISO-8601 timestamp.
    pub clip_generation_time: String,
}

impl ClipAnnotation {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("occluder_pixel_ratio", self.occluder_pixel_ratio),
            ("occluder_size_ratio", self.occluder_size_ratio),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(format!("{name} = {v} is outside [0, 1]"));
            }
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(format!("fps = {} must be positive", self.fps));
        }
        if !self.video_duration.is_finite() || !(0.0..=self.video_duration).contains(&self.occlusion_duration) {
            return Err(format!(
                "occlusion_duration = {} must lie in [0, video_duration = {}]",
                self.occlusion_duration, self.video_duration
            ));
        }
        chrono::DateTime::parse_from_rfc3339(&self.clip_generation_time)
            .map_err(|e| format!("clip_generation_time `{}`: {e}", self.clip_generation_time))?;
        Ok(())
    }
}

/// Annotation tier. `D` is the full tracking-occlusion schema; `S` keeps
/// class, file, fps and duration; `Im` keeps class and file only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schema {
    #[default]
    D,
    S,
    Im,
}

impl Schema {
    pub fn columns(self) -> &'static [&'static str] {
        match self {
            Schema::D => &ANNOTATION_FIELDS,
            Schema::S => &["action_class", "file_name", "fps", "video_duration"],
            Schema::Im => &["action_class", "file_name"],
        }
    }
}

impl FromStr for Schema {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "d" => Ok(Schema::D),
            "s" => Ok(Schema::S),
            "im" | "i" | "m" => Ok(Schema::Im),
            _ => Err(DatasetError::UnknownSchema(s.to_owned())),
        }
    }
}

/// Row of a reduced-tier file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimpleAnnotation {
    pub action_class: String,
    pub file_name: String,
    pub fps: Option<f64>,
    pub video_duration: Option<f64>,
}

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .quote_style(csv::QuoteStyle::Necessary)
        .has_headers(false)
        .from_writer(Vec::new())
}

/// Encode records under `schema` to CSV bytes. Every record is validated.
pub fn encode_annotations(records: &[ClipAnnotation], schema: Schema) -> Result<Vec<u8>, DatasetError> {
    let mut w = writer();
    w.write_record(schema.columns())?;
    for r in records {
        r.validate().map_err(|msg| DatasetError::InvalidRecord {
            file_name: r.file_name.clone(),
            msg,
        })?;
        match schema {
            Schema::D => w.serialize(r)?,
            Schema::S => w.write_record([
                r.action_class.clone(),
                r.file_name.clone(),
                r.fps.to_string(),
                r.video_duration.to_string(),
            ])?,
            Schema::Im => w.write_record([&r.action_class, &r.file_name])?,
        }
    }
    w.into_inner().map_err(|e| DatasetError::Csv(csv::Error::from(e.into_error())))
}

/// Write the full-schema annotation CSV atomically.
pub fn write_annotations(records: &[ClipAnnotation], path: &Path) -> Result<(), DatasetError> {
    write_annotations_with(records, path, Schema::D)
}

pub fn write_annotations_with(records: &[ClipAnnotation], path: &Path, schema: Schema) -> Result<(), DatasetError> {
    let bytes = encode_annotations(records, schema)?;
    write_atomic(path, &bytes)?;
    Ok(())
}

fn header_index(headers: &csv::StringRecord, wanted: &[&str]) -> Result<HashMap<String, usize>, DatasetError> {
    let index: HashMap<String, usize> = headers.iter().enumerate().map(|(i, h)| (h.trim().to_owned(), i)).collect();
    let missing: Vec<String> = wanted.iter().filter(|w| !index.contains_key(**w)).map(|s| s.to_string()).collect();
    if missing.is_empty() {
        Ok(index)
    } else {
        Err(DatasetError::Schema { missing })
    }
}

/// Parse full-schema CSV text. All row problems are collected before failing.
pub fn decode_annotations(bytes: &[u8]) -> Result<Vec<ClipAnnotation>, DatasetError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(bytes);
    let headers = rdr.headers()?.clone();
    let index = header_index(&headers, &ANNOTATION_FIELDS)?;
    // Reorder every row into canonical column order before deserializing.
    let canonical = csv::StringRecord::from(ANNOTATION_FIELDS.to_vec());

    let mut records = Vec::new();
    let mut errors = Vec::new();
    for (n, row) in rdr.records().enumerate() {
        let line = n as u64 + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                errors.push(RowError { line, msg: e.to_string() });
                continue;
            }
        };
        let ordered: csv::StringRecord = ANNOTATION_FIELDS
            .iter()
            .map(|f| row.get(index[*f]).unwrap_or(""))
            .collect();
        match ordered.deserialize::<ClipAnnotation>(Some(&canonical)) {
            Ok(rec) => match rec.validate() {
                Ok(()) => records.push(rec),
                Err(msg) => errors.push(RowError { line, msg }),
            },
            Err(e) => errors.push(RowError { line, msg: e.to_string() }),
        }
    }
    if errors.is_empty() {
        Ok(records)
    } else {
        Err(DatasetError::Rows(errors))
    }
}

pub fn read_annotations(path: &Path) -> Result<Vec<ClipAnnotation>, DatasetError> {
    let bytes = std::fs::read(path).map_err(|source| DatasetError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    decode_annotations(&bytes)
}

/// Read a reduced-tier file (`S` or `Im`), or the class/file/fps/duration
/// columns of a full file.
pub fn read_simple_annotations(path: &Path, schema: Schema) -> Result<Vec<SimpleAnnotation>, DatasetError> {
    let bytes = std::fs::read(path).map_err(|source| DatasetError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rdr = csv::ReaderBuilder::new().from_reader(bytes.as_slice());
    let headers = rdr.headers()?.clone();
    let index = header_index(&headers, schema.columns())?;
    let mut out = Vec::new();
    let mut errors = Vec::new();
    for (n, row) in rdr.records().enumerate() {
        let line = n as u64 + 2;
        let row = row?;
        let get = |k: &str| index.get(k).and_then(|&i| row.get(i)).map(str::to_owned);
        let num = |k: &str| -> Result<Option<f64>, String> {
            match schema.columns().contains(&k) {
                true => get(k).unwrap_or_default().trim().parse().map(Some).map_err(|_| format!("{k} is not a number")),
                false => Ok(None),
            }
        };
        match (num("fps"), num("video_duration")) {
            (Ok(fps), Ok(video_duration)) => out.push(SimpleAnnotation {
                action_class: get("action_class").unwrap_or_default(),
                file_name: get("file_name").unwrap_or_default(),
                fps,
                video_duration,
            }),
            (Err(msg), _) | (_, Err(msg)) => errors.push(RowError { line, msg }),
        }
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(DatasetError::Rows(errors))
    }
}

/// One source clip in a manifest. Relative paths resolve against the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub clip_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_class: Option<String>,
    pub frames: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masks: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub clips: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut m: Manifest = serde_json::from_str(&text).map_err(|source| DatasetError::Manifest {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for c in &mut m.clips {
            c.frames = base.join(&c.frames);
            c.track = c.track.as_ref().map(|t| base.join(t));
            c.masks = c.masks.as_ref().map(|t| base.join(t));
        }
        Ok(m)
    }
}
