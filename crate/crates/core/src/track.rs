//! Per-frame actor bounding boxes from an external detector.
//!
//! Text format (UTF-8):
//!
//! ```text
//! clip_a,30,5          # clip_id,fps,frame_count
//! 0,10,20,40,80        # frame_index,x,y,w,h
//! 4,12,20,40,80
//! ```
//!
//! Lines that spell out the column names (`clip_id,fps,frame_count` or
//! `frame_index,x,y,w,h`), blank lines and `#` comments are ignored. The
//! JSON form carries the same names:
//! `{"clip_id": .., "fps": .., "frame_count": .., "detections": [{"frame_index": .., "x": .., ...}]}`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Longest gap (in frames) bridged by default, about half a second at 30 fps.
pub const DEFAULT_MAX_GAP: usize = 15;

#[derive(Debug, Error)]
pub enum TrackError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("track {0} has no detections")]
    EmptyTrack(String),
    #[error("bad or missing header: {0}")]
    InconsistentHeader(String),
    #[error("invalid JSON track: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Axis-aligned box in frame pixels, origin top-left. May extend past the
/// frame; consumers clip.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, String> {
        if ![x, y, w, h].iter().all(|v| v.is_finite()) {
            return Err("box coordinates must be finite".into());
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(format!("box size must be positive, got w={w} h={h}"));
        }
        Ok(Self { x, y, w, h })
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    /// Pixels whose centers fall inside the box, as a half-open integer rect
    /// `(x0, y0, x1, y1)`. Pixel `i` spans `[i, i + 1)`.
    pub fn pixel_span(&self) -> (i64, i64, i64, i64) {
        let lo = |v: f64| (v - 0.5).ceil() as i64;
        (lo(self.x), lo(self.y), lo(self.x + self.w), lo(self.y + self.h))
    }

    fn lerp(a: &Self, b: &Self, t: f64) -> Self {
        let l = |p: f64, q: f64| p + (q - p) * t;
        Self {
            x: l(a.x, b.x),
            y: l(a.y, b.y),
            w: l(a.w, b.w),
            h: l(a.h, b.h),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorTrack {
    pub clip_id: String,
    pub fps: f64,
    pub frame_count: usize,
    pub boxes: Vec<Option<BoundingBox>>,
}

impl ActorTrack {
    pub fn present_frames(&self) -> usize {
        self.boxes.iter().filter(|b| b.is_some()).count()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.frame_count as f64 / self.fps
    }

    /// Render in the text format accepted by [`parse_track`].
    pub fn to_text(&self) -> String {
        let mut s = format!("{},{},{}\n", self.clip_id, self.fps, self.frame_count);
        for (i, b) in self.boxes.iter().enumerate() {
            if let Some(b) = b {
                let _ = writeln!(s, "{i},{},{},{},{}", b.x, b.y, b.w, b.h);
            }
        }
        s
    }
}

#[derive(Deserialize)]
struct JsonTrack {
    clip_id: String,
    fps: f64,
    frame_count: usize,
    #[serde(default)]
    detections: Vec<JsonDetection>,
}

#[derive(Deserialize)]
struct JsonDetection {
    frame_index: usize,
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

/// Read a track file, choosing JSON or text by content.
pub fn parse_track(path: &Path) -> Result<ActorTrack, TrackError> {
    let text = std::fs::read_to_string(path)?;
    parse_track_str(&text)
}

pub fn parse_track_str(text: &str) -> Result<ActorTrack, TrackError> {
    if text.trim_start().starts_with('{') {
        return parse_json(text);
    }
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .filter(|(_, l)| !is_column_names(l));

    let (_, header) = lines
        .next()
        .ok_or_else(|| TrackError::InconsistentHeader("file is empty".into()))?;
    let (clip_id, fps, frame_count) = parse_header(header)?;
    let mut boxes = vec![None; frame_count];

    for (line, l) in lines {
        let err = |msg: String| TrackError::Parse { line, msg };
        let fields: Vec<&str> = l.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(err(format!("expected 5 fields, found {}", fields.len())));
        }
        let frame: usize = fields[0]
            .parse()
            .map_err(|_| err(format!("bad frame index `{}`", fields[0])))?;
        let mut v = [0.0f64; 4];
        for (slot, raw) in v.iter_mut().zip(&fields[1..]) {
            *slot = raw.parse().map_err(|_| err(format!("bad number `{raw}`")))?;
        }
        let b = BoundingBox::new(v[0], v[1], v[2], v[3]).map_err(err)?;
        place(&mut boxes, frame, b).map_err(err)?;
    }
    finish(clip_id, fps, frame_count, boxes)
}

fn is_column_names(line: &str) -> bool {
    let compact: String = line.chars().filter(|c| !c.is_whitespace()).collect();
    compact == "clip_id,fps,frame_count" || compact == "frame_index,x,y,w,h"
}

fn parse_header(line: &str) -> Result<(String, f64, usize), TrackError> {
    let bad = |m: &str| TrackError::InconsistentHeader(format!("{m} in `{line}`"));
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 3 {
        return Err(bad("expected clip_id,fps,frame_count"));
    }
    let fps: f64 = fields[1].parse().map_err(|_| bad("fps is not a number"))?;
    let frame_count: usize = fields[2].parse().map_err(|_| bad("frame_count is not an integer"))?;
    validate_header(fields[0], fps, frame_count)?;
    Ok((fields[0].to_owned(), fps, frame_count))
}

fn validate_header(clip_id: &str, fps: f64, frame_count: usize) -> Result<(), TrackError> {
    if clip_id.is_empty() {
        return Err(TrackError::InconsistentHeader("empty clip_id".into()));
    }
    if !(fps.is_finite() && fps > 0.0) {
        return Err(TrackError::InconsistentHeader(format!("fps must be positive, got {fps}")));
    }
    if frame_count == 0 {
        return Err(TrackError::InconsistentHeader("frame_count must be at least 1".into()));
    }
    Ok(())
}

fn place(boxes: &mut [Option<BoundingBox>], frame: usize, b: BoundingBox) -> Result<(), String> {
    let n = boxes.len();
    let slot = boxes
        .get_mut(frame)
        .ok_or_else(|| format!("frame {frame} outside 0..{n}"))?;
    if slot.is_some() {
        return Err(format!("duplicate detection for frame {frame}"));
    }
    *slot = Some(b);
    Ok(())
}

fn finish(
    clip_id: String,
    fps: f64,
    frame_count: usize,
    boxes: Vec<Option<BoundingBox>>,
) -> Result<ActorTrack, TrackError> {
    if boxes.iter().all(Option::is_none) {
        return Err(TrackError::EmptyTrack(clip_id));
    }
    Ok(ActorTrack {
        clip_id,
        fps,
        frame_count,
        boxes,
    })
}

fn parse_json(text: &str) -> Result<ActorTrack, TrackError> {
    let raw: JsonTrack = serde_json::from_str(text)?;
    validate_header(&raw.clip_id, raw.fps, raw.frame_count)?;
    let mut boxes = vec![None; raw.frame_count];
    for (i, d) in raw.detections.iter().enumerate() {
        let err = |msg: String| TrackError::Parse { line: i + 1, msg };
        let b = BoundingBox::new(d.x, d.y, d.w, d.h).map_err(err)?;
        place(&mut boxes, d.frame_index, b).map_err(err)?;
    }
    finish(raw.clip_id, raw.fps, raw.frame_count, boxes)
}

/// Fill interior gaps of at most `max_gap` frames by linear interpolation of
/// `(x, y, w, h)` between the flanking detections. Leading and trailing gaps,
/// and gaps longer than `max_gap`, are left empty.
pub fn interpolate_track(track: &ActorTrack, max_gap: usize) -> ActorTrack {
    let mut out = track.clone();
    let mut prev: Option<usize> = None;
    for i in 0..track.boxes.len() {
        let Some(cur) = track.boxes[i] else { continue };
        if let Some(p) = prev {
            let gap = i - p - 1;
            if gap > 0 && gap <= max_gap {
                let start = track.boxes[p].expect("prev index always holds a box");
                for k in 1..=gap {
                    let t = k as f64 / (gap + 1) as f64;
                    out.boxes[p + k] = Some(BoundingBox::lerp(&start, &cur, t));
                }
            }
        }
        prev = Some(i);
    }
    out
}
