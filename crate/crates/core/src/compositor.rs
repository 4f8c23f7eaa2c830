//! Per-frame occluder scaling and alpha-over compositing.
//!
//! For every frame with an actor box, the clip's occluder is rescaled so that
//! it fits inside the box shrunk by the occlusion degree (aspect preserved,
//! binding side exactly at the degree), then pasted with its center on the box
//! center. Parts falling outside the frame are clipped.
//!
//! Color is resampled with a triangle (bilinear) filter; alpha is resampled
//! with nearest neighbor so "opaque" (alpha > 0) stays a crisp mask.

use image::imageops::{self, FilterType};
use image::{RgbImage, RgbaImage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;
use crate::metrics;
use crate::occluder::{OccluderCatalog, OccluderError};
use crate::track::{ActorTrack, BoundingBox};

pub type Frame = RgbImage;

/// Occlusion degrees used when generating a full dataset.
pub const DEFAULT_DEGREES: [f64; 3] = [0.25, 0.50, 0.75];

#[derive(Debug, Error)]
pub enum CompositeError {
    #[error("occlusion degree must be in (0, 1], got {0}")]
    InvalidDegree(f64),
    #[error("occluder scales to {width}x{height} for a {box_w}x{box_h} box")]
    DegenerateScale {
        width: u32,
        height: u32,
        box_w: f64,
        box_h: f64,
    },
    #[error("{frames} frames supplied for a track of {expected}")]
    FrameCountMismatch { frames: usize, expected: usize },
    #[error("frame {frame}: {source}")]
    AtFrame {
        frame: usize,
        #[source]
        source: Box<CompositeError>,
    },
    #[error(transparent)]
    Occluder(#[from] OccluderError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    #[default]
    BboxCenter,
}

/// Everything that determines one synthesis run of a clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcclusionSpec {
    pub degree: f64,
    pub occluder_id: String,
    pub seed: u64,
    #[serde(default)]
    pub anchor: Anchor,
}

impl OcclusionSpec {
    pub fn new(degree: f64, occluder_id: impl Into<String>, seed: u64) -> Result<Self, CompositeError> {
        check_degree(degree)?;
        Ok(Self {
            degree,
            occluder_id: occluder_id.into(),
            seed,
            anchor: Anchor::BboxCenter,
        })
    }

    /// Draw the occluder from `catalog` with `seed`, then fix it for the clip.
    pub fn sampled(catalog: &OccluderCatalog, degree: f64, seed: u64) -> Result<Self, CompositeError> {
        let asset = catalog.sample(seed, None)?;
        Self::new(degree, asset.id.clone(), seed)
    }
}

pub fn check_degree(degree: f64) -> Result<(), CompositeError> {
    if degree.is_finite() && degree > 0.0 && degree <= 1.0 {
        Ok(())
    } else {
        Err(CompositeError::InvalidDegree(degree))
    }
}

/// Integer pixel rectangle. `x`/`y` may be negative for unclipped rects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Rect {
    pub x: i64,
    pub y: i64,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub fn is_empty(&self) -> bool {
        self.w == 0 || self.h == 0
    }

    pub fn area(&self) -> u64 {
        u64::from(self.w) * u64::from(self.h)
    }

    /// Intersection with `[0, width) x [0, height)`.
    pub fn clip_to(&self, width: u32, height: u32) -> Rect {
        let x0 = self.x.max(0);
        let y0 = self.y.max(0);
        let x1 = (self.x + i64::from(self.w)).min(i64::from(width));
        let y1 = (self.y + i64::from(self.h)).min(i64::from(height));
        if x1 <= x0 || y1 <= y0 {
            return Rect { x: x0.min(i64::from(width)), y: y0.min(i64::from(height)), w: 0, h: 0 };
        }
        Rect {
            x: x0,
            y: y0,
            w: (x1 - x0) as u32,
            h: (y1 - y0) as u32,
        }
    }
}

/// Where the occluder landed in one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub frame_index: usize,
    /// Occluder rect before clipping to the frame.
    pub target_rect: Rect,
    /// Occluder rect after clipping; always inside the frame.
    pub dest_rect: Rect,
    pub scale_factor: f64,
    pub visible_opaque_pixels: u64,
    /// Opaque occluder pixels that land inside the actor box (and the frame).
    /// Zero when the placement was made without an actor box.
    #[serde(default)]
    pub actor_overlap_pixels: u64,
    /// Pixel area of the actor box clipped to the frame.
    #[serde(default)]
    pub actor_box_pixels: u64,
    pub frame_width: u32,
    pub frame_height: u32,
}

impl Placement {
    pub fn is_fully_clipped(&self) -> bool {
        self.dest_rect.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaledOccluder {
    pub pixels: RgbaImage,
    pub scale_factor: f64,
}

impl ScaledOccluder {
    pub fn width(&self) -> u32 {
        self.pixels.width()
    }

    pub fn height(&self) -> u32 {
        self.pixels.height()
    }
}

fn round_half_up(v: f64) -> f64 {
    (v + 0.5).floor()
}

/// Target size for an `asset_w x asset_h` occluder over `bbox` at `degree`:
/// `s = degree * min(bbox.w / asset_w, bbox.h / asset_h)`, each side rounded
/// half-up. Returns `(s, width, height)`.
pub fn target_size(asset_w: u32, asset_h: u32, bbox: &BoundingBox, degree: f64) -> Result<(f64, u32, u32), CompositeError> {
    check_degree(degree)?;
    let s = degree * (bbox.w / f64::from(asset_w)).min(bbox.h / f64::from(asset_h));
    let w = round_half_up(s * f64::from(asset_w));
    let h = round_half_up(s * f64::from(asset_h));
    if w < 1.0 || h < 1.0 || !w.is_finite() || !h.is_finite() {
        return Err(CompositeError::DegenerateScale {
            width: w.max(0.0) as u32,
            height: h.max(0.0) as u32,
            box_w: bbox.w,
            box_h: bbox.h,
        });
    }
    Ok((s, w as u32, h as u32))
}

/// Rescale `asset` for `bbox` at `degree`.
pub fn scale_occluder(asset: &RgbaImage, bbox: &BoundingBox, degree: f64) -> Result<ScaledOccluder, CompositeError> {
    let (scale_factor, w, h) = target_size(asset.width(), asset.height(), bbox, degree)?;
    if (w, h) == asset.dimensions() {
        return Ok(ScaledOccluder {
            pixels: asset.clone(),
            scale_factor,
        });
    }
    let mut color = imageops::resize(asset, w, h, FilterType::Triangle);
    let alpha = imageops::resize(asset, w, h, FilterType::Nearest);
    for (c, a) in color.pixels_mut().zip(alpha.pixels()) {
        c.0[3] = a.0[3];
    }
    Ok(ScaledOccluder {
        pixels: color,
        scale_factor,
    })
}

/// Top-left corner that centers a `w x h` raster on `center`.
pub fn anchored_rect(w: u32, h: u32, center: (f64, f64)) -> Rect {
    Rect {
        x: round_half_up(center.0 - f64::from(w) / 2.0) as i64,
        y: round_half_up(center.1 - f64::from(h) / 2.0) as i64,
        w,
        h,
    }
}

#[inline]
fn blend(occ: u8, src: u8, alpha: u8) -> u8 {
    let a = u32::from(alpha);
    ((a * u32::from(occ) + (255 - a) * u32::from(src) + 127) / 255) as u8
}

/// Alpha-over `occluder` onto `frame` in place, centered at `center`.
///
/// Per channel `out = round((a * occ + (255 - a) * src) / 255)`; pixels with
/// `a == 0` are left untouched. A placement that misses the frame entirely
/// comes back with an empty `dest_rect` and zero visible pixels.
pub fn composite_into(frame: &mut Frame, occluder: &ScaledOccluder, center: (f64, f64), frame_index: usize) -> Placement {
    let (fw, fh) = frame.dimensions();
    let target = anchored_rect(occluder.width(), occluder.height(), center);
    let dest = target.clip_to(fw, fh);
    let mut visible = 0u64;
    if !dest.is_empty() {
        let ox = (dest.x - target.x) as u32;
        let oy = (dest.y - target.y) as u32;
        for dy in 0..dest.h {
            for dx in 0..dest.w {
                let o = occluder.pixels.get_pixel(ox + dx, oy + dy).0;
                if o[3] == 0 {
                    continue;
                }
                visible += 1;
                let p = frame.get_pixel_mut(dest.x as u32 + dx, dest.y as u32 + dy);
                for c in 0..3 {
                    p.0[c] = blend(o[c], p.0[c], o[3]);
                }
            }
        }
    }
    Placement {
        frame_index,
        target_rect: target,
        dest_rect: dest,
        scale_factor: occluder.scale_factor,
        visible_opaque_pixels: visible,
        actor_overlap_pixels: 0,
        actor_box_pixels: 0,
        frame_width: fw,
        frame_height: fh,
    }
}

/// Copying form of [`composite_into`].
pub fn composite_frame(frame: &Frame, occluder: &ScaledOccluder, center: (f64, f64)) -> (Frame, Placement) {
    let mut out = frame.clone();
    let placement = composite_into(&mut out, occluder, center, 0);
    (out, placement)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesizedClip {
    pub frames: Vec<Frame>,
    /// One entry per frame that had an actor box, in frame order.
    pub placements: Vec<Placement>,
}

/// Occlude every boxed frame of a clip with the occluder named by `spec`.
///
/// Frames without a box pass through unchanged. The track should already be
/// gap-filled if interpolation is wanted.
pub fn synthesize_clip(
    frames: &[Frame],
    track: &ActorTrack,
    spec: &OcclusionSpec,
    catalog: &OccluderCatalog,
    exec: Exec,
) -> Result<SynthesizedClip, CompositeError> {
    check_degree(spec.degree)?;
    if frames.len() != track.frame_count || track.boxes.len() != track.frame_count {
        return Err(CompositeError::FrameCountMismatch {
            frames: frames.len(),
            expected: track.frame_count,
        });
    }
    let asset = catalog.get(&spec.occluder_id)?;

    let results = exec.map_indexed(frames, |i, frame| -> Result<(Frame, Option<Placement>), CompositeError> {
        let Some(bbox) = track.boxes[i] else {
            return Ok((frame.clone(), None));
        };
        let at = |source| CompositeError::AtFrame {
            frame: i,
            source: Box::new(source),
        };
        let scaled = scale_occluder(&asset.pixels, &bbox, spec.degree).map_err(at)?;
        let mut out = frame.clone();
        let mut placement = composite_into(&mut out, &scaled, bbox.center(), i);
        let (overlap, area) = metrics::area_counts(&bbox, &placement, &scaled.pixels);
        placement.actor_overlap_pixels = overlap;
        placement.actor_box_pixels = area;
        Ok((out, Some(placement)))
    });

    let mut out_frames = Vec::with_capacity(frames.len());
    let mut placements = Vec::new();
    for r in results {
        let (f, p) = r?;
        out_frames.push(f);
        placements.extend(p);
    }
    Ok(SynthesizedClip {
        frames: out_frames,
        placements,
    })
}
