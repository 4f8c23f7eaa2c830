//! Occlusion factors: degree, area ratio and duration ratio.
//!
//! "Opaque" always means alpha > 0 in the resampled occluder, the same mask the
//! compositor counts in `visible_opaque_pixels`.

use image::RgbaImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compositor::Placement;
use crate::track::{ActorTrack, BoundingBox};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("actor box has no pixels inside the frame")]
    EmptyBox,
    #[error("{placements} placements for a {frames}-frame track")]
    TooManyPlacements { placements: usize, frames: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcclusionMetrics {
    pub clip_id: String,
    /// Degree requested for synthesis.
    pub degree: f64,
    /// Mean of the per-frame measured degree, `None` without placements.
    pub measured_degree: Option<f64>,
    /// Per frame of the clip; `None` where there is no actor box in frame.
    pub area_ratio_per_frame: Vec<Option<f64>>,
    pub mean_area_ratio: f64,
    pub duration_ratio: f64,
    pub occlusion_duration_seconds: f64,
    pub video_duration_seconds: f64,
}

/// Box pixels clipped to the frame, as a half-open rect.
fn box_in_frame(bbox: &BoundingBox, width: u32, height: u32) -> (i64, i64, i64, i64) {
    let (x0, y0, x1, y1) = bbox.pixel_span();
    (
        x0.max(0),
        y0.max(0),
        x1.min(i64::from(width)),
        y1.min(i64::from(height)),
    )
}

/// `(opaque occluder pixels inside box ∩ frame, pixel area of box ∩ frame)`.
pub fn area_counts(bbox: &BoundingBox, placement: &Placement, occluder: &RgbaImage) -> (u64, u64) {
    let (bx0, by0, bx1, by1) = box_in_frame(bbox, placement.frame_width, placement.frame_height);
    if bx1 <= bx0 || by1 <= by0 {
        return (0, 0);
    }
    let area = ((bx1 - bx0) * (by1 - by0)) as u64;

    let d = placement.dest_rect;
    let t = placement.target_rect;
    let x0 = bx0.max(d.x);
    let y0 = by0.max(d.y);
    let x1 = bx1.min(d.x + i64::from(d.w));
    let y1 = by1.min(d.y + i64::from(d.h));
    let mut overlap = 0u64;
    for fy in y0..y1 {
        for fx in x0..x1 {
            if occluder.get_pixel((fx - t.x) as u32, (fy - t.y) as u32).0[3] > 0 {
                overlap += 1;
            }
        }
    }
    (overlap, area)
}

/// Fraction of the actor box (clipped to the frame) covered by opaque
/// occluder pixels.
pub fn occlusion_area_ratio(bbox: &BoundingBox, placement: &Placement, occluder: &RgbaImage) -> Result<f64, MetricsError> {
    match area_counts(bbox, placement, occluder) {
        (_, 0) => Err(MetricsError::EmptyBox),
        (overlap, area) => Ok(overlap as f64 / area as f64),
    }
}

/// Fraction of all clip frames in which visible occluder pixels overlap the
/// actor box.
pub fn occlusion_duration_ratio(track: &ActorTrack, placements: &[Placement]) -> Result<f64, MetricsError> {
    if placements.len() > track.frame_count {
        return Err(MetricsError::TooManyPlacements {
            placements: placements.len(),
            frames: track.frame_count,
        });
    }
    let occluded = placements
        .iter()
        .filter(|p| p.visible_opaque_pixels > 0 && p.actor_overlap_pixels > 0)
        .count();
    Ok(occluded as f64 / track.frame_count as f64)
}

/// `max(target.w / bbox.w, target.h / bbox.h)` from the pre-clip occluder size.
pub fn measured_occlusion_degree(bbox: &BoundingBox, placement: &Placement) -> Result<f64, MetricsError> {
    let t = placement.target_rect;
    if t.is_empty() {
        return Err(MetricsError::EmptyBox);
    }
    Ok((f64::from(t.w) / bbox.w).max(f64::from(t.h) / bbox.h))
}

/// Roll placements made by the synthesizer (which records per-frame overlap
/// counts) up into clip metrics.
pub fn clip_metrics(track: &ActorTrack, placements: &[Placement], degree: f64) -> Result<OcclusionMetrics, MetricsError> {
    let duration_ratio = occlusion_duration_ratio(track, placements)?;
    let mut per_frame = vec![None; track.frame_count];
    let mut measured = Vec::with_capacity(placements.len());
    for p in placements {
        if let (Some(slot), Some(Some(bbox))) = (per_frame.get_mut(p.frame_index), track.boxes.get(p.frame_index)) {
            if p.actor_box_pixels > 0 {
                *slot = Some(p.actor_overlap_pixels as f64 / p.actor_box_pixels as f64);
            }
            if let Ok(m) = measured_occlusion_degree(bbox, p) {
                measured.push(m);
            }
        }
    }
    let present: Vec<f64> = per_frame.iter().flatten().copied().collect();
    let mean_area_ratio = mean(&present).unwrap_or(0.0);
    let video_duration_seconds = track.duration_seconds();
    Ok(OcclusionMetrics {
        clip_id: track.clip_id.clone(),
        degree,
        measured_degree: mean(&measured),
        area_ratio_per_frame: per_frame,
        mean_area_ratio,
        duration_ratio,
        occlusion_duration_seconds: duration_ratio * video_duration_seconds,
        video_duration_seconds,
    })
}

fn mean(v: &[f64]) -> Option<f64> {
    if v.is_empty() {
        None
    } else {
        Some(v.iter().sum::<f64>() / v.len() as f64)
    }
}
