//! Actor erasure under externally supplied segmentation masks.
//!
//! Masked pixels are overwritten according to a [`FillPolicy`]; unmasked
//! pixels are never touched. Masks are produced elsewhere (any video
//! segmenter) and read here as numbered single-channel images.

use std::path::Path;
use std::str::FromStr;

use image::Rgb;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compositor::Frame;
use crate::exec::Exec;
use crate::frames::{numbered_images, FrameIoError};

/// Grayscale values at or above this are actor pixels.
pub const MASK_THRESHOLD: u8 = 128;

#[derive(Debug, Error)]
pub enum CounterfactualError {
    #[error("frame {frame}: mask is {mask_w}x{mask_h}, frame is {frame_w}x{frame_h}")]
    DimensionMismatch {
        frame: usize,
        mask_w: u32,
        mask_h: u32,
        frame_w: u32,
        frame_h: u32,
    },
    #[error("{masks} masks for {frames} frames")]
    FrameCountMismatch { masks: usize, frames: usize },
    #[error(transparent)]
    Io(#[from] FrameIoError),
    #[error("bad fill policy `{0}` (expected constant:R,G,B, frame_mean or horizontal_inpaint)")]
    BadPolicy(String),
}

/// Binary actor mask, row-major, `true` = actor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32, bits: Vec<bool>) -> Option<Self> {
        (bits.len() == width as usize * height as usize).then_some(Self { width, height, bits })
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> bool) -> Self {
        let bits = (0..height).flat_map(|y| (0..width).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
        Self { width, height, bits }
    }

    pub fn from_gray(img: &image::GrayImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            bits: img.pixels().map(|p| p.0[0] >= MASK_THRESHOLD).collect(),
        }
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[(y * self.width + x) as usize]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskSequence {
    pub clip_id: String,
    /// Indexed by frame; `None` where no mask exists.
    pub masks: Vec<Option<BinaryMask>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillMode {
    Constant,
    FrameMean,
    HorizontalInpaint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FillPolicy {
    pub mode: FillMode,
    /// Used by `Constant`, and as the last resort when a frame has no
    /// unmasked pixels to draw from.
    pub constant_value: [u8; 3],
}

impl Default for FillPolicy {
    fn default() -> Self {
        Self {
            mode: FillMode::Constant,
            constant_value: [114, 114, 114],
        }
    }
}

impl FromStr for FillPolicy {
    type Err = CounterfactualError;

    /// `constant`, `constant:R,G,B`, `frame_mean` or `horizontal_inpaint`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CounterfactualError::BadPolicy(s.to_owned());
        let (mode, arg) = s.split_once(':').map_or((s, None), |(m, a)| (m, Some(a)));
        let mut policy = FillPolicy {
            mode: match mode.trim() {
                "constant" => FillMode::Constant,
                "frame_mean" => FillMode::FrameMean,
                "horizontal_inpaint" => FillMode::HorizontalInpaint,
                _ => return Err(bad()),
            },
            ..FillPolicy::default()
        };
        if let Some(arg) = arg {
            let vals: Vec<u8> = arg
                .split(',')
                .map(|v| v.trim().parse::<u8>())
                .collect::<Result<_, _>>()
                .map_err(|_| bad())?;
            policy.constant_value = vals.try_into().map_err(|_| bad())?;
        }
        Ok(policy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErasedClip {
    pub frames: Vec<Frame>,
    /// Frames that had no mask and were passed through unchanged.
    pub missing_masks: Vec<usize>,
}

/// Replace masked pixels of every frame according to `policy`.
pub fn erase_actor(
    frames: &[Frame],
    masks: &MaskSequence,
    policy: &FillPolicy,
    exec: Exec,
) -> Result<ErasedClip, CounterfactualError> {
    if masks.masks.len() > frames.len() {
        return Err(CounterfactualError::FrameCountMismatch {
            masks: masks.masks.len(),
            frames: frames.len(),
        });
    }
    for (i, (f, m)) in frames.iter().zip(&masks.masks).enumerate() {
        if let Some(m) = m {
            if m.dimensions() != f.dimensions() {
                return Err(CounterfactualError::DimensionMismatch {
                    frame: i,
                    mask_w: m.width,
                    mask_h: m.height,
                    frame_w: f.width(),
                    frame_h: f.height(),
                });
            }
        }
    }
    let out = exec.map_indexed(frames, |i, f| match masks.masks.get(i).and_then(Option::as_ref) {
        Some(m) => (erase_frame(f, m, policy), false),
        None => (f.clone(), true),
    });
    let missing_masks = out.iter().enumerate().filter(|(_, (_, miss))| *miss).map(|(i, _)| i).collect();
    if out.iter().any(|(_, miss)| *miss) {
        log::warn!("clip {}: {} frames without masks passed through", masks.clip_id, out.iter().filter(|o| o.1).count());
    }
    Ok(ErasedClip {
        frames: out.into_iter().map(|(f, _)| f).collect(),
        missing_masks,
    })
}

/// Erase one frame. `mask` must match the frame size.
pub fn erase_frame(frame: &Frame, mask: &BinaryMask, policy: &FillPolicy) -> Frame {
    let mut out = frame.clone();
    match policy.mode {
        FillMode::Constant => {
            let c = Rgb(policy.constant_value);
            fill_masked(&mut out, mask, |_, _| c);
        }
        FillMode::FrameMean => {
            let c = unmasked_mean(frame, mask).unwrap_or(Rgb(policy.constant_value));
            fill_masked(&mut out, mask, |_, _| c);
        }
        FillMode::HorizontalInpaint => inpaint_rows(&mut out, frame, mask, policy),
    }
    out
}

fn fill_masked(out: &mut Frame, mask: &BinaryMask, color: impl Fn(u32, u32) -> Rgb<u8>) {
    for (x, y, p) in out.enumerate_pixels_mut() {
        if mask.get(x, y) {
            *p = color(x, y);
        }
    }
}

/// Per-channel mean of unmasked pixels, rounded half-up.
pub fn unmasked_mean(frame: &Frame, mask: &BinaryMask) -> Option<Rgb<u8>> {
    let mut sum = [0u64; 3];
    let mut n = 0u64;
    for (x, y, p) in frame.enumerate_pixels() {
        if !mask.get(x, y) {
            for (acc, v) in sum.iter_mut().zip(p.0) {
                *acc += u64::from(v);
            }
            n += 1;
        }
    }
    (n > 0).then(|| Rgb(sum.map(|s| ((2 * s + n) / (2 * n)) as u8)))
}

/// Fill each masked run in a row by linear interpolation between the nearest
/// unmasked pixels on its left and right. A run touching one edge copies the
/// other side; a fully masked row takes the frame mean.
fn inpaint_rows(out: &mut Frame, src: &Frame, mask: &BinaryMask, policy: &FillPolicy) {
    let fallback = unmasked_mean(src, mask).unwrap_or(Rgb(policy.constant_value));
    let w = src.width();
    for y in 0..src.height() {
        let mut x = 0;
        while x < w {
            if !mask.get(x, y) {
                x += 1;
                continue;
            }
            let start = x;
            while x < w && mask.get(x, y) {
                x += 1;
            }
            let left = start.checked_sub(1).map(|lx| *src.get_pixel(lx, y));
            let right = (x < w).then(|| *src.get_pixel(x, y));
            let span = f64::from(x - start + 1);
            for (k, px) in (start..x).enumerate() {
                let v = match (left, right) {
                    (Some(l), Some(r)) => {
                        let t = (k + 1) as f64 / span;
                        Rgb([0, 1, 2].map(|c| {
                            (f64::from(l.0[c]) + (f64::from(r.0[c]) - f64::from(l.0[c])) * t).round() as u8
                        }))
                    }
                    (Some(only), None) | (None, Some(only)) => only,
                    (None, None) => fallback,
                };
                out.put_pixel(px, y, v);
            }
        }
    }
}

/// Read numbered mask images from `dir` and binarize them.
///
/// Masks are numbered `0..frame_count`; absent numbers become `None` and
/// those frames pass through erasure untouched.
pub fn load_masks(dir: &Path, frame_count: usize) -> Result<MaskSequence, CounterfactualError> {
    let files = numbered_images(dir)?;
    if files.is_empty() || files.iter().any(|(i, _)| *i >= frame_count) {
        return Err(CounterfactualError::FrameCountMismatch {
            masks: files.len(),
            frames: frame_count,
        });
    }
    let mut masks = vec![None; frame_count];
    for (i, path) in files {
        let img = image::open(&path).map_err(|source| FrameIoError::Decode { path: path.clone(), source })?;
        masks[i] = Some(BinaryMask::from_gray(&img.to_luma8()));
    }
    Ok(MaskSequence {
        clip_id: dir.file_name().unwrap_or_default().to_string_lossy().into_owned(),
        masks,
    })
}
