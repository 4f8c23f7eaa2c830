//! Numbered frame directories (`000000.png`, `000001.jpg`, ...) with an
//! optional `clip.json` sidecar, plus atomic file output.

use std::io::Write;
use std::path::{Path, PathBuf};

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const CLIP_SIDECAR: &str = "clip.json";

#[derive(Debug, Error)]
pub enum FrameIoError {
    #[error("cannot decode {path}: {source}")]
    Decode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("cannot encode {path}: {source}")]
    Encode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{dir}: frame numbering is not contiguous from 0 (missing {missing})")]
    Gap { dir: PathBuf, missing: usize },
    #[error("{dir}: no frames")]
    Empty { dir: PathBuf },
    #[error("{path}: {source}")]
    Sidecar {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> FrameIoError + '_ {
    move |source| FrameIoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Sidecar metadata for a frame directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipInfo {
    pub fps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_class: Option<String>,
}

pub fn read_clip_info(dir: &Path) -> Result<ClipInfo, FrameIoError> {
    let path = dir.join(CLIP_SIDECAR);
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|source| FrameIoError::Sidecar { path, source })
}

const IMAGE_EXTS: [&str; 3] = ["png", "jpg", "jpeg"];

/// Image files in `dir` whose stem is a frame number, sorted by number.
pub fn numbered_images(dir: &Path) -> Result<Vec<(usize, PathBuf)>, FrameIoError> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        let ext_ok = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| IMAGE_EXTS.iter().any(|x| x.eq_ignore_ascii_case(e)));
        let index = path
            .file_stem()
            .and_then(|s| s.to_str())
            .filter(|s| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|s| s.parse::<usize>().ok());
        if let (true, Some(i)) = (ext_ok, index) {
            out.push((i, path));
        }
    }
    out.sort();
    Ok(out)
}

/// Load all frames of a directory as RGB. Numbering must run `0..n`.
pub fn load_frames(dir: &Path) -> Result<Vec<RgbImage>, FrameIoError> {
    let files = numbered_images(dir)?;
    if files.is_empty() {
        return Err(FrameIoError::Empty { dir: dir.to_path_buf() });
    }
    let mut frames = Vec::with_capacity(files.len());
    for (expect, (i, path)) in files.into_iter().enumerate() {
        if i != expect {
            return Err(FrameIoError::Gap {
                dir: dir.to_path_buf(),
                missing: expect,
            });
        }
        let img = image::open(&path).map_err(|source| FrameIoError::Decode { path: path.clone(), source })?;
        frames.push(img.to_rgb8());
    }
    Ok(frames)
}

pub fn frame_file_name(index: usize) -> String {
    format!("{index:06}.png")
}

/// Write frames as `%06d.png` into an existing directory.
pub fn write_frames(dir: &Path, frames: &[RgbImage]) -> Result<(), FrameIoError> {
    for (i, f) in frames.iter().enumerate() {
        let path = dir.join(frame_file_name(i));
        f.save_with_format(&path, image::ImageFormat::Png)
            .map_err(|source| FrameIoError::Encode { path, source })?;
    }
    Ok(())
}

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), FrameIoError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| FrameIoError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<(), FrameIoError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| FrameIoError::Sidecar {
        path: path.to_path_buf(),
        source,
    })?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Build a directory under a temporary name next to `dest` with `fill`, then
/// move it into place, replacing any previous `dest`.
pub fn write_dir_atomic<E: From<FrameIoError>>(
    dest: &Path,
    fill: impl FnOnce(&Path) -> Result<(), E>,
) -> Result<(), E> {
    let parent = dest.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(parent).map_err(io_err(parent))?;
    let tmp = tempfile::Builder::new()
        .prefix(".partial-")
        .tempdir_in(parent)
        .map_err(io_err(parent))?;
    fill(tmp.path())?;
    if dest.exists() {
        std::fs::remove_dir_all(dest).map_err(io_err(dest))?;
    }
    let staged = tmp.keep();
    std::fs::rename(&staged, dest).map_err(io_err(dest))?;
    Ok(())
}
