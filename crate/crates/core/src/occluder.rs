//! Occluder assets: RGBA cut-outs pasted over the actor.
//!
//! Assets live under a root directory as `<root>/<category>/<file>.png`.
//! Files directly under the root, or under a directory that is not a known
//! category, are tagged [`Category::Custom`].

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use image::RgbaImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::SplitMix64;

/// Quality-control floor on opaque pixels per asset.
pub const DEFAULT_MIN_OPAQUE_PIXELS: u64 = 30_000;

#[derive(Debug, Error)]
pub enum OccluderError {
    #[error("cannot decode {path}: {source}")]
    Decode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{path} has no alpha channel")]
    NoAlphaChannel { path: PathBuf },
    #[error("{path} has {opaque} opaque pixels, below the minimum of {min}")]
    TooSmall { path: PathBuf, opaque: u64, min: u64 },
    #[error("cannot read occluder directory {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no occluder matches the request")]
    EmptyCatalog,
    #[error("duplicate occluder id {0}")]
    DuplicateId(String),
    #[error("unknown occluder id {0}")]
    UnknownId(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Backpack,
    Handbag,
    Suitcase,
    Dog,
    Custom,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::Backpack,
        Category::Handbag,
        Category::Suitcase,
        Category::Dog,
        Category::Custom,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Backpack => "backpack",
            Category::Handbag => "handbag",
            Category::Suitcase => "suitcase",
            Category::Dog => "dog",
            Category::Custom => "custom",
        }
    }

    /// Map a directory name to a category. Singular and plural spellings are
    /// both accepted; anything else is `Custom`.
    pub fn from_dir_name(name: &str) -> Category {
        let lower = name.to_ascii_lowercase();
        let stem = lower.strip_suffix('s').unwrap_or(&lower);
        match stem {
            "backpack" => Category::Backpack,
            "handbag" => Category::Handbag,
            "suitcase" => Category::Suitcase,
            "dog" => Category::Dog,
            _ => Category::Custom,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Category {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown occluder category `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccluderAsset {
    /// Path relative to the catalog root with `/` separators, e.g. `dog/0001.png`.
    pub id: String,
    pub category: Category,
    pub pixels: RgbaImage,
    pub opaque_pixel_count: u64,
}

impl OccluderAsset {
    /// Build an asset from an in-memory raster, enforcing the opaque-pixel floor.
    pub fn from_rgba(
        id: impl Into<String>,
        category: Category,
        pixels: RgbaImage,
        min_opaque_pixels: u64,
    ) -> Result<Self, OccluderError> {
        let id = id.into();
        let opaque = count_opaque(&pixels);
        if opaque < min_opaque_pixels || opaque == 0 {
            return Err(OccluderError::TooSmall {
                path: PathBuf::from(&id),
                opaque,
                min: min_opaque_pixels,
            });
        }
        Ok(Self {
            id,
            category,
            pixels,
            opaque_pixel_count: opaque,
        })
    }

    pub fn width(&self) -> u32 {
        self.pixels.width()
    }

    pub fn height(&self) -> u32 {
        self.pixels.height()
    }

    /// File name component of the id.
    pub fn file_name(&self) -> &str {
        self.id.rsplit('/').next().unwrap_or(&self.id)
    }
}

pub fn count_opaque(img: &RgbaImage) -> u64 {
    img.pixels().filter(|p| p.0[3] > 0).count() as u64
}

/// Load one occluder. The category comes from the parent directory name.
pub fn load_occluder(path: &Path, min_opaque_pixels: u64) -> Result<OccluderAsset, OccluderError> {
    let category = path
        .parent()
        .and_then(|p| p.file_name())
        .and_then(|n| n.to_str())
        .map(Category::from_dir_name)
        .unwrap_or(Category::Custom);
    let id = match path.parent().and_then(|p| p.file_name()) {
        Some(dir) => format!(
            "{}/{}",
            dir.to_string_lossy(),
            path.file_name().unwrap_or_default().to_string_lossy()
        ),
        None => path.to_string_lossy().into_owned(),
    };
    load_with(path, id, category, min_opaque_pixels)
}

fn load_with(
    path: &Path,
    id: String,
    category: Category,
    min_opaque_pixels: u64,
) -> Result<OccluderAsset, OccluderError> {
    let decoded = image::open(path).map_err(|source| OccluderError::Decode {
        path: path.to_path_buf(),
        source,
    })?;
    if !decoded.color().has_alpha() {
        return Err(OccluderError::NoAlphaChannel {
            path: path.to_path_buf(),
        });
    }
    OccluderAsset::from_rgba(id, category, decoded.to_rgba8(), min_opaque_pixels).map_err(|e| match e {
        OccluderError::TooSmall { opaque, min, .. } => OccluderError::TooSmall {
            path: path.to_path_buf(),
            opaque,
            min,
        },
        other => other,
    })
}

/// An asset that failed quality control or decoding while loading a catalog.
#[derive(Debug)]
pub struct Rejected {
    pub path: PathBuf,
    pub error: OccluderError,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OccluderCatalog {
    assets: Vec<OccluderAsset>,
    category_index: BTreeMap<Category, Vec<usize>>,
}

impl OccluderCatalog {
    pub fn new(assets: Vec<OccluderAsset>) -> Result<Self, OccluderError> {
        let mut category_index: BTreeMap<Category, Vec<usize>> = BTreeMap::new();
        let mut seen = std::collections::HashSet::new();
        for (i, a) in assets.iter().enumerate() {
            if !seen.insert(a.id.as_str()) {
                return Err(OccluderError::DuplicateId(a.id.clone()));
            }
            category_index.entry(a.category).or_default().push(i);
        }
        Ok(Self {
            assets,
            category_index,
        })
    }

    /// Load every `.png` under `root` (one level of category directories plus
    /// files at the root). Assets are ordered by their relative path, so two
    /// loads of the same directory are identical. Files that fail decoding or
    /// quality control are returned separately instead of aborting the load.
    pub fn load_dir(root: &Path, min_opaque_pixels: u64) -> Result<(Self, Vec<Rejected>), OccluderError> {
        let mut files: Vec<(String, Category, PathBuf)> = Vec::new();
        for entry in read_dir_sorted(root)? {
            if entry.is_dir() {
                let dir_name = entry.file_name().unwrap_or_default().to_string_lossy().into_owned();
                let category = Category::from_dir_name(&dir_name);
                for file in read_dir_sorted(&entry)? {
                    if is_png(&file) {
                        let name = file.file_name().unwrap_or_default().to_string_lossy().into_owned();
                        files.push((format!("{dir_name}/{name}"), category, file));
                    }
                }
            } else if is_png(&entry) {
                let name = entry.file_name().unwrap_or_default().to_string_lossy().into_owned();
                files.push((name, Category::Custom, entry));
            }
        }
        files.sort_by(|a, b| a.0.cmp(&b.0));

        let mut assets = Vec::with_capacity(files.len());
        let mut rejected = Vec::new();
        for (id, category, path) in files {
            match load_with(&path, id, category, min_opaque_pixels) {
                Ok(a) => assets.push(a),
                Err(error) => {
                    log::warn!("rejecting occluder {}: {error}", path.display());
                    rejected.push(Rejected { path, error });
                }
            }
        }
        Ok((Self::new(assets)?, rejected))
    }

    pub fn assets(&self) -> &[OccluderAsset] {
        &self.assets
    }

    pub fn len(&self) -> usize {
        self.assets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assets.is_empty()
    }

    pub fn count(&self, category: Category) -> usize {
        self.category_index.get(&category).map_or(0, Vec::len)
    }

    pub fn get(&self, id: &str) -> Result<&OccluderAsset, OccluderError> {
        self.assets
            .iter()
            .find(|a| a.id == id)
            .ok_or_else(|| OccluderError::UnknownId(id.to_owned()))
    }

    /// Pick one asset uniformly among those passing `category_filter`.
    ///
    /// The choice is `eligible[SplitMix64(seed).below(eligible.len())]` where
    /// `eligible` keeps catalog order.
    pub fn sample(&self, seed: u64, category_filter: Option<Category>) -> Result<&OccluderAsset, OccluderError> {
        let picked = match category_filter {
            Some(c) => {
                let idx = self.category_index.get(&c).ok_or(OccluderError::EmptyCatalog)?;
                idx[pick(seed, idx.len())?]
            }
            None => pick(seed, self.assets.len())?,
        };
        Ok(&self.assets[picked])
    }
}

/// Free-function form of [`OccluderCatalog::sample`].
pub fn sample_occluder(
    catalog: &OccluderCatalog,
    seed: u64,
    category_filter: Option<Category>,
) -> Result<&OccluderAsset, OccluderError> {
    catalog.sample(seed, category_filter)
}

fn pick(seed: u64, n: usize) -> Result<usize, OccluderError> {
    if n == 0 {
        return Err(OccluderError::EmptyCatalog);
    }
    Ok(SplitMix64::new(seed).below(n as u64) as usize)
}

fn is_png(p: &Path) -> bool {
    p.is_file()
        && p.extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"))
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>, OccluderError> {
    let io = |source| OccluderError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io)? {
        out.push(entry.map_err(io)?.path());
    }
    out.sort();
    Ok(out)
}
