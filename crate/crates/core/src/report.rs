//! Robustness tables from model prediction dumps: top-k accuracy, accuracy
//! drop binned by an occlusion factor, and per-parent-class accuracy.
//!
//! Records rank labels by descending score. Equal scores are ordered by label
//! text (lexicographic), so rankings never depend on input order.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;

const BUNDLED_PARENT_MAP: &str = include_str!("../data/kinetics400_parents.csv");

#[derive(Debug, Error, PartialEq)]
pub enum ReportError {
    #[error("no prediction records")]
    EmptyInput,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("clip {clip_id}: true label `{label}` is not among the predicted labels")]
    UnknownLabel { clip_id: String, label: String },
    #[error("clip {0}: record needs exactly one of `scores` or `ranking`")]
    MalformedRecord(String),
    #[error("clip {0}: non-finite score")]
    NonFiniteScore(String),
    #[error("clip ids do not line up across inputs: {0:?}")]
    MisalignedClips(Vec<String>),
    #[error("bin edges must be at least two strictly increasing finite values")]
    BadBins,
    #[error("labels without a parent class: {0:?}")]
    UnmappedLabel(Vec<String>),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{0}")]
    Io(String),
}

/// One clip's model output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub clip_id: String,
    pub true_label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<BTreeMap<String, f64>>,
    /// Labels best-first, as an alternative to `scores`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranking: Option<Vec<String>>,
}

impl PredictionRecord {
    pub fn with_scores(clip_id: impl Into<String>, true_label: impl Into<String>, scores: BTreeMap<String, f64>) -> Self {
        Self {
            clip_id: clip_id.into(),
            true_label: true_label.into(),
            scores: Some(scores),
            ranking: None,
        }
    }

    pub fn with_ranking(clip_id: impl Into<String>, true_label: impl Into<String>, ranking: Vec<String>) -> Self {
        Self {
            clip_id: clip_id.into(),
            true_label: true_label.into(),
            scores: None,
            ranking: Some(ranking),
        }
    }

    /// Zero-based rank of the true label.
    pub fn true_rank(&self) -> Result<usize, ReportError> {
        let unknown = || ReportError::UnknownLabel {
            clip_id: self.clip_id.clone(),
            label: self.true_label.clone(),
        };
        match (&self.scores, &self.ranking) {
            (Some(scores), None) => {
                if scores.values().any(|s| !s.is_finite()) {
                    return Err(ReportError::NonFiniteScore(self.clip_id.clone()));
                }
                let target = *scores.get(&self.true_label).ok_or_else(unknown)?;
                Ok(scores
                    .iter()
                    .filter(|(label, &s)| s > target || (s == target && label.as_str() < self.true_label.as_str()))
                    .count())
            }
            (None, Some(ranking)) => ranking.iter().position(|l| *l == self.true_label).ok_or_else(unknown),
            _ => Err(ReportError::MalformedRecord(self.clip_id.clone())),
        }
    }

    pub fn hit(&self, k: usize) -> Result<bool, ReportError> {
        Ok(self.true_rank()? < k)
    }

    /// Labels this record ranks, in rank order.
    pub fn ranked_labels(&self) -> Vec<&str> {
        match (&self.scores, &self.ranking) {
            (Some(scores), _) => {
                let mut v: Vec<(&str, f64)> = scores.iter().map(|(l, s)| (l.as_str(), *s)).collect();
                v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
                v.into_iter().map(|(l, _)| l).collect()
            }
            (None, Some(r)) => r.iter().map(String::as_str).collect(),
            _ => Vec::new(),
        }
    }
}

/// Read JSON-lines prediction records. Blank lines are skipped.
pub fn parse_predictions(text: &str) -> Result<Vec<PredictionRecord>, ReportError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| ReportError::Parse {
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

pub fn load_predictions(path: &Path) -> Result<Vec<PredictionRecord>, ReportError> {
    let text = std::fs::read_to_string(path).map_err(|e| ReportError::Io(format!("{}: {e}", path.display())))?;
    parse_predictions(&text)
}

/// Check every true and ranked label against a declared label set.
pub fn check_label_set(records: &[PredictionRecord], labels: &BTreeSet<String>) -> Result<(), ReportError> {
    for r in records {
        for l in r.ranked_labels().into_iter().chain([r.true_label.as_str()]) {
            if !labels.contains(l) {
                return Err(ReportError::UnknownLabel {
                    clip_id: r.clip_id.clone(),
                    label: l.to_owned(),
                });
            }
        }
    }
    Ok(())
}

fn hits(records: &[PredictionRecord], k: usize, exec: Exec) -> Result<Vec<bool>, ReportError> {
    if k == 0 {
        return Err(ReportError::InvalidK);
    }
    exec.map(records, |r| r.hit(k)).into_iter().collect()
}

/// Fraction of records whose true label is among the `k` best-ranked labels.
pub fn top_k_accuracy(records: &[PredictionRecord], k: usize, exec: Exec) -> Result<f64, ReportError> {
    if records.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    let h = hits(records, k, exec)?;
    Ok(h.iter().filter(|&&x| x).count() as f64 / h.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinRow {
    pub lo: f64,
    pub hi: f64,
    pub clips: usize,
    /// `None` for an empty bin.
    pub baseline_accuracy: Option<f64>,
    pub occluded_accuracy: Option<f64>,
    pub drop: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorTable {
    pub k: usize,
    pub rows: Vec<BinRow>,
    /// Clips whose factor falls outside every bin.
    pub unbinned: Vec<String>,
}

impl FactorTable {
    pub fn empty_bins(&self) -> Vec<usize> {
        self.rows.iter().enumerate().filter(|(_, r)| r.clips == 0).map(|(i, _)| i).collect()
    }
}

/// Index of the bin holding `v`. Bins are `[e_i, e_{i+1})`, except the last,
/// which also includes its upper edge.
pub fn bin_index(edges: &[f64], v: f64) -> Option<usize> {
    let last = edges.len().checked_sub(2)?;
    (0..=last).find(|&i| v >= edges[i] && (v < edges[i + 1] || (i == last && v == edges[i + 1])))
}

fn by_clip(records: &[PredictionRecord]) -> Result<BTreeMap<&str, &PredictionRecord>, ReportError> {
    let mut m = BTreeMap::new();
    let mut dups = Vec::new();
    for r in records {
        if m.insert(r.clip_id.as_str(), r).is_some() {
            dups.push(r.clip_id.clone());
        }
    }
    if dups.is_empty() {
        Ok(m)
    } else {
        Err(ReportError::MisalignedClips(dups))
    }
}

/// Baseline vs occluded top-k accuracy for clips grouped by an occlusion
/// factor (degree, area ratio or duration ratio).
pub fn accuracy_drop_by_factor(
    baseline: &[PredictionRecord],
    occluded: &[PredictionRecord],
    factor: &BTreeMap<String, f64>,
    bins: &[f64],
    k: usize,
) -> Result<FactorTable, ReportError> {
    if k == 0 {
        return Err(ReportError::InvalidK);
    }
    if bins.len() < 2 || bins.iter().any(|e| !e.is_finite()) || bins.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ReportError::BadBins);
    }
    let base = by_clip(baseline)?;
    let occ = by_clip(occluded)?;
    let ids: BTreeSet<&str> = base.keys().chain(occ.keys()).copied().chain(factor.keys().map(String::as_str)).collect();
    let misaligned: Vec<String> = ids
        .iter()
        .filter(|id| !(base.contains_key(*id) && occ.contains_key(*id) && factor.contains_key(**id)))
        .map(|s| s.to_string())
        .collect();
    if !misaligned.is_empty() {
        return Err(ReportError::MisalignedClips(misaligned));
    }

    let nbins = bins.len() - 1;
    let mut clips = vec![0usize; nbins];
    let mut base_hits = vec![0usize; nbins];
    let mut occ_hits = vec![0usize; nbins];
    let mut unbinned = Vec::new();
    for (id, &v) in factor {
        let Some(b) = bin_index(bins, v) else {
            unbinned.push(id.clone());
            continue;
        };
        clips[b] += 1;
        base_hits[b] += usize::from(base[id.as_str()].hit(k)?);
        occ_hits[b] += usize::from(occ[id.as_str()].hit(k)?);
    }
    let rows = (0..nbins)
        .map(|b| {
            let n = clips[b] as f64;
            let (ba, oa) = if clips[b] == 0 {
                (None, None)
            } else {
                (Some(base_hits[b] as f64 / n), Some(occ_hits[b] as f64 / n))
            };
            BinRow {
                lo: bins[b],
                hi: bins[b + 1],
                clips: clips[b],
                baseline_accuracy: ba,
                occluded_accuracy: oa,
                drop: ba.zip(oa).map(|(x, y)| x - y),
            }
        })
        .collect();
    Ok(FactorTable { k, rows, unbinned })
}

/// How classes listed under several parents are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    /// Only the first parent listed for a class. Groups partition the clips.
    #[default]
    First,
    /// Every listed parent. Groups may overlap.
    All,
}

/// Class to parent-category mapping, read from `class,parent` CSV rows. A
/// class may appear under more than one parent; row order is kept.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParentClassMap {
    parents: BTreeMap<String, Vec<String>>,
}

impl ParentClassMap {
    pub fn from_csv(text: &str) -> Result<Self, ReportError> {
        let mut rdr = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let mut parents: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row.map_err(|e| ReportError::Parse { line: i + 2, msg: e.to_string() })?;
            let (Some(class), Some(parent)) = (row.get(0), row.get(1)) else {
                return Err(ReportError::Parse {
                    line: i + 2,
                    msg: "expected class,parent".into(),
                });
            };
            let list = parents.entry(class.trim().to_owned()).or_default();
            if !list.iter().any(|p| p == parent.trim()) {
                list.push(parent.trim().to_owned());
            }
        }
        Ok(Self { parents })
    }

    pub fn load(path: &Path) -> Result<Self, ReportError> {
        let text = std::fs::read_to_string(path).map_err(|e| ReportError::Io(format!("{}: {e}", path.display())))?;
        Self::from_csv(&text)
    }

    /// Kinetics-400 parent categories shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_csv(BUNDLED_PARENT_MAP).expect("bundled parent map parses")
    }

    pub fn insert(&mut self, class: impl Into<String>, parent: impl Into<String>) {
        let parent = parent.into();
        let list = self.parents.entry(class.into()).or_default();
        if !list.contains(&parent) {
            list.push(parent);
        }
    }

    pub fn parents_of(&self, class: &str) -> Option<&[String]> {
        self.parents.get(class).map(Vec::as_slice)
    }

    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.parents.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParentRow {
    pub parent: String,
    pub clips: usize,
    pub correct: usize,
    pub accuracy: f64,
}

/// Top-k accuracy per parent class, sorted by accuracy (descending) then name.
pub fn parent_class_aggregate(
    records: &[PredictionRecord],
    map: &ParentClassMap,
    k: usize,
    membership: Membership,
) -> Result<Vec<ParentRow>, ReportError> {
    if records.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    let unmapped: BTreeSet<String> = records
        .iter()
        .filter(|r| map.parents_of(&r.true_label).is_none())
        .map(|r| r.true_label.clone())
        .collect();
    if !unmapped.is_empty() {
        return Err(ReportError::UnmappedLabel(unmapped.into_iter().collect()));
    }
    let h = hits(records, k, Exec::default())?;
    let mut groups: HashMap<&str, (usize, usize)> = HashMap::new();
    for (r, hit) in records.iter().zip(h) {
        let parents = map.parents_of(&r.true_label).unwrap_or_default();
        let chosen = match membership {
            Membership::First => &parents[..1],
            Membership::All => parents,
        };
        for p in chosen {
            let g = groups.entry(p.as_str()).or_default();
            g.0 += 1;
            g.1 += usize::from(hit);
        }
    }
    let mut rows: Vec<ParentRow> = groups
        .into_iter()
        .map(|(parent, (clips, correct))| ParentRow {
            parent: parent.to_owned(),
            clips,
            correct,
            accuracy: correct as f64 / clips as f64,
        })
        .collect();
    rows.sort_by(|a, b| b.accuracy.total_cmp(&a.accuracy).then_with(|| a.parent.cmp(&b.parent)));
    Ok(rows)
}

/// Order of operations when combining per-class accuracy drops over models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropOrder {
    /// Drop per model, then mean over the models that have the class.
    #[default]
    DifferenceThenAverage,
    /// Mean baseline and mean occluded accuracy over models, then difference.
    AverageThenDifference,
}

fn per_class_accuracy(records: &[PredictionRecord], k: usize) -> Result<BTreeMap<String, f64>, ReportError> {
    let mut acc: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for r in records {
        let e = acc.entry(r.true_label.clone()).or_default();
        e.0 += 1;
        e.1 += usize::from(r.hit(k)?);
    }
    Ok(acc.into_iter().map(|(c, (n, h))| (c, h as f64 / n as f64)).collect())
}

/// Per-class accuracy drop (baseline − occluded) combined over several
/// models. Each item of `models` is one model's `(baseline, occluded)` dump.
pub fn per_class_drop(
    models: &[(Vec<PredictionRecord>, Vec<PredictionRecord>)],
    k: usize,
    order: DropOrder,
) -> Result<BTreeMap<String, f64>, ReportError> {
    if models.is_empty() {
        return Err(ReportError::EmptyInput);
    }
    if k == 0 {
        return Err(ReportError::InvalidK);
    }
    let mut per_model = Vec::with_capacity(models.len());
    for (b, o) in models {
        per_model.push((per_class_accuracy(b, k)?, per_class_accuracy(o, k)?));
    }
    let classes: BTreeSet<&String> = per_model.iter().flat_map(|(b, o)| b.keys().chain(o.keys())).collect();
    let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
    let mut out = BTreeMap::new();
    for class in classes {
        let value = match order {
            DropOrder::DifferenceThenAverage => {
                let drops: Vec<f64> = per_model
                    .iter()
                    .filter_map(|(b, o)| Some(b.get(class)? - o.get(class)?))
                    .collect();
                mean(&drops)
            }
            DropOrder::AverageThenDifference => {
                let bs: Vec<f64> = per_model.iter().filter_map(|(b, _)| b.get(class).copied()).collect();
                let os: Vec<f64> = per_model.iter().filter_map(|(_, o)| o.get(class).copied()).collect();
                mean(&bs).zip(mean(&os)).map(|(x, y)| x - y)
            }
        };
        if let Some(v) = value {
            out.insert(class.clone(), v);
        }
    }
    Ok(out)
}

/// Serialize table rows as CSV with a header.
pub fn rows_to_csv<T: Serialize>(rows: &[T]) -> Result<String, ReportError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| ReportError::Io(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| ReportError::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
