//! Counterfactual-corrected prediction and the combined training loss.
//!
//! Given factual logits `p` (clip as seen) and counterfactual logits `c`
//! (same clip with the actor erased):
//!
//! * `P = softmax(p)` is the ordinary prediction,
//! * `Y = softmax(p - c)` is the corrected prediction,
//! * `L = CE(P, q) + alpha * KL(P || Y)` is the training loss, with `q` the
//!   label distribution.
//!
//! Everything is computed in `f64` through log-sum-exp. Gradients are exact
//! derivatives of the loss as implemented, so they can serve as a reference
//! for external training code.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Exec;

/// Alpha grid of the standard ablation.
pub const ALPHA_GRID: [f64; 4] = [0.0, 0.5, 1.0, 2.0];

const LABEL_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum CarError {
    #[error("empty logit vector")]
    EmptyVector,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("non-finite input value")]
    NonFiniteInput,
    #[error("loss is not finite")]
    NonFiniteLoss,
    #[error("invalid label distribution: {0}")]
    InvalidLabel(String),
    #[error("invalid loss config: {0}")]
    InvalidConfig(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("class index {index} out of range for {classes} classes")]
    ClassOutOfRange { index: usize, classes: usize },
}

/// Factual and counterfactual logits for one clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionPair {
    pub p: Vec<f64>,
    pub c: Vec<f64>,
}

impl PredictionPair {
    pub fn new(p: Vec<f64>, c: Vec<f64>) -> Result<Self, CarError> {
        let pair = Self { p, c };
        pair.validate()?;
        Ok(pair)
    }

    pub fn validate(&self) -> Result<(), CarError> {
        if self.p.len() != self.c.len() {
            return Err(CarError::LengthMismatch(self.p.len(), self.c.len()));
        }
        if self.p.is_empty() {
            return Err(CarError::EmptyVector);
        }
        if !self.p.iter().chain(&self.c).all(|v| v.is_finite()) {
            return Err(CarError::NonFiniteInput);
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDistribution {
    q: Vec<f64>,
}

impl LabelDistribution {
    pub fn new(q: Vec<f64>) -> Result<Self, CarError> {
        if q.is_empty() {
            return Err(CarError::EmptyVector);
        }
        if q.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(CarError::InvalidLabel("entries must be finite and non-negative".into()));
        }
        let s: f64 = q.iter().sum();
        if (s - 1.0).abs() > LABEL_SUM_TOL {
            return Err(CarError::InvalidLabel(format!("entries sum to {s}")));
        }
        Ok(Self { q })
    }

    pub fn one_hot(classes: usize, index: usize) -> Result<Self, CarError> {
        if index >= classes {
            return Err(CarError::ClassOutOfRange { index, classes });
        }
        let mut q = vec![0.0; classes];
        q[index] = 1.0;
        Ok(Self { q })
    }

    pub fn probs(&self) -> &[f64] {
        &self.q
    }

    fn smoothed(&self, eps: f64) -> Vec<f64> {
        if eps == 0.0 {
            return self.q.clone();
        }
        let u = eps / self.q.len() as f64;
        self.q.iter().map(|&v| (1.0 - eps) * v + u).collect()
    }
}

/// Which way round the cross-entropy term is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CeOrientation {
    /// `-sum q_i log P_i`, the usual classification loss.
    #[default]
    Standard,
    /// `-sum P_i log q_i`, prediction and label swapped. Only finite when
    /// every label entry is positive, so it requires label smoothing.
    Swapped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub alpha: f64,
    #[serde(default)]
    pub label_smoothing_epsilon: f64,
    #[serde(default)]
    pub orientation: CeOrientation,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            label_smoothing_epsilon: 0.0,
            orientation: CeOrientation::Standard,
        }
    }
}

impl LossConfig {
    pub fn with_alpha(alpha: f64) -> Self {
        Self { alpha, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), CarError> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(CarError::InvalidConfig(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        let eps = self.label_smoothing_epsilon;
        if !(0.0..=0.1).contains(&eps) {
            return Err(CarError::InvalidConfig(format!("label smoothing must be in [0, 0.1], got {eps}")));
        }
        if self.orientation == CeOrientation::Swapped && eps <= 0.0 {
            return Err(CarError::InvalidConfig("swapped cross-entropy needs label smoothing > 0".into()));
        }
        Ok(())
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn log_softmax(logits: &[f64]) -> Result<Vec<f64>, CarError> {
    if logits.is_empty() {
        return Err(CarError::EmptyVector);
    }
    if !logits.iter().all(|v| v.is_finite()) {
        return Err(CarError::NonFiniteInput);
    }
    let lse = log_sum_exp(logits);
    Ok(logits.iter().map(|x| x - lse).collect())
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>, CarError> {
    if logits.is_empty() {
        return Err(CarError::EmptyVector);
    }
    if !logits.iter().all(|v| v.is_finite()) {
        return Err(CarError::NonFiniteInput);
    }
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|x| (x - m).exp()).collect();
    let s: f64 = e.iter().sum();
    Ok(e.into_iter().map(|v| v / s).collect())
}

fn difference(pair: &PredictionPair) -> Vec<f64> {
    pair.p.iter().zip(&pair.c).map(|(p, c)| p - c).collect()
}

/// `Y = softmax(p - c)`.
pub fn corrected_prediction(pair: &PredictionPair) -> Result<Vec<f64>, CarError> {
    pair.validate()?;
    softmax(&difference(pair))
}

/// Loss value split into its two terms. `loss = cross_entropy + alpha * kl`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub loss: f64,
    pub cross_entropy: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossGradient {
    pub d_p: Vec<f64>,
    pub d_c: Vec<f64>,
}

struct Forward {
    probs: Vec<f64>,
    log_p: Vec<f64>,
    corrected: Vec<f64>,
    log_y: Vec<f64>,
    q: Vec<f64>,
}

fn forward(pair: &PredictionPair, label: &LabelDistribution, cfg: &LossConfig) -> Result<Forward, CarError> {
    pair.validate()?;
    cfg.validate()?;
    if label.q.len() != pair.len() {
        return Err(CarError::LengthMismatch(pair.len(), label.q.len()));
    }
    let log_p = log_softmax(&pair.p)?;
    let log_y = log_softmax(&difference(pair))?;
    Ok(Forward {
        probs: log_p.iter().map(|v| v.exp()).collect(),
        corrected: log_y.iter().map(|v| v.exp()).collect(),
        log_p,
        log_y,
        q: label.smoothed(cfg.label_smoothing_epsilon),
    })
}

fn cross_entropy_term(f: &Forward, orientation: CeOrientation) -> f64 {
    match orientation {
        CeOrientation::Standard => -f.q.iter().zip(&f.log_p).map(|(q, lp)| if *q == 0.0 { 0.0 } else { q * lp }).sum::<f64>(),
        CeOrientation::Swapped => -f.probs.iter().zip(&f.q).map(|(p, q)| p * q.ln()).sum::<f64>(),
    }
}

fn kl_term(f: &Forward) -> f64 {
    let raw: f64 = f
        .probs
        .iter()
        .zip(f.log_p.iter().zip(&f.log_y))
        .map(|(p, (lp, ly))| p * (lp - ly))
        .sum();
    raw.max(0.0)
}

/// Cross-entropy of `softmax(logits)` against `label` in the standard
/// orientation.
pub fn cross_entropy(logits: &[f64], label: &LabelDistribution) -> Result<f64, CarError> {
    if logits.len() != label.q.len() {
        return Err(CarError::LengthMismatch(logits.len(), label.q.len()));
    }
    let log_p = log_softmax(logits)?;
    Ok(-label.q.iter().zip(&log_p).map(|(q, lp)| if *q == 0.0 { 0.0 } else { q * lp }).sum::<f64>())
}

/// `KL(P || Y)` for one pair, clamped at zero.
pub fn kl_divergence(pair: &PredictionPair) -> Result<f64, CarError> {
    pair.validate()?;
    let log_p = log_softmax(&pair.p)?;
    let log_y = log_softmax(&difference(pair))?;
    let raw: f64 = log_p.iter().zip(&log_y).map(|(lp, ly)| lp.exp() * (lp - ly)).sum();
    Ok(raw.max(0.0))
}

pub fn car_loss(pair: &PredictionPair, label: &LabelDistribution, cfg: &LossConfig) -> Result<LossTerms, CarError> {
    let f = forward(pair, label, cfg)?;
    let cross_entropy = cross_entropy_term(&f, cfg.orientation);
    let kl = kl_term(&f);
    let loss = if cfg.alpha == 0.0 { cross_entropy } else { cross_entropy + cfg.alpha * kl };
    if !loss.is_finite() {
        return Err(CarError::NonFiniteLoss);
    }
    Ok(LossTerms { loss, cross_entropy, kl })
}

/// Analytic `(dL/dp, dL/dc)`.
///
/// With `Pc = sum_i P_i c_i`:
/// * standard CE: `dCE/dp_j = P_j * sum(q) - q_j`
/// * swapped CE: `dCE/dp_j = -P_j (ln q_j - sum_i P_i ln q_i)`
/// * `dKL/dp_j = Y_j - P_j + P_j (c_j - Pc)`
/// * `dKL/dc_j = P_j - Y_j`
pub fn car_loss_gradient(pair: &PredictionPair, label: &LabelDistribution, cfg: &LossConfig) -> Result<LossGradient, CarError> {
    let f = forward(pair, label, cfg)?;
    let n = pair.len();
    let mut d_p = match cfg.orientation {
        CeOrientation::Standard => {
            let q_sum: f64 = f.q.iter().sum();
            (0..n).map(|j| f.probs[j] * q_sum - f.q[j]).collect::<Vec<_>>()
        }
        CeOrientation::Swapped => {
            let expected: f64 = f.probs.iter().zip(&f.q).map(|(p, q)| p * q.ln()).sum();
            (0..n).map(|j| -f.probs[j] * (f.q[j].ln() - expected)).collect()
        }
    };
    let mut d_c = vec![0.0; n];
    if cfg.alpha != 0.0 {
        let pc: f64 = f.probs.iter().zip(&pair.c).map(|(p, c)| p * c).sum();
        for j in 0..n {
            let dkl_dp = f.corrected[j] - f.probs[j] + f.probs[j] * (pair.c[j] - pc);
            d_p[j] += cfg.alpha * dkl_dp;
            d_c[j] = cfg.alpha * (f.probs[j] - f.corrected[j]);
        }
    }
    if !d_p.iter().chain(&d_c).all(|v| v.is_finite()) {
        return Err(CarError::NonFiniteLoss);
    }
    Ok(LossGradient { d_p, d_c })
}

/// Mean over pairs of `factual[class] - counterfactual[class]`.
pub fn causal_effect(factual: &[Vec<f64>], counterfactual: &[Vec<f64>], class_index: usize) -> Result<f64, CarError> {
    if factual.len() != counterfactual.len() {
        return Err(CarError::LengthMismatch(factual.len(), counterfactual.len()));
    }
    if factual.is_empty() {
        return Err(CarError::EmptyBatch);
    }
    let mut total = 0.0;
    for (f, c) in factual.iter().zip(counterfactual) {
        if f.len() != c.len() {
            return Err(CarError::LengthMismatch(f.len(), c.len()));
        }
        let (Some(a), Some(b)) = (f.get(class_index), c.get(class_index)) else {
            return Err(CarError::ClassOutOfRange {
                index: class_index,
                classes: f.len(),
            });
        };
        total += a - b;
    }
    Ok(total / factual.len() as f64)
}

/// Per-record loss terms for a batch, in input order.
pub fn car_loss_each(
    pairs: &[PredictionPair],
    labels: &[LabelDistribution],
    cfg: &LossConfig,
    exec: Exec,
) -> Result<Vec<LossTerms>, CarError> {
    if pairs.len() != labels.len() {
        return Err(CarError::LengthMismatch(pairs.len(), labels.len()));
    }
    let idx: Vec<usize> = (0..pairs.len()).collect();
    exec.map(&idx, |&i| car_loss(&pairs[i], &labels[i], cfg)).into_iter().collect()
}

/// Batch-mean loss terms. The reduction runs sequentially in input order so
/// the result does not depend on thread count.
pub fn car_loss_batch(
    pairs: &[PredictionPair],
    labels: &[LabelDistribution],
    cfg: &LossConfig,
    exec: Exec,
) -> Result<LossTerms, CarError> {
    let each = car_loss_each(pairs, labels, cfg, exec)?;
    if each.is_empty() {
        return Err(CarError::EmptyBatch);
    }
    let n = each.len() as f64;
    let mean = |f: fn(&LossTerms) -> f64| each.iter().map(f).sum::<f64>() / n;
    Ok(LossTerms {
        loss: mean(|t| t.loss),
        cross_entropy: mean(|t| t.cross_entropy),
        kl: mean(|t| t.kl),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub mean_loss: f64,
    pub mean_cross_entropy: f64,
    pub mean_kl: f64,
}

/// Batch-mean loss at each alpha, all other settings taken from `base`.
pub fn alpha_sweep(
    pairs: &[PredictionPair],
    labels: &[LabelDistribution],
    alphas: &[f64],
    base: &LossConfig,
    exec: Exec,
) -> Result<Vec<SweepRow>, CarError> {
    alphas
        .iter()
        .map(|&alpha| {
            let cfg = LossConfig { alpha, ..*base };
            let t = car_loss_batch(pairs, labels, &cfg, exec)?;
            Ok(SweepRow {
                alpha,
                mean_loss: t.loss,
                mean_cross_entropy: t.cross_entropy,
                mean_kl: t.kl,
            })
        })
        .collect()
}

/// CSV table with header `alpha,mean_loss,mean_cross_entropy,mean_kl`.
pub fn sweep_table_csv(rows: &[SweepRow]) -> Result<String, csv::Error> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(["alpha", "mean_loss", "mean_cross_entropy", "mean_kl"])?;
    }
    let bytes = w.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// One line of a label file: a class index or an explicit distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LabelRecord {
    Index { label: usize },
    Distribution { q: Vec<f64> },
}

impl LabelRecord {
    pub fn to_distribution(&self, classes: usize) -> Result<LabelDistribution, CarError> {
        match self {
            LabelRecord::Index { label } => LabelDistribution::one_hot(classes, *label),
            LabelRecord::Distribution { q } => {
                if q.len() != classes {
                    return Err(CarError::LengthMismatch(classes, q.len()));
                }
                LabelDistribution::new(q.clone())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn softmax_basic() {
        assert_eq!(softmax(&[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        assert!(softmax(&[3.3; 4]).unwrap().iter().all(|&v| close(v, 0.25, 1e-15)));
        // e^2 / (e^2 + 1) from the closed form
        let e2 = 2f64.exp();
        let s = softmax(&[2.0, 0.0]).unwrap();
        assert!(close(s[0], e2 / (e2 + 1.0), 1e-15));
        assert!(close(s[0], 0.880797077977882, 1e-12));
        assert!(close(s[1], 0.119202922022118, 1e-12));
        assert_eq!(softmax(&[]), Err(CarError::EmptyVector));
        assert_eq!(softmax(&[f64::NAN]), Err(CarError::NonFiniteInput));
    }

    #[test]
    fn softmax_survives_huge_logits() {
        let s = softmax(&[1000.0, 1000.0, -1000.0]).unwrap();
        assert!(close(s[0], 0.5, 1e-15) && s[2] == 0.0);
    }

    #[test]
    fn corrected_prediction_cases() {
        let pair = PredictionPair::new(vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]).unwrap();
        assert!(corrected_prediction(&pair).unwrap().iter().all(|&v| close(v, 1.0 / 3.0, 1e-15)));

        let p = vec![0.3, -1.2, 2.5];
        let pair = PredictionPair::new(p.clone(), vec![0.0; 3]).unwrap();
        assert_eq!(corrected_prediction(&pair).unwrap(), softmax(&p).unwrap());

        let pair = PredictionPair::new(vec![1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0]).unwrap();
        let y = corrected_prediction(&pair).unwrap();
        let z = 1.0 + (-2f64).exp() + 2f64.exp();
        let want = [(-2f64).exp() / z, 1.0 / z, 2f64.exp() / z];
        for (a, b) in y.iter().zip(want) {
            assert!(close(*a, b, 1e-15));
        }
        assert!(close(y[0], 0.015876239976467, 1e-12));
        assert!(close(y[1], 0.117310427826198, 1e-12));
        assert!(close(y[2], 0.866813332197335, 1e-12));

        assert_eq!(
            PredictionPair::new(vec![1.0], vec![1.0, 2.0]).unwrap_err(),
            CarError::LengthMismatch(1, 2)
        );
    }

    #[test]
    fn alpha_zero_is_cross_entropy() {
        let pair = PredictionPair::new(vec![0.1, 2.0, -0.7], vec![1.0, -1.0, 0.5]).unwrap();
        let label = LabelDistribution::one_hot(3, 1).unwrap();
        let t = car_loss(&pair, &label, &LossConfig::with_alpha(0.0)).unwrap();
        assert_eq!(t.loss, cross_entropy(&pair.p, &label).unwrap());
        assert!(t.kl > 0.0);
    }

    #[test]
    fn uniform_pair_loss_is_ln2() {
        let pair = PredictionPair::new(vec![0.0, 0.0], vec![0.0, 0.0]).unwrap();
        let label = LabelDistribution::one_hot(2, 0).unwrap();
        let t = car_loss(&pair, &label, &LossConfig::with_alpha(1.0)).unwrap();
        assert!(close(t.loss, 2f64.ln(), 1e-15));
        assert!(close(t.loss, std::f64::consts::LN_2, 1e-12));
        assert_eq!(t.kl, 0.0);
    }

    #[test]
    fn equal_logits_kl_is_log_n_minus_entropy() {
        // p == c makes Y uniform, so KL(P || Y) = ln n - H(P).
        let p = vec![0.5, -0.25, 1.75, 0.0];
        let pair = PredictionPair::new(p.clone(), p.clone()).unwrap();
        let probs = softmax(&p).unwrap();
        let h: f64 = -probs.iter().map(|v| v * v.ln()).sum::<f64>();
        assert!(close(kl_divergence(&pair).unwrap(), 4f64.ln() - h, 1e-14));
    }

    #[test]
    fn table_alphas_accepted() {
        let pair = PredictionPair::new(vec![0.2, 0.4], vec![0.1, 0.0]).unwrap();
        let label = LabelDistribution::one_hot(2, 1).unwrap();
        for a in ALPHA_GRID {
            assert!(car_loss(&pair, &label, &LossConfig::with_alpha(a)).unwrap().loss >= 0.0);
        }
        assert!(matches!(
            car_loss(&pair, &label, &LossConfig::with_alpha(-1.0)),
            Err(CarError::InvalidConfig(_))
        ));
    }

    #[test]
    fn swapped_orientation_needs_smoothing() {
        let pair = PredictionPair::new(vec![0.2, 0.4], vec![0.1, 0.0]).unwrap();
        let label = LabelDistribution::one_hot(2, 1).unwrap();
        let mut cfg = LossConfig {
            orientation: CeOrientation::Swapped,
            ..LossConfig::default()
        };
        assert!(matches!(car_loss(&pair, &label, &cfg), Err(CarError::InvalidConfig(_))));
        cfg.label_smoothing_epsilon = 0.1;
        let t = car_loss(&pair, &label, &cfg).unwrap();
        assert!(t.cross_entropy.is_finite() && t.cross_entropy > 0.0);
    }

    #[test]
    fn gradient_simple_cases() {
        let pair = PredictionPair::new(vec![0.0, 0.0], vec![0.0, 0.0]).unwrap();
        let label = LabelDistribution::one_hot(2, 0).unwrap();
        let g = car_loss_gradient(&pair, &label, &LossConfig::with_alpha(1.0)).unwrap();
        assert!(close(g.d_p[0], -0.5, 1e-15) && close(g.d_p[1], 0.5, 1e-15));

        let pair = PredictionPair::new(vec![0.3, -1.0, 2.0], vec![2.0, 0.1, -0.4]).unwrap();
        let label = LabelDistribution::one_hot(3, 2).unwrap();
        let g = car_loss_gradient(&pair, &label, &LossConfig::with_alpha(0.0)).unwrap();
        assert!(g.d_c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn causal_effect_cases() {
        let a = vec![vec![0.2, 0.8], vec![0.6, 0.4]];
        assert_eq!(causal_effect(&a, &a, 0), Ok(0.0));
        assert_eq!(causal_effect(&[vec![1.0, 0.0]], &[vec![0.0, 1.0]], 0), Ok(1.0));

        let f = [0.9, 0.7, 0.5];
        let c = [0.4, 0.7, 0.6];
        let fv: Vec<_> = f.iter().map(|&x| vec![x, 1.0 - x]).collect();
        let cv: Vec<_> = c.iter().map(|&x| vec![x, 1.0 - x]).collect();
        let oracle = ((0.9 - 0.4) + (0.7 - 0.7) + (0.5 - 0.6)) / 3.0;
        assert!(close(causal_effect(&fv, &cv, 0).unwrap(), oracle, 1e-15));
        assert!(close(oracle, 0.133333333333333, 1e-12));

        assert_eq!(causal_effect(&[], &[], 0), Err(CarError::EmptyBatch));
        assert_eq!(causal_effect(&fv, &cv[..2], 0), Err(CarError::LengthMismatch(3, 2)));
        assert!(matches!(causal_effect(&fv, &cv, 5), Err(CarError::ClassOutOfRange { .. })));
    }

    #[test]
    fn labels_validated() {
        assert!(LabelDistribution::new(vec![0.5, 0.4]).is_err());
        assert!(LabelDistribution::new(vec![1.5, -0.5]).is_err());
        assert!(LabelDistribution::new(vec![0.25; 4]).is_ok());
        assert!(LabelDistribution::one_hot(3, 3).is_err());
        let r: LabelRecord = serde_json::from_str(r#"{"label": 2}"#).unwrap();
        assert_eq!(r.to_distribution(3).unwrap().probs(), &[0.0, 0.0, 1.0]);
        let r: LabelRecord = serde_json::from_str(r#"{"q": [0.5, 0.5]}"#).unwrap();
        assert_eq!(r.to_distribution(2).unwrap().probs(), &[0.5, 0.5]);
    }

    #[test]
    fn sweep_table_shape() {
        let pairs = vec![PredictionPair::new(vec![1.0, 0.0], vec![0.0, 1.0]).unwrap(); 3];
        let labels = vec![LabelDistribution::one_hot(2, 0).unwrap(); 3];
        let rows = alpha_sweep(&pairs, &labels, &ALPHA_GRID, &LossConfig::default(), Exec::default()).unwrap();
        let csv = sweep_table_csv(&rows).unwrap();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], "alpha,mean_loss,mean_cross_entropy,mean_kl");
        assert_eq!(lines.len(), 5);
        assert_eq!(rows[0].mean_loss, rows[0].mean_cross_entropy);
    }
}
