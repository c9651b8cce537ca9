//! Multi-model detection ensembling.
//!
//! Every model gets a confidence multiplier derived from its validation
//! score, detections are pooled with rescaled scores, overlapping
//! hypotheses are decayed with soft-NMS, and optionally the masks of
//! clustered duplicates are merged by a score-weighted vote.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{box_iou, rle_decode, rle_encode, rle_iou, BBox, BinaryMask, RleMask};

/// One instance hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// Optional explicit id; evaluation falls back to the input position.
    pub id: Option<u64>,
    pub image_id: u64,
    pub category_id: u64,
    pub score: f64,
    pub bbox: BBox,
    pub mask: Option<RleMask>,
    pub source_model: String,
}

impl Detection {
    pub fn new(image_id: u64, category_id: u64, score: f64, bbox: BBox) -> Self {
        Self {
            id: None,
            image_id,
            category_id,
            score,
            bbox,
            mask: None,
            source_model: String::new(),
        }
    }

    pub fn with_mask(mut self, mask: RleMask) -> Self {
        self.mask = Some(mask);
        self
    }

    pub fn with_source(mut self, source: impl Into<String>) -> Self {
        self.source_model = source.into();
        self
    }
}

/// An ensemble member with its validation score (mAP, in percent).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelCandidate {
    pub model_id: String,
    pub validation_score: f64,
    pub detections: Vec<Detection>,
}

impl ModelCandidate {
    pub fn new(model_id: impl Into<String>, validation_score: f64, detections: Vec<Detection>) -> Self {
        Self {
            model_id: model_id.into(),
            validation_score,
            detections,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightStrategy {
    LinearInterpolation,
    LinearReweight,
}

impl std::str::FromStr for WeightStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear_interpolation" | "linear-interpolation" => Ok(Self::LinearInterpolation),
            "linear_reweight" | "linear-reweight" => Ok(Self::LinearReweight),
            other => Err(Error::InvalidConfig(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NmsMethod {
    Gaussian,
    Linear,
    Hard,
}

impl std::str::FromStr for NmsMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "linear" => Ok(Self::Linear),
            "hard" => Ok(Self::Hard),
            other => Err(Error::InvalidConfig(format!("unknown NMS method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SoftNmsConfig {
    pub method: NmsMethod,
    pub sigma: f64,
    pub iou_threshold: f64,
    /// Detections whose decayed score drops below this are discarded.
    pub score_floor: f64,
    pub per_category: bool,
    /// Measure overlap on masks instead of boxes.
    pub mask_iou: bool,
}

impl Default for SoftNmsConfig {
    fn default() -> Self {
        Self {
            method: NmsMethod::Gaussian,
            sigma: 0.5,
            iou_threshold: 0.5,
            score_floor: 0.001,
            per_category: true,
            mask_iou: false,
        }
    }
}

impl SoftNmsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigma.is_nan() || self.sigma <= 0.0 {
            return Err(Error::InvalidConfig(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(0.0..=1.0).contains(&self.iou_threshold) {
            return Err(Error::InvalidConfig(format!(
                "iou_threshold {} outside [0, 1]",
                self.iou_threshold
            )));
        }
        if self.score_floor.is_nan() {
            return Err(Error::InvalidConfig("score_floor is NaN".into()));
        }
        Ok(())
    }

    /// Multiplier applied to a score overlapping a kept detection by `iou`.
    pub fn decay(&self, iou: f64) -> f64 {
        match self.method {
            NmsMethod::Gaussian => (-(iou * iou) / self.sigma).exp(),
            NmsMethod::Linear if iou > self.iou_threshold => 1.0 - iou,
            NmsMethod::Hard if iou > self.iou_threshold => 0.0,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    pub theta_min: f64,
    pub theta_max: f64,
    pub strategy: WeightStrategy,
    pub nms: SoftNmsConfig,
    pub merge_masks: bool,
    pub cluster_iou: f64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            theta_min: 0.6,
            theta_max: 1.0,
            strategy: WeightStrategy::LinearInterpolation,
            nms: SoftNmsConfig::default(),
            merge_masks: false,
            cluster_iou: 0.5,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        check_thetas(self.theta_min, self.theta_max)?;
        if !(0.0..=1.0).contains(&self.cluster_iou) {
            return Err(Error::InvalidConfig(format!(
                "cluster_iou {} outside [0, 1]",
                self.cluster_iou
            )));
        }
        self.nms.validate()
    }
}

fn check_thetas(theta_min: f64, theta_max: f64) -> Result<()> {
    if !(theta_min.is_finite() && theta_max.is_finite() && theta_min <= theta_max) {
        return Err(Error::InvalidConfig(format!(
            "need finite theta_min <= theta_max, got {theta_min} and {theta_max}"
        )));
    }
    Ok(())
}

fn check_scores(scores: &[f64]) -> Result<()> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("model scores"));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidConfig("model scores must be finite".into()));
    }
    Ok(())
}

/// Weights interpolated linearly in the validation score:
/// `theta_min + (theta_max - theta_min) / (max(S) - min(S)) * (s_i - min(S))`.
///
/// When all scores are equal every model gets `theta_max`.
pub fn linear_interpolation_weights(scores: &[f64], theta_min: f64, theta_max: f64) -> Result<Vec<f64>> {
    check_scores(scores)?;
    check_thetas(theta_min, theta_max)?;
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return Ok(vec![theta_max; scores.len()]);
    }
    let slope = (theta_max - theta_min) / (hi - lo);
    Ok(scores.iter().map(|&s| theta_min + slope * (s - lo)).collect())
}

/// Weights spaced evenly over `[theta_min, theta_max]` by ascending score
/// rank. Tied scores share the mean of their rank positions.
pub fn linear_reweight_weights(scores: &[f64], theta_min: f64, theta_max: f64) -> Result<Vec<f64>> {
    check_scores(scores)?;
    check_thetas(theta_min, theta_max)?;
    let n = scores.len();
    if n == 1 {
        return Ok(vec![theta_max]);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        let mean = (start + end - 1) as f64 / 2.0;
        for &i in &order[start..end] {
            rank[i] = mean;
        }
        start = end;
    }
    let step = (theta_max - theta_min) / (n - 1) as f64;
    Ok(rank.into_iter().map(|r| theta_min + step * r).collect())
}

/// Per-model weights under the configured strategy, in input order.
pub fn model_weights(models: &[ModelCandidate], cfg: &EnsembleConfig) -> Result<Vec<f64>> {
    let scores: Vec<f64> = models.iter().map(|m| m.validation_score).collect();
    match cfg.strategy {
        WeightStrategy::LinearInterpolation => {
            linear_interpolation_weights(&scores, cfg.theta_min, cfg.theta_max)
        }
        WeightStrategy::LinearReweight => linear_reweight_weights(&scores, cfg.theta_min, cfg.theta_max),
    }
}

/// Scales every detection's score by its model weight (clamped to `[0, 1]`)
/// and pools all detections, tagged with their model id.
pub fn apply_weights(models: &[ModelCandidate], weights: &[f64]) -> Result<Vec<Detection>> {
    if models.len() != weights.len() {
        return Err(Error::LengthMismatch {
            what: "models and weights",
            left: models.len(),
            right: weights.len(),
        });
    }
    let mut pooled = Vec::with_capacity(models.iter().map(|m| m.detections.len()).sum());
    for (model, &w) in models.iter().zip(weights) {
        for det in &model.detections {
            let mut det = det.clone();
            det.score = (det.score * w).clamp(0.0, 1.0);
            det.source_model = model.model_id.clone();
            pooled.push(det);
        }
    }
    Ok(pooled)
}

fn overlap(a: &Detection, b: &Detection, use_masks: bool) -> Result<f64> {
    if use_masks {
        match (&a.mask, &b.mask) {
            (Some(ma), Some(mb)) => rle_iou(ma, mb),
            _ => Err(Error::InvalidConfig("mask IoU requested but a detection has no mask".into())),
        }
    } else {
        Ok(box_iou(&a.bbox, &b.bbox))
    }
}

fn nms_group(mut pending: Vec<Detection>, cfg: &SoftNmsConfig) -> Result<Vec<Detection>> {
    let mut kept = Vec::with_capacity(pending.len());
    while !pending.is_empty() {
        let mut best = 0;
        for (i, d) in pending.iter().enumerate().skip(1) {
            if d.score > pending[best].score {
                best = i;
            }
        }
        let top = pending.remove(best);
        let mut survivors = Vec::with_capacity(pending.len());
        for mut d in pending {
            let factor = cfg.decay(overlap(&top, &d, cfg.mask_iou)?);
            if factor == 0.0 && cfg.method == NmsMethod::Hard {
                continue;
            }
            d.score *= factor;
            if d.score >= cfg.score_floor {
                survivors.push(d);
            }
        }
        pending = survivors;
        kept.push(top);
    }
    Ok(kept)
}

/// Soft non-maximum suppression.
///
/// Repeatedly keeps the highest-scoring remaining detection and decays the
/// scores of the rest by their overlap with it. In hard mode suppressed
/// detections are removed outright. Groups are formed per image (and per
/// category when `per_category`) and processed in parallel; the output is
/// sorted by score, descending, with ties kept in group then input order.
pub fn soft_nms(dets: &[Detection], cfg: &SoftNmsConfig) -> Result<Vec<Detection>> {
    cfg.validate()?;
    let mut groups: BTreeMap<(u64, Option<u64>), Vec<Detection>> = BTreeMap::new();
    for d in dets {
        let cat = cfg.per_category.then_some(d.category_id);
        groups.entry((d.image_id, cat)).or_default().push(d.clone());
    }
    let groups: Vec<Vec<Detection>> = groups.into_values().collect();
    let processed: Vec<Vec<Detection>> = groups
        .into_par_iter()
        .map(|g| nms_group(g, cfg))
        .collect::<Result<_>>()?;
    let mut out: Vec<Detection> = processed.into_iter().flatten().collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(out)
}

/// Greedy clustering of same-category detections by box overlap with merged
/// masks.
///
/// Detections are visited by descending score; each joins the first cluster
/// whose representative (its highest-scoring member) overlaps it with
/// box IoU >= `cluster_iou`, otherwise it starts a new cluster. A cluster
/// emits its representative with a mask set wherever the score-weighted
/// vote of member masks exceeds half the total weight.
pub fn cluster_merge_masks(dets: &[Detection], cluster_iou: f64) -> Result<Vec<Detection>> {
    if let Some(index) = dets.iter().position(|d| d.mask.is_none()) {
        return Err(Error::MissingMask { index });
    }
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score));

    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        let d = &dets[i];
        let home = clusters.iter_mut().find(|members| {
            let rep = &dets[members[0]];
            rep.image_id == d.image_id
                && rep.category_id == d.category_id
                && box_iou(&rep.bbox, &d.bbox) >= cluster_iou
        });
        match home {
            Some(members) => members.push(i),
            None => clusters.push(vec![i]),
        }
    }

    clusters
        .par_iter()
        .map(|members| {
            let mut rep = dets[members[0]].clone();
            if members.len() > 1 {
                let masks: Vec<&RleMask> = members.iter().map(|&i| dets[i].mask.as_ref().unwrap()).collect();
                let weights: Vec<f64> = members.iter().map(|&i| dets[i].score).collect();
                rep.mask = Some(weighted_vote(&masks, &weights)?);
            }
            Ok(rep)
        })
        .collect()
}

fn weighted_vote(masks: &[&RleMask], weights: &[f64]) -> Result<RleMask> {
    let (w, h) = (masks[0].width(), masks[0].height());
    let mut votes = vec![0.0f64; w * h];
    for (&m, &weight) in masks.iter().zip(weights) {
        let decoded = rle_decode(m)?;
        if decoded.width() != w || decoded.height() != h {
            return Err(Error::DimensionMismatch {
                left_w: w,
                left_h: h,
                right_w: decoded.width(),
                right_h: decoded.height(),
            });
        }
        for (v, &bit) in votes.iter_mut().zip(decoded.bits()) {
            if bit {
                *v += weight;
            }
        }
    }
    let total: f64 = weights.iter().sum();
    let bits = votes.into_iter().map(|v| 2.0 * v > total).collect();
    Ok(rle_encode(&BinaryMask::new(w, h, bits)?))
}

/// Full ensemble: weights, pooling, soft-NMS, then optional mask merging.
///
/// Pooled detections are ordered by model id, then by position within the
/// model, so the result does not depend on the order of `models`.
pub fn ensemble(models: &[ModelCandidate], cfg: &EnsembleConfig) -> Result<Vec<Detection>> {
    cfg.validate()?;
    if models.is_empty() {
        return Err(Error::EmptyInput("ensemble models"));
    }
    let mut ids: Vec<&str> = models.iter().map(|m| m.model_id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::InvalidConfig(format!("duplicate model id `{}`", w[0])));
    }

    let weights = model_weights(models, cfg)?;
    let mut pooled = apply_weights(models, &weights)?;
    pooled.sort_by(|a, b| a.source_model.cmp(&b.source_model));

    let mut out = soft_nms(&pooled, &cfg.nms)?;
    if cfg.merge_masks {
        out = cluster_merge_masks(&out, cfg.cluster_iou)?;
    }
    Ok(out)
}
