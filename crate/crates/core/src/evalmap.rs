//! COCO-style mask AP with configurable size buckets.
//!
//! Matching, accumulation and 101-point interpolation follow the usual
//! COCO evaluator: detections are matched greedily by descending score,
//! ground truths outside the bucket being scored are "ignored" (they can
//! absorb a detection without counting as a hit), and unmatched detections
//! whose own area falls outside the bucket are ignored too. Crowd regions
//! are not supported.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::Detection;
use crate::mask::{box_iou, rle_iou, BBox, BucketThresholds, RleMask, SizeBucket};

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthInstance {
    pub image_id: u64,
    pub category_id: u64,
    pub mask: RleMask,
    /// Foreground pixel count of `mask`.
    pub area: u64,
    pub bbox: BBox,
}

impl GroundTruthInstance {
    pub fn new(image_id: u64, category_id: u64, mask: RleMask, bbox: BBox) -> Self {
        let area = mask.area();
        Self {
            image_id,
            category_id,
            mask,
            area,
            bbox,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IouOn {
    Mask,
    Bbox,
}

/// Which area decides bucket membership.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AreaSource {
    Mask,
    Bbox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub iou_thresholds: Vec<f64>,
    pub recall_points: usize,
    pub bucket_thresholds: BucketThresholds,
    /// Cap on detections per image and category, highest scores first.
    pub max_detections_per_image: usize,
    pub iou_on: IouOn,
    pub bucket_area: AreaSource,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_thresholds: (0..10).map(|i| 0.5 + 0.05 * i as f64).collect(),
            recall_points: 101,
            bucket_thresholds: BucketThresholds::default(),
            max_detections_per_image: 100,
            iou_on: IouOn::Mask,
            bucket_area: AreaSource::Mask,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iou_thresholds.is_empty() {
            return Err(Error::InvalidConfig("no IoU thresholds".into()));
        }
        if self.iou_thresholds.iter().any(|&t| !(t > 0.0 && t <= 1.0))
            || self.iou_thresholds.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidConfig(
                "IoU thresholds must be strictly increasing within (0, 1]".into(),
            ));
        }
        if self.recall_points < 2 {
            return Err(Error::InvalidConfig("need at least 2 recall points".into()));
        }
        if self.bucket_thresholds.small_side > self.bucket_thresholds.large_side {
            return Err(Error::InvalidConfig("bucket thresholds out of order".into()));
        }
        Ok(())
    }

    fn threshold_index(&self, t: f64) -> Option<usize> {
        self.iou_thresholds.iter().position(|&x| (x - t).abs() < 1e-9)
    }
}

/// Sentinel for metrics with no ground truth to score against.
pub const UNDEFINED: f64 = -1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(rename = "mAP")]
    pub map: f64,
    #[serde(rename = "AP50")]
    pub ap50: f64,
    #[serde(rename = "AP75")]
    pub ap75: f64,
    #[serde(rename = "APs")]
    pub ap_small: f64,
    #[serde(rename = "APm")]
    pub ap_medium: f64,
    #[serde(rename = "APl")]
    pub ap_large: f64,
    /// AP averaged over IoU thresholds, per category with ground truth.
    pub per_category: BTreeMap<u64, f64>,
    /// Categories that only appear in detections; left out of every mean.
    pub categories_without_gt: Vec<u64>,
}

impl MetricReport {
    /// Flat `key = value` listing.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (key, value) in [
            ("mAP", self.map),
            ("AP50", self.ap50),
            ("AP75", self.ap75),
            ("APs", self.ap_small),
            ("APm", self.ap_medium),
            ("APl", self.ap_large),
        ] {
            let _ = writeln!(out, "{key} = {value:.6}");
        }
        for (cat, ap) in &self.per_category {
            let _ = writeln!(out, "AP.category.{cat} = {ap:.6}");
        }
        let excluded: Vec<String> = self.categories_without_gt.iter().map(u64::to_string).collect();
        let _ = writeln!(out, "excluded_categories = {}", excluded.join(","));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchLabel {
    TruePositive,
    FalsePositive,
    Ignored,
}

/// Greedy matching of score-sorted detections against ground truths.
///
/// `ious[d][g]` is the overlap of detection `d` with ground truth `g`.
/// A detection takes the still-unmatched ground truth with the highest
/// IoU >= `threshold` (lowest index on ties), preferring non-ignored ground
/// truths. Matching an ignored ground truth, or staying unmatched while
/// `det_outside[d]` is set, yields [`MatchLabel::Ignored`].
pub fn match_with_ignore(
    ious: &[Vec<f64>],
    gt_ignored: &[bool],
    det_outside: &[bool],
    threshold: f64,
) -> Vec<MatchLabel> {
    let mut taken = vec![false; gt_ignored.len()];
    ious.iter()
        .zip(det_outside)
        .map(|(row, &outside)| {
            let pick = |want_ignored: bool| {
                let mut best: Option<(usize, f64)> = None;
                for (g, &iou) in row.iter().enumerate() {
                    if taken[g] || gt_ignored[g] != want_ignored || iou < threshold {
                        continue;
                    }
                    if best.is_none_or(|(_, b)| iou > b) {
                        best = Some((g, iou));
                    }
                }
                best.map(|(g, _)| g)
            };
            match pick(false).or_else(|| pick(true)) {
                Some(g) => {
                    taken[g] = true;
                    if gt_ignored[g] {
                        MatchLabel::Ignored
                    } else {
                        MatchLabel::TruePositive
                    }
                }
                None if outside => MatchLabel::Ignored,
                None => MatchLabel::FalsePositive,
            }
        })
        .collect()
}

/// Matches one image/category worth of detections (sorted by descending
/// score) against its ground truths. Returns `true` for true positives.
pub fn match_detections(
    gts: &[GroundTruthInstance],
    dets: &[Detection],
    iou_threshold: f64,
    iou_on: IouOn,
) -> Result<Vec<bool>> {
    let ious = iou_matrix(gts, dets, iou_on)?;
    let labels = match_with_ignore(&ious, &vec![false; gts.len()], &vec![false; dets.len()], iou_threshold);
    Ok(labels.into_iter().map(|l| l == MatchLabel::TruePositive).collect())
}

fn iou_matrix(gts: &[GroundTruthInstance], dets: &[Detection], iou_on: IouOn) -> Result<Vec<Vec<f64>>> {
    dets.iter()
        .enumerate()
        .map(|(i, d)| {
            gts.iter()
                .map(|g| match iou_on {
                    IouOn::Bbox => Ok(box_iou(&d.bbox, &g.bbox)),
                    IouOn::Mask => {
                        let m = d.mask.as_ref().ok_or(Error::MissingMask { index: i })?;
                        rle_iou(m, &g.mask)
                    }
                })
                .collect()
        })
        .collect()
}

/// 101-point (or `recall_points`) interpolated average precision.
///
/// `labels` pairs each counted detection's score with whether it is a true
/// positive; they are ranked by descending score, ties keeping input order.
/// Returns [`UNDEFINED`] when `n_gt` is zero.
pub fn average_precision(labels: &[(f64, bool)], n_gt: usize, recall_points: usize) -> f64 {
    if n_gt == 0 {
        return UNDEFINED;
    }
    let mut ranked: Vec<&(f64, bool)> = labels.iter().collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut recall = Vec::with_capacity(ranked.len());
    let mut precision = Vec::with_capacity(ranked.len());
    let (mut tp, mut fp) = (0usize, 0usize);
    for &&(_, hit) in &ranked {
        if hit {
            tp += 1;
        } else {
            fp += 1;
        }
        recall.push(tp as f64 / n_gt as f64);
        precision.push(tp as f64 / (tp + fp) as f64);
    }
    for i in (1..precision.len()).rev() {
        if precision[i] > precision[i - 1] {
            precision[i - 1] = precision[i];
        }
    }
    let steps = (recall_points - 1) as f64;
    let mut total = 0.0;
    let mut cursor = 0;
    for k in 0..recall_points {
        let r = k as f64 / steps;
        while cursor < recall.len() && recall[cursor] < r {
            cursor += 1;
        }
        if cursor < recall.len() {
            total += precision[cursor];
        }
    }
    total / recall_points as f64
}

const SCOPES: [Option<SizeBucket>; 4] = [
    None,
    Some(SizeBucket::Small),
    Some(SizeBucket::Medium),
    Some(SizeBucket::Large),
];

/// Labels for one (image, category) cell: `[scope][threshold]` lists plus
/// the non-ignored ground-truth count per scope.
struct CellResult {
    category_id: u64,
    scores: Vec<f64>,
    labels: Vec<Vec<Vec<MatchLabel>>>,
    n_gt: [usize; 4],
}

/// Scores `dets` against `gts`.
pub fn evaluate(gts: &[GroundTruthInstance], dets: &[Detection], cfg: &EvalConfig) -> Result<MetricReport> {
    cfg.validate()?;
    let mut seen = HashSet::new();
    for d in dets {
        if let Some(id) = d.id {
            if !seen.insert(id) {
                return Err(Error::DuplicateDetectionId(id));
            }
        }
    }

    type Cell<'a> = (Vec<&'a GroundTruthInstance>, Vec<(usize, &'a Detection)>);
    let mut cells: BTreeMap<(u64, u64), Cell> = BTreeMap::new();
    for g in gts {
        cells.entry((g.image_id, g.category_id)).or_default().0.push(g);
    }
    for (i, d) in dets.iter().enumerate() {
        cells.entry((d.image_id, d.category_id)).or_default().1.push((i, d));
    }

    let gt_categories: BTreeSet<u64> = gts.iter().map(|g| g.category_id).collect();
    let categories_without_gt: Vec<u64> = dets
        .iter()
        .map(|d| d.category_id)
        .filter(|c| !gt_categories.contains(c))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let order_key = |i: usize, d: &Detection| d.id.unwrap_or(i as u64);
    let results: Vec<CellResult> = cells
        .into_par_iter()
        .filter(|((_, cat), _)| gt_categories.contains(cat))
        .map(|((_, category_id), (cell_gts, mut cell_dets))| {
            cell_dets.sort_by(|a, b| {
                b.1.score
                    .total_cmp(&a.1.score)
                    .then(order_key(a.0, a.1).cmp(&order_key(b.0, b.1)))
            });
            cell_dets.truncate(cfg.max_detections_per_image);
            evaluate_cell(category_id, &cell_gts, &cell_dets, cfg)
        })
        .collect::<Result<_>>()?;

    Ok(summarize(&results, &gt_categories, categories_without_gt, cfg))
}

fn evaluate_cell(
    category_id: u64,
    gts: &[&GroundTruthInstance],
    dets: &[(usize, &Detection)],
    cfg: &EvalConfig,
) -> Result<CellResult> {
    let owned_gts: Vec<GroundTruthInstance> = gts.iter().map(|&g| g.clone()).collect();
    let owned_dets: Vec<Detection> = dets.iter().map(|&(_, d)| d.clone()).collect();
    let ious = iou_matrix(&owned_gts, &owned_dets, cfg.iou_on).map_err(|e| match e {
        Error::MissingMask { index } => Error::MissingMask {
            index: dets[index].0,
        },
        other => other,
    })?;

    let gt_area = |g: &GroundTruthInstance| match cfg.bucket_area {
        AreaSource::Mask => g.area as f64,
        AreaSource::Bbox => g.bbox.area(),
    };
    let det_area = |d: &Detection| match (cfg.bucket_area, &d.mask) {
        (AreaSource::Mask, Some(m)) => m.area() as f64,
        _ => d.bbox.area(),
    };

    let mut labels = Vec::with_capacity(SCOPES.len());
    let mut n_gt = [0usize; 4];
    for (s, scope) in SCOPES.iter().enumerate() {
        let in_scope = |area: f64| scope.is_none_or(|b| cfg.bucket_thresholds.classify(area) == b);
        let gt_ignored: Vec<bool> = gts.iter().map(|g| !in_scope(gt_area(g))).collect();
        let det_outside: Vec<bool> = dets.iter().map(|(_, d)| !in_scope(det_area(d))).collect();
        n_gt[s] = gt_ignored.iter().filter(|&&ig| !ig).count();
        labels.push(
            cfg.iou_thresholds
                .iter()
                .map(|&t| match_with_ignore(&ious, &gt_ignored, &det_outside, t))
                .collect(),
        );
    }
    Ok(CellResult {
        category_id,
        scores: dets.iter().map(|(_, d)| d.score).collect(),
        labels,
        n_gt,
    })
}

fn summarize(
    results: &[CellResult],
    categories: &BTreeSet<u64>,
    categories_without_gt: Vec<u64>,
    cfg: &EvalConfig,
) -> MetricReport {
    let n_thr = cfg.iou_thresholds.len();
    // ap[scope][category][threshold]
    let mut ap: Vec<BTreeMap<u64, Vec<f64>>> = vec![BTreeMap::new(); SCOPES.len()];
    for &cat in categories {
        let cells: Vec<&CellResult> = results.iter().filter(|r| r.category_id == cat).collect();
        for (s, per_scope) in ap.iter_mut().enumerate() {
            let n_gt: usize = cells.iter().map(|c| c.n_gt[s]).sum();
            let per_thr = (0..n_thr)
                .map(|t| {
                    let pooled: Vec<(f64, bool)> = cells
                        .iter()
                        .flat_map(|c| {
                            c.scores.iter().zip(&c.labels[s][t]).filter_map(|(&score, &l)| match l {
                                MatchLabel::Ignored => None,
                                l => Some((score, l == MatchLabel::TruePositive)),
                            })
                        })
                        .collect();
                    average_precision(&pooled, n_gt, cfg.recall_points)
                })
                .collect();
            per_scope.insert(cat, per_thr);
        }
    }

    let mean_defined = |values: &mut dyn Iterator<Item = f64>| {
        let (sum, count) = values
            .filter(|&v| v > UNDEFINED)
            .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        if count == 0 {
            UNDEFINED
        } else {
            sum / count as f64
        }
    };
    let scope_mean = |s: usize| mean_defined(&mut ap[s].values().flatten().copied());
    let at_threshold = |t: f64| match cfg.threshold_index(t) {
        Some(i) => mean_defined(&mut ap[0].values().map(|v| v[i])),
        None => UNDEFINED,
    };

    MetricReport {
        map: scope_mean(0),
        ap50: at_threshold(0.5),
        ap75: at_threshold(0.75),
        ap_small: scope_mean(1),
        ap_medium: scope_mean(2),
        ap_large: scope_mean(3),
        per_category: ap[0]
            .iter()
            .map(|(&cat, v)| (cat, mean_defined(&mut v.iter().copied())))
            .collect(),
        categories_without_gt,
    }
}
