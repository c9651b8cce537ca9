//! Coarse-to-fine mask rendering by adaptive subdivision.
//!
//! Each step doubles the resolution of the current logit field with
//! bilinear interpolation, then hands the most uncertain pixels (logits
//! closest to zero) to a [`PointPredictor`] and overwrites them with its
//! answers. The rest of the grid keeps the interpolated values.

mod shapes;

pub use shapes::{synthetic_corpus, SyntheticShape, GT_LOGIT_SCALE};

use std::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{bilinear_sample, ScoreField};

/// Source of refined logits at continuous points in the unit square.
///
/// `current` is the field being refined (already upsampled for this step).
/// Implementations must return exactly one finite logit per point and be
/// deterministic. The `Send + Sync` bound lets one predictor serve many
/// concurrent renders.
pub trait PointPredictor: Send + Sync {
    fn predict(&self, current: &ScoreField, points: &[(f64, f64)]) -> Result<Vec<f64>>;
}

/// Answers with bilinear samples of a high-resolution reference field.
#[derive(Debug, Clone)]
pub struct OracleFieldPredictor {
    reference: ScoreField,
}

impl OracleFieldPredictor {
    pub fn new(reference: ScoreField) -> Self {
        Self { reference }
    }

    pub fn reference(&self) -> &ScoreField {
        &self.reference
    }
}

impl PointPredictor for OracleFieldPredictor {
    fn predict(&self, _current: &ScoreField, points: &[(f64, f64)]) -> Result<Vec<f64>> {
        points
            .iter()
            .map(|&(u, v)| bilinear_sample(&self.reference, u, v))
            .collect()
    }
}

/// Returns the value the current field already has, so refinement is a no-op.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityPredictor;

impl PointPredictor for IdentityPredictor {
    fn predict(&self, current: &ScoreField, points: &[(f64, f64)]) -> Result<Vec<f64>> {
        points
            .iter()
            .map(|&(u, v)| bilinear_sample(current, u, v))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubdivisionConfig {
    /// Grid side `k`; each step re-predicts `k * k` points.
    pub subdivision_k: usize,
    pub target_side: usize,
    pub start_side: usize,
}

impl Default for SubdivisionConfig {
    fn default() -> Self {
        Self {
            subdivision_k: 28,
            target_side: 224,
            start_side: 7,
        }
    }
}

impl SubdivisionConfig {
    /// Number of doubling steps from `start_side` to `target_side`.
    pub fn steps(&self) -> Result<u32> {
        if self.subdivision_k == 0 {
            return Err(Error::InvalidConfig("subdivision_k must be at least 1".into()));
        }
        if self.start_side == 0 || self.target_side < self.start_side {
            return Err(Error::InvalidConfig(format!(
                "target side {} cannot be reached from start side {}",
                self.target_side, self.start_side
            )));
        }
        let mut side = self.start_side;
        let mut steps = 0;
        while side < self.target_side {
            side *= 2;
            steps += 1;
        }
        if side != self.target_side {
            return Err(Error::InvalidConfig(format!(
                "target side {} is not start side {} times a power of two",
                self.target_side, self.start_side
            )));
        }
        Ok(steps)
    }

    pub fn points_per_step(&self) -> usize {
        self.subdivision_k * self.subdivision_k
    }
}

/// Uncertainty of a logit: `-|logit|`, highest at 0.
pub fn uncertainty(logit: f64) -> f64 {
    -logit.abs()
}

fn by_uncertainty(logits: &[f64]) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| {
        uncertainty(logits[b])
            .total_cmp(&uncertainty(logits[a]))
            .then(a.cmp(&b))
    }
}

/// Row-major indices of the `n` most uncertain pixels, most uncertain first.
/// Ties go to the lower index.
pub fn select_most_uncertain(field: &ScoreField, n: usize) -> Result<Vec<usize>> {
    let total = field.len();
    if n > total {
        return Err(Error::TooManyPoints {
            requested: n,
            available: total,
        });
    }
    let mut order: Vec<usize> = (0..total).collect();
    if n == 0 {
        return Ok(Vec::new());
    }
    let cmp = by_uncertainty(field.logits());
    if n < total {
        order.select_nth_unstable_by(n - 1, &cmp);
        order.truncate(n);
    }
    order.sort_unstable_by(cmp);
    Ok(order)
}

/// One refinement step: upsample by two, then re-predict the `n_points`
/// most uncertain pixels of the upsampled grid.
pub fn subdivision_step(
    field: &ScoreField,
    predictor: &dyn PointPredictor,
    n_points: usize,
) -> Result<ScoreField> {
    let mut up = field.upsample2x();
    let chosen = select_most_uncertain(&up, n_points)?;
    if chosen.is_empty() {
        return Ok(up);
    }
    let width = up.width();
    let points: Vec<(f64, f64)> = chosen
        .iter()
        .map(|&i| up.pixel_center(i % width, i / width))
        .collect();
    let values = predictor.predict(&up, &points)?;
    if values.len() != points.len() {
        return Err(Error::Predictor(format!(
            "returned {} logits for {} points",
            values.len(),
            points.len()
        )));
    }
    for (&i, &v) in chosen.iter().zip(&values) {
        up.set(i, v)
            .map_err(|_| Error::Predictor(format!("non-finite logit for pixel {i}")))?;
    }
    Ok(up)
}

/// Renders `coarse` up to `cfg.target_side` with repeated subdivision steps.
///
/// Each step re-predicts `k * k` points, clamped to the step's pixel count.
pub fn subdivision_render(
    coarse: &ScoreField,
    predictor: &dyn PointPredictor,
    cfg: &SubdivisionConfig,
) -> Result<ScoreField> {
    let steps = cfg.steps()?;
    if coarse.width() != cfg.start_side || coarse.height() != cfg.start_side {
        return Err(Error::InvalidConfig(format!(
            "coarse field is {}x{}, expected start side {}",
            coarse.width(),
            coarse.height(),
            cfg.start_side
        )));
    }
    let mut field = coarse.clone();
    for _ in 0..steps {
        let budget = cfg.points_per_step().min(field.len() * 4);
        field = subdivision_step(&field, predictor, budget)?;
    }
    Ok(field)
}

/// Parameters for uncertainty-biased training point sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSampleConfig {
    pub n_points: usize,
    pub oversample_k: usize,
    pub importance_beta: f64,
    pub rng_seed: u64,
}

impl TrainSampleConfig {
    pub fn new(n_points: usize, oversample_k: usize, importance_beta: f64, rng_seed: u64) -> Self {
        Self {
            n_points,
            oversample_k,
            importance_beta,
            rng_seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_points == 0 {
            return Err(Error::InvalidConfig("n_points must be at least 1".into()));
        }
        if self.oversample_k == 0 {
            return Err(Error::InvalidConfig("oversample_k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.importance_beta) {
            return Err(Error::InvalidConfig(format!(
                "importance_beta {} outside [0, 1]",
                self.importance_beta
            )));
        }
        Ok(())
    }
}

/// Draws `n_points` training points biased toward uncertain regions.
///
/// Oversamples `oversample_k * n_points` uniform candidates, keeps the
/// `floor(importance_beta * n_points)` most uncertain of them (by bilinear
/// logit) and tops up with fresh uniform points.
pub fn biased_point_sample(field: &ScoreField, cfg: &TrainSampleConfig) -> Result<Vec<(f64, f64)>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let uniform = |rng: &mut ChaCha8Rng| (rng.gen::<f64>(), rng.gen::<f64>());

    let candidates: Vec<(f64, f64)> = (0..cfg.oversample_k * cfg.n_points)
        .map(|_| uniform(&mut rng))
        .collect();
    let logits: Vec<f64> = candidates
        .iter()
        .map(|&(u, v)| bilinear_sample(field, u, v))
        .collect::<Result<_>>()?;

    let n_important = ((cfg.importance_beta * cfg.n_points as f64).floor() as usize)
        .min(cfg.n_points)
        .min(candidates.len());
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(by_uncertainty(&logits));

    let mut points: Vec<(f64, f64)> = order[..n_important].iter().map(|&i| candidates[i]).collect();
    while points.len() < cfg.n_points {
        points.push(uniform(&mut rng));
    }
    Ok(points)
}

/// Fuses a prediction with one made on the horizontally flipped input.
///
/// The second field is mirrored back before the elementwise mean.
pub fn flip_fuse(field: &ScoreField, field_from_flipped_input: &ScoreField) -> Result<ScoreField> {
    if field.width() != field_from_flipped_input.width()
        || field.height() != field_from_flipped_input.height()
    {
        return Err(Error::DimensionMismatch {
            left_w: field.width(),
            left_h: field.height(),
            right_w: field_from_flipped_input.width(),
            right_h: field_from_flipped_input.height(),
        });
    }
    let unflipped = field_from_flipped_input.mirror_horizontal();
    let logits = field
        .logits()
        .iter()
        .zip(unflipped.logits())
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    ScoreField::new(field.width(), field.height(), logits)
}
