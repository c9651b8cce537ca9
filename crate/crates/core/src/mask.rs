//! Mask and box geometry: logit fields, binary masks, run-length encoding,
//! overlap measures and object size buckets.
//!
//! Continuous coordinates follow the align-corners convention: a point
//! `(u, v)` in the unit square maps to pixel coordinates
//! `(u * (width - 1), v * (height - 1))`, so `(0, 0)` is the center of the
//! top-left pixel and `(1, 1)` the center of the bottom-right one. A grid
//! of side 1 collapses every coordinate onto its single pixel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rectangular grid of mask logits, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreField {
    width: usize,
    height: usize,
    logits: Vec<f64>,
}

impl ScoreField {
    pub fn new(width: usize, height: usize, logits: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidField(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        if logits.len() != width * height {
            return Err(Error::InvalidField(format!(
                "{} logits for a {width}x{height} grid",
                logits.len()
            )));
        }
        if let Some(i) = logits.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidField(format!("non-finite logit at index {i}")));
        }
        Ok(Self {
            width,
            height,
            logits,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds a field by evaluating `f(col, row)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut logits = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                logits.push(f(col, row));
            }
        }
        Self::new(width, height, logits)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.logits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logits.is_empty()
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn into_logits(self) -> Vec<f64> {
        self.logits
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.logits[row * self.width + col]
    }

    /// Overwrites one logit. Non-finite values are rejected.
    pub fn set(&mut self, index: usize, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::InvalidField(format!(
                "non-finite logit written at index {index}"
            )));
        }
        self.logits[index] = value;
        Ok(())
    }

    /// Normalized coordinate of pixel `(col, row)`.
    pub fn pixel_center(&self, col: usize, row: usize) -> (f64, f64) {
        (axis_coord(col, self.width), axis_coord(row, self.height))
    }

    /// Samples the field at `(u, v)` by bilinear interpolation.
    pub fn sample(&self, u: f64, v: f64) -> Result<f64> {
        bilinear_sample(self, u, v)
    }

    /// Align-corners resampling to a `width` x `height` grid.
    pub fn resize(&self, width: usize, height: usize) -> Result<ScoreField> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidField(format!(
                "dimensions must be positive, got {width}x{height}"
            )));
        }
        let xs: Vec<Axis> = (0..width)
            .map(|c| Axis::locate(axis_coord(c, width), self.width))
            .collect();
        let mut logits = Vec::with_capacity(width * height);
        for row in 0..height {
            let ay = Axis::locate(axis_coord(row, height), self.height);
            for ax in &xs {
                logits.push(self.interpolate(ax, &ay));
            }
        }
        ScoreField::new(width, height, logits)
    }

    /// Doubles both sides with align-corners bilinear interpolation.
    pub fn upsample2x(&self) -> ScoreField {
        self.resize(self.width * 2, self.height * 2)
            .expect("upsampling a valid field yields a valid field")
    }

    /// Mirrors the field left to right.
    pub fn mirror_horizontal(&self) -> ScoreField {
        let mut logits = Vec::with_capacity(self.logits.len());
        for row in self.logits.chunks(self.width) {
            logits.extend(row.iter().rev());
        }
        ScoreField {
            width: self.width,
            height: self.height,
            logits,
        }
    }

    fn interpolate(&self, ax: &Axis, ay: &Axis) -> f64 {
        let top = self.get(ax.lo, ay.lo) * (1.0 - ax.frac) + self.get(ax.hi, ay.lo) * ax.frac;
        let bottom = self.get(ax.lo, ay.hi) * (1.0 - ax.frac) + self.get(ax.hi, ay.hi) * ax.frac;
        top * (1.0 - ay.frac) + bottom * ay.frac
    }
}

fn axis_coord(index: usize, side: usize) -> f64 {
    if side <= 1 {
        0.0
    } else {
        index as f64 / (side - 1) as f64
    }
}

/// Neighbouring pixel pair and blend weight along one axis.
struct Axis {
    lo: usize,
    hi: usize,
    frac: f64,
}

impl Axis {
    fn locate(t: f64, side: usize) -> Axis {
        if side == 1 {
            return Axis {
                lo: 0,
                hi: 0,
                frac: 0.0,
            };
        }
        let mut pos = t * (side - 1) as f64;
        // i / (n - 1) * (n - 1) can land an ulp away from i; snap back onto the center
        let nearest = pos.round();
        if (pos - nearest).abs() < 1e-9 {
            pos = nearest;
        }
        let lo = (pos.floor() as usize).min(side - 2);
        Axis {
            lo,
            hi: lo + 1,
            frac: pos - lo as f64,
        }
    }
}

/// Bilinear interpolation of `field` at the normalized point `(u, v)`.
///
/// `u` runs along the width and `v` along the height. Queries at pixel
/// centers return that pixel's logit exactly.
pub fn bilinear_sample(field: &ScoreField, u: f64, v: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
        return Err(Error::OutOfDomain { x: u, y: v });
    }
    let ax = Axis::locate(u, field.width);
    let ay = Axis::locate(v, field.height);
    Ok(field.interpolate(&ax, &ay))
}

/// Row-major boolean mask.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::InvalidField(format!(
                "{} bits for a {width}x{height} mask",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                bits.push(f(col, row));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, col: usize, row: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, value: bool) {
        self.bits[row * self.width + col] = value;
    }

    /// Number of foreground pixels.
    pub fn area(&self) -> u64 {
        self.bits.iter().filter(|&&b| b).count() as u64
    }

    /// Pixel-wise OR with another mask of the same size.
    pub fn union_with(&mut self, other: &BinaryMask) -> Result<()> {
        check_dims(self.width, self.height, other.width, other.height)?;
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
        Ok(())
    }
}

/// Sets a bit wherever the logit is strictly greater than `threshold`.
pub fn binarize(field: &ScoreField, threshold: f64) -> BinaryMask {
    BinaryMask {
        width: field.width,
        height: field.height,
        bits: field.logits.iter().map(|&v| v > threshold).collect(),
    }
}

/// Uncompressed run-length encoding in column-major order.
///
/// Runs alternate background and foreground, starting with background; the
/// leading run may be zero when the first pixel is foreground.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RleMask {
    width: usize,
    height: usize,
    counts: Vec<u32>,
}

impl RleMask {
    pub fn new(width: usize, height: usize, counts: Vec<u32>) -> Result<Self> {
        let total: u64 = counts.iter().map(|&c| c as u64).sum();
        if total != (width * height) as u64 {
            return Err(Error::InvalidRle(format!(
                "counts sum to {total}, expected {}",
                width * height
            )));
        }
        if counts.is_empty() && width * height > 0 {
            return Err(Error::InvalidRle("no runs".into()));
        }
        if let Some(i) = counts.iter().skip(1).position(|&c| c == 0) {
            return Err(Error::InvalidRle(format!("zero-length run at index {}", i + 1)));
        }
        Ok(Self {
            width,
            height,
            counts,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn area(&self) -> u64 {
        self.counts.iter().skip(1).step_by(2).map(|&c| c as u64).sum()
    }

    /// Foreground pixels shared with `other`, computed on the runs directly.
    pub fn intersection_area(&self, other: &RleMask) -> Result<u64> {
        check_dims(self.width, self.height, other.width, other.height)?;
        let mut a = Runs::new(&self.counts);
        let mut b = Runs::new(&other.counts);
        let mut shared = 0u64;
        while let (Some((len_a, fg_a)), Some((len_b, fg_b))) = (a.peek(), b.peek()) {
            let step = len_a.min(len_b);
            if fg_a && fg_b {
                shared += step;
            }
            a.advance(step);
            b.advance(step);
        }
        Ok(shared)
    }
}

struct Runs<'a> {
    counts: &'a [u32],
    index: usize,
    left: u64,
}

impl<'a> Runs<'a> {
    fn new(counts: &'a [u32]) -> Self {
        let mut runs = Runs {
            counts,
            index: 0,
            left: counts.first().copied().unwrap_or(0) as u64,
        };
        runs.skip_empty();
        runs
    }

    fn skip_empty(&mut self) {
        while self.left == 0 && self.index < self.counts.len() {
            self.index += 1;
            self.left = self.counts.get(self.index).copied().unwrap_or(0) as u64;
        }
    }

    fn peek(&self) -> Option<(u64, bool)> {
        (self.index < self.counts.len()).then_some((self.left, self.index % 2 == 1))
    }

    fn advance(&mut self, n: u64) {
        self.left -= n;
        self.skip_empty();
    }
}

/// Run-length encodes `mask`, scanning column 0 top to bottom, then column 1, ...
pub fn rle_encode(mask: &BinaryMask) -> RleMask {
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0u32;
    for col in 0..mask.width {
        for row in 0..mask.height {
            let bit = mask.get(col, row);
            if bit != current {
                counts.push(run);
                run = 0;
                current = bit;
            }
            run += 1;
        }
    }
    counts.push(run);
    if mask.width * mask.height == 0 {
        counts = vec![0];
    }
    RleMask {
        width: mask.width,
        height: mask.height,
        counts,
    }
}

pub fn rle_decode(rle: &RleMask) -> Result<BinaryMask> {
    let total: u64 = rle.counts.iter().map(|&c| c as u64).sum();
    let n = rle.width * rle.height;
    if total != n as u64 {
        return Err(Error::InvalidRle(format!("counts sum to {total}, expected {n}")));
    }
    let mut mask = BinaryMask::empty(rle.width, rle.height);
    let mut pos = 0usize;
    for (i, &c) in rle.counts.iter().enumerate() {
        let fg = i % 2 == 1;
        for flat in pos..pos + c as usize {
            if fg {
                mask.set(flat / rle.height, flat % rle.height, true);
            }
        }
        pos += c as usize;
    }
    Ok(mask)
}

fn check_dims(aw: usize, ah: usize, bw: usize, bh: usize) -> Result<()> {
    if aw != bw || ah != bh {
        return Err(Error::DimensionMismatch {
            left_w: aw,
            left_h: ah,
            right_w: bw,
            right_h: bh,
        });
    }
    Ok(())
}

/// Intersection over union of two masks; two empty masks score 0.
pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    check_dims(a.width, a.height, b.width, b.height)?;
    let (mut inter, mut union) = (0u64, 0u64);
    for (&x, &y) in a.bits.iter().zip(&b.bits) {
        inter += (x && y) as u64;
        union += (x || y) as u64;
    }
    Ok(ratio(inter, union))
}

/// Same as [`mask_iou`] on run-length encoded masks.
pub fn rle_iou(a: &RleMask, b: &RleMask) -> Result<f64> {
    let inter = a.intersection_area(b)?;
    Ok(ratio(inter, a.area() + b.area() - inter))
}

fn ratio(inter: u64, union: u64) -> f64 {
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Axis-aligned box given by its top-left corner and size, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if !(w >= 0.0 && h >= 0.0) || !x.is_finite() || !y.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "invalid box [{x}, {y}, {w}, {h}]"
            )));
        }
        Ok(Self { x, y, w, h })
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }

    /// Square root of the box area, the object "size" used by size statistics.
    pub fn sqrt_area(&self) -> f64 {
        self.area().sqrt()
    }
}

/// Intersection over union of two boxes; boxes with no area score 0.
pub fn box_iou(a: &BBox, b: &BBox) -> f64 {
    if a == b {
        return if a.area() > 0.0 { 1.0 } else { 0.0 };
    }
    let iw = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
    let ih = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
    let inter = if iw > 0.0 && ih > 0.0 { iw * ih } else { 0.0 };
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeBucket {
    Small,
    Medium,
    Large,
}

impl SizeBucket {
    pub const ALL: [SizeBucket; 3] = [SizeBucket::Small, SizeBucket::Medium, SizeBucket::Large];

    pub fn name(self) -> &'static str {
        match self {
            SizeBucket::Small => "small",
            SizeBucket::Medium => "medium",
            SizeBucket::Large => "large",
        }
    }
}

/// Side lengths whose squares split small/medium and medium/large objects.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BucketThresholds {
    pub small_side: f64,
    pub large_side: f64,
}

impl Default for BucketThresholds {
    fn default() -> Self {
        Self {
            small_side: 113.0,
            large_side: 256.0,
        }
    }
}

impl BucketThresholds {
    /// Medium is the closed interval `[small_side², large_side²]`.
    pub fn classify(&self, area: f64) -> SizeBucket {
        if area < self.small_side * self.small_side {
            SizeBucket::Small
        } else if area <= self.large_side * self.large_side {
            SizeBucket::Medium
        } else {
            SizeBucket::Large
        }
    }
}

/// Bucket for `area` under the default 113 / 256 thresholds.
pub fn size_bucket(area: f64) -> SizeBucket {
    BucketThresholds::default().classify(area)
}
