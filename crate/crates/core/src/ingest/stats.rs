use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::DatasetFile;
use crate::error::{Error, Result};
use crate::mask::BBox;

/// Box counts binned by the square root of box area.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub bin_width: f64,
    /// `counts[i]` covers sqrt-areas in `[i * bin_width, (i + 1) * bin_width)`.
    pub counts: Vec<u64>,
    pub total: u64,
}

impl Histogram {
    /// CSV with columns `bin_start,bin_end,count`, one row per bin.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_start,bin_end,count\n");
        for (i, &count) in self.counts.iter().enumerate() {
            let start = i as f64 * self.bin_width;
            let _ = writeln!(out, "{},{},{}", start, start + self.bin_width, count);
        }
        out
    }
}

pub fn size_histogram(boxes: &[BBox], bin_width: f64) -> Result<Histogram> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::InvalidConfig(format!("bin width must be positive, got {bin_width}")));
    }
    let mut counts: Vec<u64> = Vec::new();
    for b in boxes {
        let bin = (b.sqrt_area() / bin_width).floor() as usize;
        if bin >= counts.len() {
            counts.resize(bin + 1, 0);
        }
        counts[bin] += 1;
    }
    Ok(Histogram {
        bin_width,
        counts,
        total: boxes.len() as u64,
    })
}

/// Lower median of the boxes' sqrt-areas.
pub fn median_sqrt_area(boxes: &[BBox]) -> Result<f64> {
    if boxes.is_empty() {
        return Err(Error::EmptyInput("empty input"));
    }
    let mut sizes: Vec<f64> = boxes.iter().map(BBox::sqrt_area).collect();
    sizes.sort_by(f64::total_cmp);
    Ok(sizes[(sizes.len() - 1) / 2])
}

/// Annotation boxes of `sample_n` images drawn without replacement with a
/// seeded generator; all images when `sample_n` covers the dataset.
pub fn sample_boxes(dataset: &DatasetFile, sample_n: usize, seed: u64) -> Vec<BBox> {
    let mut image_ids: Vec<u64> = dataset.images.iter().map(|im| im.id).collect();
    image_ids.sort_unstable();
    if sample_n < image_ids.len() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked: Vec<u64> = sample(&mut rng, image_ids.len(), sample_n)
            .into_iter()
            .map(|i| image_ids[i])
            .collect();
        picked.sort_unstable();
        image_ids = picked;
    }
    dataset
        .annotations
        .iter()
        .filter(|a| image_ids.binary_search(&a.image_id).is_ok())
        .map(|a| a.bbox)
        .collect()
}
