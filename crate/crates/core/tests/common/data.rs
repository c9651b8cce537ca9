//! Small hand-built datasets shared by the integration tests.

use std::path::Path;

use segkit::evalmap::GroundTruthInstance;
use segkit::fusion::{Detection, ModelCandidate};
use segkit::ingest::{self, Annotation, Category, DatasetFile, ImageInfo, RleJson, Segmentation};
use segkit::mask::{rle_encode, BBox, BinaryMask, RleMask};

pub const SIDE: usize = 20;

/// Axis-aligned block `[x0, x1) x [y0, y1)` on a `SIDE`² canvas.
pub fn block(x0: usize, y0: usize, x1: usize, y1: usize) -> (RleMask, BBox) {
    let m = BinaryMask::from_fn(SIDE, SIDE, |c, r| (x0..x1).contains(&c) && (y0..y1).contains(&r));
    let bbox = BBox::new(x0 as f64, y0 as f64, (x1 - x0) as f64, (y1 - y0) as f64).unwrap();
    (rle_encode(&m), bbox)
}

pub fn object(image: u64) -> (RleMask, BBox) {
    block(2 + image as usize, 3, 12 + image as usize, 13)
}

fn stray() -> (RleMask, BBox) {
    block(15, 15, 19, 19)
}

/// Three images with one object each. Model `i` finds the objects in every
/// image but image `i + 1`, where it reports a low-scoring stray region.
pub fn complementary_models() -> (Vec<GroundTruthInstance>, Vec<ModelCandidate>) {
    let gts = (1..=3)
        .map(|img| {
            let (m, b) = object(img);
            GroundTruthInstance::new(img, 1, m, b)
        })
        .collect();
    let models = (0..3u64)
        .map(|i| {
            let dets = (1..=3)
                .map(|img| {
                    let ((m, b), score) = if img == i + 1 { (stray(), 0.2) } else { (object(img), 0.9) };
                    Detection::new(img, 1, score, b).with_mask(m)
                })
                .collect();
            ModelCandidate::new(format!("model_{i}"), 70.0 + i as f64, dets)
        })
        .collect();
    (gts, models)
}

pub fn dataset(gts: &[GroundTruthInstance]) -> DatasetFile {
    let mut images: Vec<u64> = gts.iter().map(|g| g.image_id).collect();
    images.dedup();
    DatasetFile {
        images: images
            .into_iter()
            .map(|id| ImageInfo {
                id,
                width: SIDE,
                height: SIDE,
                file_name: format!("{id}.png"),
            })
            .collect(),
        annotations: gts
            .iter()
            .enumerate()
            .map(|(i, g)| Annotation {
                id: i as u64 + 1,
                image_id: g.image_id,
                category_id: g.category_id,
                segmentation: Segmentation::Rle(RleJson::from_mask(&g.mask)),
                area: g.area as f64,
                bbox: g.bbox,
            })
            .collect(),
        categories: vec![Category {
            id: 1,
            name: "object".into(),
        }],
    }
}

/// Writes `gt.json` and `model_{0,1,2}.json` into `dir`.
pub fn write_complementary(dir: &Path) {
    let (gts, models) = complementary_models();
    let text = serde_json::to_string_pretty(&dataset(&gts)).unwrap();
    std::fs::write(dir.join("gt.json"), text).unwrap();
    for m in &models {
        ingest::write_results(dir.join(format!("{}.json", m.model_id)), &m.detections).unwrap();
    }
}
