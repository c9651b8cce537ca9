// Mask AP of a small results list against a COCO-style dataset.
//
// cargo run --example evaluate_masks

use std::path::Path;

use segkit::evalmap::{evaluate, EvalConfig, MetricReport};
use segkit::fusion::Detection;
use segkit::ingest::{parse_dataset, rasterize_polygon, results_to_json};
use segkit::mask::{rle_encode, BBox};

const DATASET: &str = r#"{
  "images": [{"id": 1, "width": 16, "height": 16}, {"id": 2, "width": 16, "height": 16}],
  "categories": [{"id": 1, "name": "sofa"}, {"id": 2, "name": "table"}],
  "annotations": [
    {"id": 1, "image_id": 1, "category_id": 1, "bbox": [2, 2, 8, 8],
     "segmentation": [[2, 2, 10, 2, 10, 10, 2, 10]]},
    {"id": 2, "image_id": 2, "category_id": 1, "bbox": [4, 4, 8, 4],
     "segmentation": [[4, 4, 12, 4, 12, 8, 4, 8]]},
    {"id": 3, "image_id": 2, "category_id": 2, "bbox": [0, 10, 6, 6],
     "segmentation": [[0, 10, 6, 10, 6, 16, 0, 16]]}
  ]
}"#;

fn detection(image: u64, category: u64, score: f64, x: f64, y: f64, w: f64, h: f64) -> segkit::Result<Detection> {
    let square = [(x, y), (x + w, y), (x + w, y + h), (x, y + h)];
    let mask = rasterize_polygon(&square, 16, 16)?;
    Ok(Detection::new(image, category, score, BBox::new(x, y, w, h)?).with_mask(rle_encode(&mask)))
}

pub fn run_example() -> segkit::Result<MetricReport> {
    let gts = parse_dataset(Path::new("dataset.json"), DATASET)?.ground_truth()?;
    let dets = vec![
        detection(1, 1, 0.95, 2.0, 2.0, 8.0, 8.0)?,
        // slightly too wide: IoU 32/40 = 0.8
        detection(2, 1, 0.60, 4.0, 4.0, 10.0, 4.0)?,
        detection(2, 1, 0.80, 10.0, 10.0, 4.0, 4.0)?,
        detection(2, 2, 0.70, 0.0, 10.0, 6.0, 6.0)?,
        // no ground truth for category 3, so it is reported and left out of the means
        detection(1, 3, 0.50, 12.0, 12.0, 2.0, 2.0)?,
    ];
    println!("{}", results_to_json(&dets[..1])?);

    let report = evaluate(&gts, &dets, &EvalConfig::default())?;
    print!("{}", report.to_text());
    Ok(report)
}

fn main() -> segkit::Result<()> {
    run_example().map(|_| ())
}
