// Box-size histogram and median object size of a dataset sample.
//
// cargo run --example size_distribution

use segkit::ingest::{median_sqrt_area, sample_boxes, size_histogram, Annotation, DatasetFile, ImageInfo, Segmentation};
use segkit::mask::{size_bucket, BBox};

pub fn run_example() -> segkit::Result<f64> {
    let images = (1..=40)
        .map(|id| ImageInfo {
            id,
            width: 640,
            height: 480,
            file_name: String::new(),
        })
        .collect();
    let annotations = (1..=40u64)
        .map(|id| {
            let side = 20.0 + 9.0 * id as f64;
            Ok(Annotation {
                id,
                image_id: id,
                category_id: 1,
                segmentation: Segmentation::Polygons(vec![vec![0.0, 0.0, side, 0.0, side, side]]),
                area: 0.0,
                bbox: BBox::new(0.0, 0.0, side, side.min(470.0))?,
            })
        })
        .collect::<segkit::Result<_>>()?;
    let data = DatasetFile {
        images,
        annotations,
        categories: vec![segkit::ingest::Category { id: 1, name: "box".into() }],
    };

    let boxes = sample_boxes(&data, 25, 42);
    let hist = size_histogram(&boxes, 50.0)?;
    print!("{}", hist.to_csv());
    let median = median_sqrt_area(&boxes)?;
    println!("median sqrt(area) {median:.1} -> {:?}", size_bucket(median * median));
    Ok(median)
}

fn main() -> segkit::Result<()> {
    run_example().map(|_| ())
}
