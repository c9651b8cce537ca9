// Renders a 7x7 coarse disk to 224x224 with adaptive subdivision and
// compares it with plain bilinear upsampling.
//
// cargo run --example render_shapes

use segkit::mask::{binarize, mask_iou};
use segkit::refine::{subdivision_render, OracleFieldPredictor, SubdivisionConfig, SyntheticShape};

pub fn run_example() -> segkit::Result<Vec<(usize, f64)>> {
    let disk = SyntheticShape::Disk { cx: 0.5, cy: 0.5, r: 0.3 };
    let truth = disk.ground_truth_mask(224);
    let coarse = disk.coarse_field(7)?;

    let plain = binarize(&coarse.resize(224, 224)?, 0.0);
    let mut rows = vec![(0, mask_iou(&plain, &truth)?)];
    println!("bilinear       IoU {:.4}", rows[0].1);

    // the oracle answers every query from the full-resolution field
    let predictor = OracleFieldPredictor::new(disk.ground_truth_field(224)?);
    for k in [7, 14, 28] {
        let cfg = SubdivisionConfig {
            subdivision_k: k,
            ..SubdivisionConfig::default()
        };
        let rendered = subdivision_render(&coarse, &predictor, &cfg)?;
        let iou = mask_iou(&binarize(&rendered, 0.0), &truth)?;
        println!("k = {k:2} ({:4} points/step) IoU {iou:.4}", cfg.points_per_step());
        rows.push((k, iou));
    }
    Ok(rows)
}

fn main() -> segkit::Result<()> {
    run_example().map(|_| ())
}
