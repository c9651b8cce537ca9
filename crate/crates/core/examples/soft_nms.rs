// Gaussian, linear and hard suppression of overlapping boxes.
//
// cargo run --example soft_nms

use segkit::fusion::{soft_nms, Detection, NmsMethod, SoftNmsConfig};
use segkit::mask::BBox;

pub fn run_example() -> segkit::Result<Vec<Vec<f64>>> {
    let bbox = |x: f64| BBox::new(x, 0.0, 10.0, 10.0);
    let dets = vec![
        Detection::new(1, 1, 0.9, bbox(0.0)?),
        Detection::new(1, 1, 0.8, bbox(0.0)?),
        Detection::new(1, 1, 0.7, bbox(3.0)?),
        Detection::new(1, 1, 0.6, bbox(30.0)?),
    ];
    let mut all = Vec::new();
    for method in [NmsMethod::Gaussian, NmsMethod::Linear, NmsMethod::Hard] {
        let cfg = SoftNmsConfig {
            method,
            ..SoftNmsConfig::default()
        };
        let scores: Vec<f64> = soft_nms(&dets, &cfg)?.iter().map(|d| d.score).collect();
        println!("{method:?}: {scores:.4?}");
        all.push(scores);
    }
    Ok(all)
}

fn main() -> segkit::Result<()> {
    run_example().map(|_| ())
}
