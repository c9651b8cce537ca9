// Training-time point selection that favours uncertain regions.
//
// cargo run --example biased_sampling

use segkit::refine::{biased_point_sample, SyntheticShape, TrainSampleConfig};

pub fn run_example() -> segkit::Result<f64> {
    let disk = SyntheticShape::Disk { cx: 0.5, cy: 0.5, r: 0.3 };
    let field = disk.coarse_field(14)?;
    let near_edge = |pts: &[(f64, f64)]| {
        let close = pts.iter().filter(|&&(u, v)| disk.signed_distance(u, v).abs() < 0.05).count();
        close as f64 / pts.len() as f64
    };

    let uniform = biased_point_sample(&field, &TrainSampleConfig::new(196, 1, 0.0, 7))?;
    let biased = biased_point_sample(&field, &TrainSampleConfig::new(196, 3, 0.75, 7))?;
    println!("points within 0.05 of the boundary: uniform {:.2}, biased {:.2}", near_edge(&uniform), near_edge(&biased));
    Ok(near_edge(&biased) - near_edge(&uniform))
}

fn main() -> segkit::Result<()> {
    run_example().map(|_| ())
}
