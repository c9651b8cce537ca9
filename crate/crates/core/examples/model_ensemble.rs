// Weighting candidate models by validation score and fusing their
// detections.
//
// cargo run --example model_ensemble

use segkit::fusion::{
    ensemble, linear_interpolation_weights, linear_reweight_weights, Detection, EnsembleConfig, ModelCandidate,
};
use segkit::mask::BBox;

pub fn run_example() -> segkit::Result<Vec<Detection>> {
    let scores = [76.95, 77.21, 77.32, 77.37, 77.38];
    println!("interpolated {:.4?}", linear_interpolation_weights(&scores, 0.6, 1.0)?);
    println!("by rank      {:.4?}", linear_reweight_weights(&scores, 0.6, 1.0)?);

    // five models that roughly agree on one object and disagree on a second
    let models: Vec<ModelCandidate> = scores
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let jitter = i as f64 * 0.5;
            let dets = vec![
                Detection::new(1, 1, 0.8, BBox::new(10.0 + jitter, 10.0, 40.0, 40.0)?),
                Detection::new(1, 1, 0.3 + 0.1 * i as f64, BBox::new(80.0, 20.0 + 4.0 * jitter, 20.0, 20.0)?),
            ];
            Ok(ModelCandidate::new(format!("m{i}"), s, dets))
        })
        .collect::<segkit::Result<_>>()?;

    let fused = ensemble(&models, &EnsembleConfig::default())?;
    for d in fused.iter().take(4) {
        println!("{:<3} score {:.4} box {:?}", d.source_model, d.score, d.bbox.as_array());
    }
    println!("{} detections after soft-NMS", fused.len());
    Ok(fused)
}

fn main() -> segkit::Result<()> {
    run_example().map(|_| ())
}
