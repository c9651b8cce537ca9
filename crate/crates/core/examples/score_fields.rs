// Sampling, resizing and thresholding logit grids.
//
// Coordinates are normalized so that (0, 0) and (1, 1) are the centers of
// the corner pixels.
//
// cargo run --example score_fields

use segkit::mask::{bilinear_sample, binarize, ScoreField};

pub fn run_example() -> segkit::Result<ScoreField> {
    let field = ScoreField::new(3, 2, vec![-4.0, 0.0, 4.0, -2.0, 2.0, 6.0])?;

    for (u, v) in [(0.0, 0.0), (0.5, 0.0), (0.25, 0.5), (1.0, 1.0)] {
        println!("sample({u}, {v}) = {}", bilinear_sample(&field, u, v)?);
    }
    assert!(bilinear_sample(&field, 1.5, 0.0).is_err());

    let big = field.resize(5, 3)?;
    for row in big.logits().chunks(big.width()) {
        println!("{row:5.1?}");
    }
    let mask = binarize(&big, 0.0);
    println!("foreground pixels above 0: {}", mask.area());
    Ok(big)
}

fn main() -> segkit::Result<()> {
    run_example().map(|_| ())
}
