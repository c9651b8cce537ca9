// Horizontal-flip test-time augmentation: predictions on the mirrored image
// are mirrored back and averaged with the direct prediction.
//
// cargo run --example flip_tta

use segkit::mask::ScoreField;
use segkit::refine::flip_fuse;

pub fn run_example() -> segkit::Result<ScoreField> {
    // a "model" with a slight left bias
    let predict = |img: &ScoreField| -> segkit::Result<ScoreField> {
        let w = img.width();
        ScoreField::from_fn(w, img.height(), |c, r| img.get(c, r) + 0.5 - c as f64 / (w - 1) as f64)
    };
    let image = ScoreField::from_fn(6, 2, |c, _| if (2..4).contains(&c) { 3.0 } else { -3.0 })?;

    let direct = predict(&image)?;
    let flipped = predict(&image.mirror_horizontal())?;
    let fused = flip_fuse(&direct, &flipped)?;

    println!("direct {:?}", &direct.logits()[..6]);
    println!("fused  {:?}", &fused.logits()[..6]);
    // the bias cancels, so the fused row is symmetric
    let row = &fused.logits()[..6];
    assert!((0..3).all(|i| (row[i] - row[5 - i]).abs() < 1e-12));
    Ok(fused)
}

fn main() -> segkit::Result<()> {
    run_example().map(|_| ())
}
