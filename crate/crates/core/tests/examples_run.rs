macro_rules! example {
    ($module:ident, $file:literal) => {
        #[allow(dead_code)]
        mod $module {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }
    };
}

example!(render_shapes, "render_shapes.rs");
example!(score_fields, "score_fields.rs");
example!(flip_tta, "flip_tta.rs");
example!(biased_sampling, "biased_sampling.rs");
example!(mask_codecs, "mask_codecs.rs");
example!(soft_nms, "soft_nms.rs");
example!(model_ensemble, "model_ensemble.rs");
example!(evaluate_masks, "evaluate_masks.rs");
example!(size_distribution, "size_distribution.rs");

#[test]
fn render_shapes_improves_with_k() {
    let rows = render_shapes::run_example().unwrap();
    assert!(rows.windows(2).all(|w| w[0].1 <= w[1].1), "{rows:?}");
    assert!(rows[3].1 > rows[0].1);
}

#[test]
fn score_fields_runs() {
    let big = score_fields::run_example().unwrap();
    assert_eq!(big.logits()[7], 1.0);
}

#[test]
fn flip_tta_runs() {
    flip_tta::run_example().unwrap();
}

#[test]
fn biased_sampling_prefers_the_boundary() {
    assert!(biased_sampling::run_example().unwrap() > 0.2);
}

#[test]
fn mask_codecs_runs() {
    assert!(!mask_codecs::run_example().unwrap().is_empty());
}

#[test]
fn soft_nms_runs() {
    let all = soft_nms::run_example().unwrap();
    // the duplicate decays once against the top box, then again against the shifted one
    let shifted = (-(7.0f64 / 13.0).powi(2) / 0.5).exp();
    assert!((all[0][3] - 0.8 * (-2.0f64).exp() * shifted).abs() < 1e-12);
    assert_eq!(all[2].len(), 2);
}

#[test]
fn model_ensemble_runs() {
    let fused = model_ensemble::run_example().unwrap();
    assert!(fused.windows(2).all(|w| w[0].score >= w[1].score));
}

#[test]
fn evaluate_masks_runs() {
    let report = evaluate_masks::run_example().unwrap();
    assert_eq!(report.categories_without_gt, vec![3]);
    let cat1 = (7.0 * (51.0 + 50.0 * 2.0 / 3.0) + 3.0 * 51.0) / 1010.0;
    assert!((report.per_category[&1] - cat1).abs() < 1e-12);
}

#[test]
fn size_distribution_runs() {
    assert!(size_distribution::run_example().unwrap() > 0.0);
}
