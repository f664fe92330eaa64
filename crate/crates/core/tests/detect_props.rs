//! Property tests for decoding and non-maximum suppression.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use darkgrid_core::detect::{
    decode_head, filter_confidence, iou, nms, BBox, Detection,
};
use darkgrid_core::tensor::{Shape4, Tensor};

fn random_detections(rng: &mut ChaCha8Rng, n: usize, classes: usize) -> Vec<Detection> {
    (0..n)
        .map(|_| {
            let class = rng.gen_range(0..classes);
            let mut scores = vec![0.0; classes];
            scores[class] = rng.gen_range(0.5..1.0);
            // Quantized confidences so ties actually occur.
            let objectness = (rng.gen_range(1..=4) as f64) / 4.0;
            Detection::from_scores(
                BBox::new(
                    rng.gen_range(0.0..1.0),
                    rng.gen_range(0.0..1.0),
                    rng.gen_range(0.01..0.4),
                    rng.gen_range(0.01..0.4),
                ),
                objectness,
                scores,
            )
        })
        .collect()
}

/// Reference suppression: lowest-index-first among equal confidences, keep
/// unless an already kept same-class detection overlaps beyond the
/// threshold. Output sorted by confidence descending then original index.
fn nms_reference(dets: &[Detection], threshold: f64) -> Vec<Detection> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| {
        dets[b]
            .confidence
            .total_cmp(&dets[a].confidence)
            .then(a.cmp(&b))
    });
    let mut kept: Vec<usize> = Vec::new();
    'outer: for &i in &order {
        for &k in &kept {
            if dets[k].best_class == dets[i].best_class
                && iou(&dets[k].bbox, &dets[i].bbox) > threshold
            {
                continue 'outer;
            }
        }
        kept.push(i);
    }
    kept.into_iter().map(|i| dets[i].clone()).collect()
}

fn contains(haystack: &[Detection], needle: &Detection) -> bool {
    haystack.iter().any(|d| d == needle)
}

#[test]
fn nms_properties_on_two_hundred_random_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x4e4d53);
    for case in 0..200 {
        let n = rng.gen_range(0..30);
        let classes = rng.gen_range(1..=3);
        let threshold = rng.gen_range(0.0..1.0);
        let dets = random_detections(&mut rng, n, classes);

        let kept = nms(&dets, threshold);

        // Subset of the input.
        assert!(kept.iter().all(|d| contains(&dets, d)), "case {case}");
        // Pairwise same-class IoU does not exceed the threshold.
        for (i, a) in kept.iter().enumerate() {
            for b in &kept[i + 1..] {
                if a.best_class == b.best_class {
                    assert!(
                        iou(&a.bbox, &b.bbox) <= threshold,
                        "case {case}: survivors overlap"
                    );
                }
            }
        }
        // Idempotent.
        assert_eq!(nms(&kept, threshold), kept, "case {case}");
        // Deterministic, and equal to the reference rule.
        assert_eq!(nms(&dets, threshold), kept, "case {case}");
        assert_eq!(nms_reference(&dets, threshold), kept, "case {case}");
    }
}

#[test]
fn nms_resolves_equal_confidence_by_original_index() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x544945);
    for _ in 0..50 {
        let mut dets = random_detections(&mut rng, 12, 2);
        // Force heavy ties.
        for d in dets.iter_mut() {
            d.confidence = 0.5;
        }
        let threshold = 0.3;
        let kept = nms(&dets, threshold);
        assert_eq!(kept, nms_reference(&dets, threshold));

        // A permuted input is a different problem instance, but the result
        // must still follow the documented rule exactly.
        dets.reverse();
        let kept_rev = nms(&dets, threshold);
        assert_eq!(kept_rev, nms_reference(&dets, threshold));
    }
}

#[test]
fn decode_emits_exactly_cells_times_anchors() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for &(s, b, classes) in &[(1usize, 1usize, 1usize), (5, 3, 2), (13, 3, 1), (8, 2, 4)] {
        let shape = Shape4::new(1, b * (5 + classes), s, s);
        let data: Vec<f32> = (0..shape.len()).map(|_| rng.gen_range(-15.0..15.0)).collect();
        let raw = Tensor::new(shape, data).unwrap();
        let anchors: Vec<(f32, f32)> = (0..b).map(|i| (8.0 + i as f32, 12.0)).collect();
        let dets = decode_head(&raw, &anchors, classes, 416, 416).unwrap();
        assert_eq!(dets.len(), s * s * b);
        for d in &dets {
            assert!(d.bbox.cx.is_finite() && d.bbox.cy.is_finite());
            assert!(d.bbox.w > 0.0 && d.bbox.h > 0.0);
            assert!(d.objectness > 0.0 && d.objectness < 1.0);
            assert!(d
                .class_scores
                .iter()
                .all(|&s| s > 0.0 && s < 1.0));
            assert!(d.confidence <= d.objectness);
        }
    }
}

#[test]
fn decode_is_monotone_in_width_and_objectness_logits() {
    let base = Tensor::zeros(Shape4::new(1, 6, 1, 1));
    let anchors = [(32.0f32, 32.0f32)];
    let with = |ch: usize, v: f32| {
        let mut data = base.data().to_vec();
        data[ch] = v;
        Tensor::new(base.shape(), data).unwrap()
    };
    let mut prev_w = 0.0;
    let mut prev_obj = 0.0;
    for (i, t) in [-6.0f32, -1.0, 0.0, 0.5, 2.0, 7.0].iter().enumerate() {
        let d_w = decode_head(&with(2, *t), &anchors, 1, 416, 416).unwrap();
        let d_o = decode_head(&with(4, *t), &anchors, 1, 416, 416).unwrap();
        if i > 0 {
            assert!(d_w[0].bbox.w > prev_w, "width must grow with t_w");
            assert!(d_o[0].objectness > prev_obj, "objectness must grow with t_o");
        }
        prev_w = d_w[0].bbox.w;
        prev_obj = d_o[0].objectness;
    }
}

#[test]
fn iou_is_symmetric_and_one_on_itself() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..200 {
        let a = BBox::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(0.01..3.0),
            rng.gen_range(0.01..3.0),
        );
        let b = BBox::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(0.01..3.0),
            rng.gen_range(0.01..3.0),
        );
        let ab = iou(&a, &b);
        assert_eq!(ab, iou(&b, &a));
        assert!((0.0..=1.0).contains(&ab));
        assert!((iou(&a, &a) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn best_class_is_invariant_under_positive_scaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..100 {
        let scores: Vec<f64> = (0..rng.gen_range(1..6)).map(|_| rng.gen_range(0.0..1.0)).collect();
        let scale = rng.gen_range(0.01..10.0);
        let a = Detection::from_scores(BBox::new(0.5, 0.5, 0.1, 0.1), 0.9, scores.clone());
        let scaled: Vec<f64> = scores.iter().map(|s| s * scale).collect();
        let b = Detection::from_scores(BBox::new(0.5, 0.5, 0.1, 0.1), 0.9, scaled);
        assert_eq!(a.best_class, b.best_class);
    }
}

#[test]
fn filter_is_a_stable_subset() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let dets = random_detections(&mut rng, 40, 2);
    let kept = filter_confidence(dets.clone(), 0.4);
    assert!(kept.iter().all(|d| d.confidence > 0.4));
    let mut cursor = 0;
    for d in &dets {
        if cursor < kept.len() && kept[cursor] == *d {
            cursor += 1;
        }
    }
    assert_eq!(cursor, kept.len(), "order must be preserved");
}
