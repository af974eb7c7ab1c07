mod common;

use common::{gen, oracle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use msl_core::decode::{nms, Detection};
use msl_core::eval::{average_precision, confusion_matrix, evaluate, match_detections, EvalConfig, GroundTruth};
use msl_core::geometry::{iou, PixelBox};

#[test]
fn iou_matches_raster_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let grid_box = |rng: &mut ChaCha8Rng| {
        let x1 = rng.random_range(0..990u32);
        let y1 = rng.random_range(0..990u32);
        [x1, y1, rng.random_range(x1 + 1..=1000), rng.random_range(y1 + 1..=1000)]
    };
    for _ in 0..300 {
        let a = grid_box(&mut rng);
        // half of the pairs are near each other so overlaps are common
        let b = if rng.random_bool(0.5) {
            let s = |v: u32, d: i64| (v as i64 + d).clamp(0, 1000) as u32;
            let d = rng.random_range(-40..40i64);
            let (x1, y1) = (s(a[0], d).min(999), s(a[1], -d).min(999));
            [x1, y1, s(a[2], d).max(x1 + 1), s(a[3], -d).max(y1 + 1)]
        } else {
            grid_box(&mut rng)
        };
        let px = |v: [u32; 4]| PixelBox::new(v[0] as f64, v[1] as f64, v[2] as f64, v[3] as f64);
        let got = iou(&px(a), &px(b));
        let want = oracle::raster_iou(a, b);
        assert!((got - want).abs() < 1e-12, "{a:?} {b:?}: {got} vs {want}");
    }
}

#[test]
fn matching_equals_exhaustive_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..500 {
        let (mut preds, gts) = gen::map_scene(&mut rng);
        let (mut p, g) = (preds.swap_remove(0), &gts[0]);
        p.sort_by(|a, b| b.score.total_cmp(&a.score));
        let got = match_detections(&p, g, 0.5);
        assert_eq!(got.pred_matches, oracle::brute_force_match(&p, g, 0.5));
        assert!(got.true_positives() <= p.len().min(g.len()));
        let claimed: Vec<usize> = got.pred_matches.iter().flatten().copied().collect();
        let mut unique = claimed.clone();
        unique.sort();
        unique.dedup();
        assert_eq!(unique.len(), claimed.len(), "a ground truth was claimed twice");
    }
}

#[test]
fn ap_equals_staircase_on_every_short_sequence() {
    assert!((average_precision(&[true, false, true], 2).unwrap() - 5.0 / 6.0).abs() < 1e-15);
    for len in 0..=10usize {
        for bits in 0u32..(1 << len) {
            let flags: Vec<bool> = (0..len).map(|i| bits & (1 << i) != 0).collect();
            let tp = flags.iter().filter(|f| **f).count();
            for n_gt in tp..=tp + 2 {
                let got = average_precision(&flags, n_gt);
                let want = oracle::staircase_ap(&flags, n_gt);
                match (got, want) {
                    (Some(a), Some(b)) => assert!((a - b).abs() < 1e-12, "{flags:?} {n_gt}: {a} vs {b}"),
                    (a, b) => assert_eq!(a, b),
                }
            }
        }
    }
}

#[test]
fn confusion_matrix_equals_recount() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..500 {
        let (preds, gts) = gen::map_scene(&mut rng);
        let m = confusion_matrix(&preds, &gts, 3, 0.25, 0.45);
        assert_eq!(m.counts, oracle::recount_confusion(&preds, &gts, 3, 0.25, 0.45));
    }
}

#[test]
fn class_agnostic_and_truncated_nms_equal_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..300 {
        let dets = gen::nms_scene(&mut rng);
        let max = rng.random_range(1..20);
        assert_eq!(nms(&dets, 0.5, false, max), oracle::brute_force_nms(&dets, 0.5, false, max));
        assert_eq!(nms(&dets, 0.3, true, 300), oracle::brute_force_nms(&dets, 0.3, true, 300));
    }
}

#[test]
fn evaluate_report_equals_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let names: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
    for _ in 0..100 {
        let (preds, gts) = gen::map_scene(&mut rng);
        let r = evaluate(&preds, &gts, &names, &EvalConfig::default()).unwrap();
        let o = oracle::brute_force_map(&preds, &gts, 3, &msl_core::eval::coco_thresholds());
        assert!((r.map50 - o.map[0]).abs() < 1e-9);
        let mean = o.map.iter().sum::<f64>() / o.map.len() as f64;
        assert!((r.map50_95 - mean).abs() < 1e-9);
        let cols: u64 = (0..3).map(|c| r.confusion.column_sum(c)).sum();
        assert_eq!(cols, r.counts.ground_truths);
    }
}

#[test]
fn perfect_predictions_score_one() {
    let gts: Vec<Vec<GroundTruth>> = (0..4)
        .map(|i| {
            vec![GroundTruth {
                class_id: i % 3,
                bbox: PixelBox::new(10.0 * i as f64, 5.0, 10.0 * i as f64 + 40.0, 60.0),
            }]
        })
        .collect();
    let preds: Vec<Vec<Detection>> = gts
        .iter()
        .map(|g| vec![Detection { bbox: g[0].bbox, class_id: g[0].class_id, score: 0.9 }])
        .collect();
    let names: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
    let r = evaluate(&preds, &gts, &names, &EvalConfig::default()).unwrap();
    assert_eq!((r.map50, r.map50_95), (1.0, 1.0));
    for row in r.confusion.normalized().iter().take(3).enumerate() {
        assert_eq!(row.1[row.0], 1.0);
    }
}
