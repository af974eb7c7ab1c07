use rayon::prelude::*;

use super::ap::average_precision;
use super::matching::{match_detections, GroundTruth};
use crate::decode::Detection;

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn coco_thresholds() -> Vec<f64> {
    (0..10).map(|i| 0.5 + 0.05 * i as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapResult {
    pub thresholds: Vec<f64>,
    /// `ap[t][c]`: AP of class `c` at `thresholds[t]`; `None` when undefined.
    pub ap: Vec<Vec<Option<f64>>>,
    /// Mean of the defined per-class APs at each threshold.
    pub map: Vec<f64>,
}

impl MapResult {
    /// Mean over all thresholds of the per-threshold mAP.
    pub fn mean_map(&self) -> f64 {
        mean(self.map.iter().copied()).unwrap_or(0.0)
    }

    /// Per-class AP averaged over thresholds.
    pub fn class_mean_ap(&self) -> Vec<Option<f64>> {
        let nc = self.ap.first().map_or(0, Vec::len);
        (0..nc)
            .map(|c| {
                let vals: Option<Vec<f64>> = self.ap.iter().map(|row| row[c]).collect();
                vals.and_then(|v| mean(v.into_iter()))
            })
            .collect()
    }
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Stable descending-score order of one image's predictions.
fn score_order(preds: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[b].score.total_cmp(&preds[a].score));
    order
}

/// Per-class AP and mAP at each IoU threshold over a set of images.
///
/// Predictions from all images are ranked together by score; equal scores
/// keep image order, then in-image order. Classes outside `0..nc` are ignored.
pub fn map_at(
    preds_by_image: &[Vec<Detection>],
    gts_by_image: &[Vec<GroundTruth>],
    nc: usize,
    thresholds: &[f64],
) -> MapResult {
    assert_eq!(preds_by_image.len(), gts_by_image.len(), "one prediction list per image");
    let mut n_gt = vec![0usize; nc];
    for g in gts_by_image.iter().flatten().filter(|g| g.class_id < nc) {
        n_gt[g.class_id] += 1;
    }

    // Global ranking: (score, image, position in the image's score order).
    let orders: Vec<Vec<usize>> = preds_by_image.iter().map(|p| score_order(p)).collect();
    let mut ranking: Vec<(usize, usize)> = orders
        .iter()
        .enumerate()
        .flat_map(|(img, order)| (0..order.len()).map(move |k| (img, k)))
        .collect();
    ranking.sort_by(|a, b| {
        let sa = preds_by_image[a.0][orders[a.0][a.1]].score;
        let sb = preds_by_image[b.0][orders[b.0][b.1]].score;
        sb.total_cmp(&sa)
    });

    let per_threshold: Vec<(Vec<Option<f64>>, f64)> = thresholds
        .iter()
        .map(|&thr| {
            let matches: Vec<Vec<bool>> = preds_by_image
                .par_iter()
                .zip(gts_by_image.par_iter())
                .zip(orders.par_iter())
                .map(|((preds, gts), order)| {
                    let sorted: Vec<Detection> = order.iter().map(|&i| preds[i]).collect();
                    let gts: Vec<GroundTruth> = gts.iter().copied().filter(|g| g.class_id < nc).collect();
                    match_detections(&sorted, &gts, thr)
                        .pred_matches
                        .iter()
                        .map(Option::is_some)
                        .collect()
                })
                .collect();
            let mut flags: Vec<Vec<bool>> = vec![Vec::new(); nc];
            for &(img, k) in &ranking {
                let class_id = preds_by_image[img][orders[img][k]].class_id;
                if class_id < nc {
                    flags[class_id].push(matches[img][k]);
                }
            }
            let ap: Vec<Option<f64>> = (0..nc).map(|c| average_precision(&flags[c], n_gt[c])).collect();
            let map = mean(ap.iter().flatten().copied()).unwrap_or(0.0);
            (ap, map)
        })
        .collect();

    let (ap, map) = per_threshold.into_iter().unzip();
    MapResult {
        thresholds: thresholds.to_vec(),
        ap,
        map,
    }
}
