use serde::{Deserialize, Serialize};

use crate::decode::Detection;
use crate::geometry::{iou, PixelBox};

/// Ground-truth object in source-image pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub class_id: usize,
    pub bbox: PixelBox,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    /// Matched ground-truth index per prediction; `None` is a false positive.
    pub pred_matches: Vec<Option<usize>>,
    /// Matching prediction per ground truth; `None` is a miss.
    pub gt_matches: Vec<Option<usize>>,
    pub iou_threshold: f64,
}

impl MatchResult {
    pub fn true_positives(&self) -> usize {
        self.pred_matches.iter().filter(|m| m.is_some()).count()
    }
}

/// Greedy same-class matching. Predictions must be ordered by descending
/// score; each one claims the unclaimed ground truth of its class with the
/// highest IoU at or above `iou_threshold` (lowest index on ties).
pub fn match_detections(preds: &[Detection], gts: &[GroundTruth], iou_threshold: f64) -> MatchResult {
    debug_assert!(preds.windows(2).all(|w| w[0].score >= w[1].score), "predictions must be sorted by score");
    let mut gt_matches = vec![None; gts.len()];
    let mut pred_matches = Vec::with_capacity(preds.len());
    for (pi, p) in preds.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (gi, g) in gts.iter().enumerate() {
            if g.class_id != p.class_id || gt_matches[gi].is_some() {
                continue;
            }
            let overlap = iou(&p.bbox, &g.bbox);
            if overlap >= iou_threshold && best.is_none_or(|(_, b)| overlap > b) {
                best = Some((gi, overlap));
            }
        }
        if let Some((gi, _)) = best {
            gt_matches[gi] = Some(pi);
        }
        pred_matches.push(best.map(|(gi, _)| gi));
    }
    MatchResult {
        pred_matches,
        gt_matches,
        iou_threshold,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(x: f64, class_id: usize, score: f64) -> Detection {
        Detection {
            bbox: PixelBox::new(x, 0.0, x + 10.0, 10.0),
            class_id,
            score,
        }
    }

    fn gt(x: f64, class_id: usize) -> GroundTruth {
        GroundTruth {
            class_id,
            bbox: PixelBox::new(x, 0.0, x + 10.0, 10.0),
        }
    }

    #[test]
    fn exact_hit() {
        let m = match_detections(&[det(0.0, 1, 0.9)], &[gt(0.0, 1)], 0.5);
        assert_eq!(m.pred_matches, vec![Some(0)]);
        assert_eq!(m.gt_matches, vec![Some(0)]);
    }

    #[test]
    fn single_claim() {
        let m = match_detections(&[det(0.0, 1, 0.9), det(1.0, 1, 0.8)], &[gt(0.0, 1)], 0.5);
        assert_eq!(m.pred_matches, vec![Some(0), None]);
        assert_eq!(m.true_positives(), 1);
    }

    #[test]
    fn class_must_agree() {
        let m = match_detections(&[det(0.0, 2, 0.9)], &[gt(0.0, 1)], 0.5);
        assert_eq!(m.pred_matches, vec![None]);
        assert_eq!(m.gt_matches, vec![None]);
    }

    #[test]
    fn claims_best_unclaimed() {
        // First prediction overlaps both ground truths, prefers the closer one.
        let preds = [det(4.0, 0, 0.9), det(0.0, 0, 0.8)];
        let gts = [gt(0.0, 0), gt(5.0, 0)];
        let m = match_detections(&preds, &gts, 0.5);
        assert_eq!(m.pred_matches, vec![Some(1), Some(0)]);
    }
}
