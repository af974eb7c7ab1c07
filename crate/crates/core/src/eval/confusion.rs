use serde::{Deserialize, Serialize};

use super::matching::GroundTruth;
use crate::decode::Detection;
use crate::geometry::iou;

/// Counts indexed `[predicted][ground truth]`; index `nc` is background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub nc: usize,
    pub conf_threshold: f64,
    pub iou_threshold: f64,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn empty(nc: usize, conf_threshold: f64, iou_threshold: f64) -> Self {
        Self {
            nc,
            conf_threshold,
            iou_threshold,
            counts: vec![vec![0; nc + 1]; nc + 1],
        }
    }

    pub fn background(&self) -> usize {
        self.nc
    }

    pub fn column_sum(&self, gt_class: usize) -> u64 {
        self.counts.iter().map(|row| row[gt_class]).sum()
    }

    pub fn row_sum(&self, pred_class: usize) -> u64 {
        self.counts[pred_class].iter().sum()
    }

    /// Each ground-truth column divided by its sum; empty columns stay zero.
    pub fn normalized(&self) -> Vec<Vec<f64>> {
        let sums: Vec<u64> = (0..=self.nc).map(|c| self.column_sum(c)).collect();
        self.counts
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&sums)
                    .map(|(&v, &s)| if s == 0 { 0.0 } else { v as f64 / s as f64 })
                    .collect()
            })
            .collect()
    }

    fn add_image(&mut self, preds: &[Detection], gts: &[GroundTruth]) {
        let bg = self.nc;
        let preds: Vec<&Detection> = preds.iter().filter(|d| d.score >= self.conf_threshold).collect();
        // Class-agnostic pairs, best overlap first; ties by prediction then GT index.
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for (pi, p) in preds.iter().enumerate() {
            for (gi, g) in gts.iter().enumerate() {
                let overlap = iou(&p.bbox, &g.bbox);
                if overlap >= self.iou_threshold {
                    pairs.push((overlap, pi, gi));
                }
            }
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        let mut pred_used = vec![false; preds.len()];
        let mut gt_used = vec![false; gts.len()];
        for (_, pi, gi) in pairs {
            if pred_used[pi] || gt_used[gi] {
                continue;
            }
            pred_used[pi] = true;
            gt_used[gi] = true;
            self.counts[preds[pi].class_id][gts[gi].class_id] += 1;
        }
        for (g, used) in gts.iter().zip(&gt_used) {
            if !used {
                self.counts[bg][g.class_id] += 1;
            }
        }
        for (p, used) in preds.iter().zip(&pred_used) {
            if !used {
                self.counts[p.class_id][bg] += 1;
            }
        }
    }
}

/// Background-aware confusion matrix over a set of images.
///
/// Predictions scoring below `conf_threshold` are discarded. Remaining
/// predictions and ground truths are paired one-to-one regardless of class,
/// highest IoU first, when IoU is at least `iou_threshold`. All class ids must
/// be below `nc`.
pub fn confusion_matrix(
    preds_by_image: &[Vec<Detection>],
    gts_by_image: &[Vec<GroundTruth>],
    nc: usize,
    conf_threshold: f64,
    iou_threshold: f64,
) -> ConfusionMatrix {
    assert_eq!(preds_by_image.len(), gts_by_image.len(), "one prediction list per image");
    let mut m = ConfusionMatrix::empty(nc, conf_threshold, iou_threshold);
    for (preds, gts) in preds_by_image.iter().zip(gts_by_image) {
        m.add_image(preds, gts);
    }
    m
}
