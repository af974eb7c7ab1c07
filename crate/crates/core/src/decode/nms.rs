use std::cmp::Ordering;
use std::collections::HashMap;

use super::head::Detection;
use crate::geometry::{iou, PixelBox};

/// Total order used for suppression: score descending, then lower class id,
/// then lower `x1`, with the remaining coordinates as final tie-breaks.
pub fn suppression_order(a: &Detection, b: &Detection) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then(a.class_id.cmp(&b.class_id))
        .then(a.bbox.x1.total_cmp(&b.bbox.x1))
        .then(a.bbox.y1.total_cmp(&b.bbox.y1))
        .then(a.bbox.x2.total_cmp(&b.bbox.x2))
        .then(a.bbox.y2.total_cmp(&b.bbox.y2))
}

/// Greedy non-maximum suppression.
///
/// A detection survives when its IoU with every already-kept detection of the
/// same class (any class when `class_aware` is false) is below `iou_threshold`.
/// The result is in suppression order and holds at most `max_detections` items.
pub fn nms(dets: &[Detection], iou_threshold: f64, class_aware: bool, max_detections: usize) -> Vec<Detection> {
    let mut order: Vec<&Detection> = dets.iter().collect();
    order.sort_by(|a, b| suppression_order(a, b));

    let mut kept: Vec<Detection> = Vec::new();
    let mut by_class: HashMap<usize, Vec<PixelBox>> = HashMap::new();
    for det in order {
        if kept.len() >= max_detections {
            break;
        }
        let bucket = by_class.entry(if class_aware { det.class_id } else { 0 }).or_default();
        if bucket.iter().all(|k| iou(k, &det.bbox) < iou_threshold) {
            bucket.push(det.bbox);
            kept.push(*det);
        }
    }
    kept
}
