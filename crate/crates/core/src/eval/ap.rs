/// All-points interpolated average precision.
///
/// `tp_flags` are the true-positive flags of one class's predictions in
/// descending score order. Returns `None` when the class has neither ground
/// truth nor predictions, `Some(0.0)` for predictions without ground truth.
pub fn average_precision(tp_flags: &[bool], n_gt: usize) -> Option<f64> {
    if n_gt == 0 {
        return if tp_flags.is_empty() { None } else { Some(0.0) };
    }
    let mut tp = 0usize;
    let mut points = Vec::with_capacity(tp_flags.len());
    for (i, &hit) in tp_flags.iter().enumerate() {
        tp += hit as usize;
        points.push((tp as f64 / n_gt as f64, tp as f64 / (i + 1) as f64, hit));
    }
    // Monotone envelope: best precision at this recall or any later one.
    let mut envelope = 0.0f64;
    for p in points.iter_mut().rev() {
        envelope = envelope.max(p.1);
        p.1 = envelope;
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for &(recall, precision, hit) in &points {
        if hit {
            ap += (recall - prev_recall) * precision;
            prev_recall = recall;
        }
    }
    Some(ap.clamp(0.0, 1.0))
}
