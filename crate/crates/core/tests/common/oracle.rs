//! Reference implementations written from the definitions, sharing no code
//! with the library beyond its plain data types.

use std::cmp::Ordering;

use msl_core::decode::Detection;
use msl_core::eval::GroundTruth;
use msl_core::geometry::PixelBox;

/// Intersection over union from the textbook formula.
pub fn iou(a: &PixelBox, b: &PixelBox) -> f64 {
    let iw = a.x2.min(b.x2) - a.x1.max(b.x1);
    let ih = a.y2.min(b.y2) - a.y1.max(b.y1);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// IoU by rasterizing integer boxes on a 1000 x 1000 grid and counting cells.
pub fn raster_iou(a: [u32; 4], b: [u32; 4]) -> f64 {
    const N: usize = 1000;
    const WORDS: usize = N.div_ceil(64);
    let mask = |x1: u32, x2: u32| {
        let mut m = [0u64; WORDS];
        for x in x1..x2 {
            m[x as usize / 64] |= 1 << (x % 64);
        }
        m
    };
    let (ma, mb) = (mask(a[0], a[2]), mask(b[0], b[2]));
    let (mut inter, mut union) = (0u64, 0u64);
    for y in 0..N as u32 {
        let in_a = (a[1]..a[3]).contains(&y);
        let in_b = (b[1]..b[3]).contains(&y);
        for w in 0..WORDS {
            let ra = if in_a { ma[w] } else { 0 };
            let rb = if in_b { mb[w] } else { 0 };
            inter += (ra & rb).count_ones() as u64;
            union += (ra | rb).count_ones() as u64;
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn priority(a: &Detection, b: &Detection) -> Ordering {
    // higher score, lower class, then lexicographic box
    match b.score.partial_cmp(&a.score).unwrap() {
        Ordering::Equal => {}
        o => return o,
    }
    match a.class_id.cmp(&b.class_id) {
        Ordering::Equal => {}
        o => return o,
    }
    let ka = [a.bbox.x1, a.bbox.y1, a.bbox.x2, a.bbox.y2];
    let kb = [b.bbox.x1, b.bbox.y1, b.bbox.x2, b.bbox.y2];
    ka.partial_cmp(&kb).unwrap()
}

/// Suppression by marking: every surviving box removes all lower-priority
/// boxes it overlaps at or above the threshold.
pub fn brute_force_nms(dets: &[Detection], iou_thr: f64, class_aware: bool, max: usize) -> Vec<Detection> {
    let mut sorted = dets.to_vec();
    sorted.sort_by(priority);
    let n = sorted.len();
    let mut suppressed = vec![false; n];
    for i in 0..n {
        if suppressed[i] {
            continue;
        }
        for j in i + 1..n {
            let same = !class_aware || sorted[i].class_id == sorted[j].class_id;
            if same && iou(&sorted[i].bbox, &sorted[j].bbox) >= iou_thr {
                suppressed[j] = true;
            }
        }
    }
    sorted
        .into_iter()
        .zip(suppressed)
        .filter(|(_, s)| !s)
        .map(|(d, _)| d)
        .take(max)
        .collect()
}

/// Same-class greedy matching: full IoU table first, then claims in order.
pub fn brute_force_match(preds: &[Detection], gts: &[GroundTruth], thr: f64) -> Vec<Option<usize>> {
    let table: Vec<Vec<f64>> = preds
        .iter()
        .map(|p| gts.iter().map(|g| if g.class_id == p.class_id { iou(&p.bbox, &g.bbox) } else { -1.0 }).collect())
        .collect();
    let mut taken = vec![false; gts.len()];
    table
        .iter()
        .map(|row| {
            let mut best: Option<usize> = None;
            for (g, &v) in row.iter().enumerate() {
                if taken[g] || v < thr {
                    continue;
                }
                if best.is_none_or(|b| v > row[b]) {
                    best = Some(g);
                }
            }
            if let Some(g) = best {
                taken[g] = true;
            }
            best
        })
        .collect()
}

/// AP as (1 / n_gt) * sum over j = 1..n_gt of the best precision reached at
/// recall >= j / n_gt, i.e. at a rank with at least j true positives.
pub fn staircase_ap(flags: &[bool], n_gt: usize) -> Option<f64> {
    if n_gt == 0 {
        return if flags.is_empty() { None } else { Some(0.0) };
    }
    let mut tp = 0;
    let ranks: Vec<(usize, f64)> = flags
        .iter()
        .enumerate()
        .map(|(i, &f)| {
            tp += f as usize;
            (tp, tp as f64 / (i + 1) as f64)
        })
        .collect();
    let sum: f64 = (1..=n_gt)
        .map(|j| ranks.iter().filter(|(t, _)| *t >= j).map(|(_, p)| *p).fold(0.0, f64::max))
        .sum();
    Some(sum / n_gt as f64)
}

pub struct OracleMap {
    /// Per threshold, per class.
    pub ap: Vec<Vec<Option<f64>>>,
    pub map: Vec<f64>,
}

/// Class by class: rank that class's predictions over all images, match each
/// against its own image, and score the ranking.
pub fn brute_force_map(
    preds: &[Vec<Detection>],
    gts: &[Vec<GroundTruth>],
    nc: usize,
    thresholds: &[f64],
) -> OracleMap {
    let mut ap = Vec::new();
    let mut map = Vec::new();
    for &thr in thresholds {
        let mut row = Vec::new();
        for c in 0..nc {
            let mut ranked: Vec<(f64, usize, usize, PixelBox)> = Vec::new();
            for (img, ps) in preds.iter().enumerate() {
                for (k, p) in ps.iter().enumerate().filter(|(_, p)| p.class_id == c) {
                    ranked.push((p.score, img, k, p.bbox));
                }
            }
            ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            let mut claimed: Vec<Vec<bool>> = gts.iter().map(|g| vec![false; g.len()]).collect();
            let mut flags = Vec::new();
            for (_, img, _, bbox) in ranked {
                let mut best: Option<(usize, f64)> = None;
                for (gi, g) in gts[img].iter().enumerate() {
                    if g.class_id != c || claimed[img][gi] {
                        continue;
                    }
                    let v = iou(&bbox, &g.bbox);
                    if v >= thr && best.is_none_or(|(_, b)| v > b) {
                        best = Some((gi, v));
                    }
                }
                if let Some((gi, _)) = best {
                    claimed[img][gi] = true;
                }
                flags.push(best.is_some());
            }
            let n_gt = gts.iter().flatten().filter(|g| g.class_id == c).count();
            row.push(staircase_ap(&flags, n_gt));
        }
        let defined: Vec<f64> = row.iter().flatten().copied().collect();
        map.push(if defined.is_empty() { 0.0 } else { defined.iter().sum::<f64>() / defined.len() as f64 });
        ap.push(row);
    }
    OracleMap { ap, map }
}

/// Confusion counts by repeatedly taking the globally best remaining pair.
pub fn recount_confusion(
    preds: &[Vec<Detection>],
    gts: &[Vec<GroundTruth>],
    nc: usize,
    conf: f64,
    iou_thr: f64,
) -> Vec<Vec<u64>> {
    let mut m = vec![vec![0u64; nc + 1]; nc + 1];
    for (ps, gs) in preds.iter().zip(gts) {
        let ps: Vec<&Detection> = ps.iter().filter(|p| p.score >= conf).collect();
        let mut pu = vec![false; ps.len()];
        let mut gu = vec![false; gs.len()];
        loop {
            let mut best: Option<(f64, usize, usize)> = None;
            for (i, p) in ps.iter().enumerate().filter(|(i, _)| !pu[*i]) {
                for (j, g) in gs.iter().enumerate().filter(|(j, _)| !gu[*j]) {
                    let v = iou(&p.bbox, &g.bbox);
                    if v >= iou_thr && best.is_none_or(|(b, _, _)| v > b) {
                        best = Some((v, i, j));
                    }
                }
            }
            let Some((_, i, j)) = best else { break };
            pu[i] = true;
            gu[j] = true;
            m[ps[i].class_id][gs[j].class_id] += 1;
        }
        for g in gs.iter().zip(&gu).filter(|(_, used)| !**used).map(|(g, _)| g) {
            m[nc][g.class_id] += 1;
        }
        for p in ps.iter().zip(&pu).filter(|(_, used)| !**used).map(|(p, _)| p) {
            m[p.class_id][nc] += 1;
        }
    }
    m
}

/// Softmax expectation straight from the definition, no stabilization.
pub fn naive_expectation(logits: &[f64]) -> f64 {
    let e: Vec<f64> = logits.iter().map(|v| v.exp()).collect();
    let total: f64 = e.iter().sum();
    e.iter().enumerate().map(|(k, v)| k as f64 * v).sum::<f64>() / total
}

/// Rotation about `(cx, cy)` via complex multiplication in a y-up frame, so
/// a positive angle turns counter-clockwise on screen.
pub fn rotate_screen_point(x: f64, y: f64, cx: f64, cy: f64, degrees: f64) -> (f64, f64) {
    let t = degrees * std::f64::consts::PI / 180.0;
    let (re, im) = (x - cx, -(y - cy));
    let (c, s) = (t.cos(), t.sin());
    let (rre, rim) = (re * c - im * s, re * s + im * c);
    (cx + rre, cy - rim)
}

/// Presence-window debounce replayed from the full history at every frame.
pub fn caption_spans(presence: &[Option<f64>], window: usize, hits: usize) -> Vec<(usize, usize, f64)> {
    let count_at = |t: usize| presence[(t + 1).saturating_sub(window)..=t].iter().filter(|p| p.is_some()).count();
    let mut spans = Vec::new();
    let mut open: Option<(usize, usize, Vec<f64>)> = None;
    for (t, &present) in presence.iter().enumerate() {
        let k = count_at(t);
        match (&mut open, present) {
            (None, Some(s)) if k >= hits => open = Some((t, t, vec![s])),
            (Some(o), Some(s)) => {
                o.1 = t;
                o.2.push(s);
            }
            _ => {}
        }
        if open.is_some() && 2 * k < hits {
            let (a, b, s) = open.take().unwrap();
            spans.push((a, b, s.iter().sum::<f64>() / s.len() as f64));
        }
    }
    if let Some((a, b, s)) = open {
        spans.push((a, b, s.iter().sum::<f64>() / s.len() as f64));
    }
    spans
}
