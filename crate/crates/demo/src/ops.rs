//! The three demo operations as plain functions over JSON-shaped types, so
//! they can be tested natively.

use serde::{Deserialize, Serialize};

use msl_core::dataset::augment::{rotate_box, rotate_point};
use msl_core::decode::synth::{plant_raw, PlantedObject, SynthLayout};
use msl_core::decode::{decode_raw, make_grid, nms, Detection, DEFAULT_STRIDES};
use msl_core::eval::{average_precision, match_detections, GroundTruth};
use msl_core::geometry::{letterbox_params, norm_to_pixel, pixel_to_norm, unmap_box, PixelBox};

#[derive(Debug, Clone, Deserialize)]
pub struct SceneObject {
    /// `[x1, y1, x2, y2]` in source pixels.
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    #[serde(rename = "class")]
    pub class_id: usize,
    /// Class score the head should produce, in (0, 1).
    pub score: f64,
}

#[derive(Debug, Clone, Deserialize)]
pub struct DecodeRequest {
    pub src_w: u32,
    pub src_h: u32,
    pub input_w: u32,
    pub input_h: u32,
    pub nc: usize,
    pub conf: f64,
    pub iou: f64,
    #[serde(default = "yes")]
    pub class_aware: bool,
    pub objects: Vec<SceneObject>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LetterboxView {
    pub scale: f64,
    pub pad_x: f64,
    pub pad_y: f64,
    pub input_w: u32,
    pub input_h: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    #[serde(rename = "class")]
    pub class_id: usize,
    pub score: f64,
    pub kept: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecodeResponse {
    pub letterbox: LetterboxView,
    pub anchors: usize,
    /// Every candidate above `conf`, in source pixels, highest score first.
    pub candidates: Vec<Candidate>,
}

/// Letterboxes the scene, writes each object into a synthetic raw head, then
/// decodes, suppresses and maps the survivors back to source pixels.
pub fn decode_scene(req: &DecodeRequest) -> Result<DecodeResponse, String> {
    if req.src_w == 0 || req.src_h == 0 {
        return Err("source size must be positive".into());
    }
    if !(req.conf > 0.0 && req.conf < 1.0 && req.iou > 0.0 && req.iou < 1.0) {
        return Err("conf and iou must lie in (0, 1)".into());
    }
    let meta = letterbox_params(req.src_w, req.src_h, req.input_w, req.input_h);
    let mut planted = Vec::with_capacity(req.objects.len());
    for (i, o) in req.objects.iter().enumerate() {
        if o.class_id >= req.nc {
            return Err(format!("object {i}: class {} outside 0..{}", o.class_id, req.nc));
        }
        if !(o.score > 0.0 && o.score < 1.0) {
            return Err(format!("object {i}: score must lie in (0, 1)"));
        }
        let [x1, y1, x2, y2] = o.bbox;
        planted.push(PlantedObject {
            bbox: meta.map_box(&PixelBox::new(x1, y1, x2, y2)),
            class_id: o.class_id,
            logit: (o.score / (1.0 - o.score)).ln() as f32,
        });
    }
    let layout = SynthLayout::new(req.input_w, req.input_h, req.nc);
    let raw = plant_raw(&layout, &planted).map_err(|e| e.to_string())?;
    let grid = make_grid(req.input_w, req.input_h, &DEFAULT_STRIDES).map_err(|e| e.to_string())?;
    let mut candidates = decode_raw(&raw, &grid, req.conf).map_err(|e| e.to_string())?;
    candidates.sort_by(msl_core::decode::nms::suppression_order);
    let kept = nms(&candidates, req.iou, req.class_aware, usize::MAX);

    let candidates = candidates
        .iter()
        .map(|d| Candidate {
            bbox: unmap_box(&d.bbox, &meta).to_array(),
            class_id: d.class_id,
            score: d.score,
            kept: kept.contains(d),
        })
        .collect();
    Ok(DecodeResponse {
        letterbox: LetterboxView {
            scale: meta.scale,
            pad_x: meta.pad_x,
            pad_y: meta.pad_y,
            input_w: req.input_w,
            input_h: req.input_h,
        },
        anchors: grid.len(),
        candidates,
    })
}

#[derive(Debug, Clone, Deserialize)]
pub struct RotateRequest {
    pub width: u32,
    pub height: u32,
    /// Degrees; positive turns counter-clockwise on screen.
    pub angle: f64,
    /// `[x1, y1, x2, y2]` in pixels.
    pub boxes: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RotatedBox {
    /// The four rotated corners, in drawing order.
    pub corners: [[f64; 2]; 4],
    /// Clipped axis-aligned hull, or `None` when the box is dropped.
    pub hull: Option<[f64; 4]>,
}

pub fn rotate_boxes(req: &RotateRequest) -> Result<Vec<RotatedBox>, String> {
    if req.width == 0 || req.height == 0 {
        return Err("image size must be positive".into());
    }
    let (w, h) = (req.width as f64, req.height as f64);
    let (cx, cy) = (w / 2.0, h / 2.0);
    req.boxes
        .iter()
        .map(|&[x1, y1, x2, y2]| {
            let b = PixelBox::new(x1, y1, x2, y2);
            if !b.is_valid() {
                return Err(format!("invalid box {:?}", [x1, y1, x2, y2]));
            }
            let corners = [(x1, y1), (x2, y1), (x2, y2), (x1, y2)].map(|(x, y)| {
                let (rx, ry) = rotate_point(x, y, cx, cy, req.angle);
                [rx, ry]
            });
            let hull = rotate_box(&pixel_to_norm(&b, w, h), req.width, req.height, req.angle)
                .map(|n| norm_to_pixel(&n, w, h).to_array());
            Ok(RotatedBox { corners, hull })
        })
        .collect()
}

#[derive(Debug, Clone, Deserialize)]
pub struct ScoredBox {
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    #[serde(rename = "class", default)]
    pub class_id: usize,
    #[serde(default = "one")]
    pub score: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
pub struct PrRequest {
    pub predictions: Vec<ScoredBox>,
    pub ground_truth: Vec<ScoredBox>,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrPoint {
    pub score: f64,
    pub precision: f64,
    pub recall: f64,
    pub true_positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassCurve {
    #[serde(rename = "class")]
    pub class_id: usize,
    pub ground_truths: usize,
    pub ap: Option<f64>,
    pub points: Vec<PrPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrResponse {
    pub classes: Vec<ClassCurve>,
    /// Mean AP over classes where it is defined.
    pub map: f64,
}

/// Precision-recall curve and all-points AP per class for one image.
pub fn pr_curves(req: &PrRequest) -> Result<PrResponse, String> {
    if !(req.iou > 0.0 && req.iou <= 1.0) {
        return Err("iou must lie in (0, 1]".into());
    }
    let to_box = |b: &ScoredBox| {
        let [x1, y1, x2, y2] = b.bbox;
        PixelBox::new(x1, y1, x2, y2)
    };
    let mut preds: Vec<Detection> = req
        .predictions
        .iter()
        .map(|p| Detection {
            bbox: to_box(p),
            class_id: p.class_id,
            score: p.score,
        })
        .collect();
    preds.sort_by(|a, b| b.score.total_cmp(&a.score));
    let gts: Vec<GroundTruth> = req
        .ground_truth
        .iter()
        .map(|g| GroundTruth {
            class_id: g.class_id,
            bbox: to_box(g),
        })
        .collect();
    let matched = match_detections(&preds, &gts, req.iou);

    let nc = preds
        .iter()
        .map(|p| p.class_id)
        .chain(gts.iter().map(|g| g.class_id))
        .max()
        .map_or(0, |m| m + 1);
    let mut classes = Vec::new();
    for c in 0..nc {
        let n_gt = gts.iter().filter(|g| g.class_id == c).count();
        let flags: Vec<(f64, bool)> = preds
            .iter()
            .zip(&matched.pred_matches)
            .filter(|(p, _)| p.class_id == c)
            .map(|(p, m)| (p.score, m.is_some()))
            .collect();
        let mut tp = 0usize;
        let points = flags
            .iter()
            .enumerate()
            .map(|(i, &(score, hit))| {
                tp += hit as usize;
                PrPoint {
                    score,
                    precision: tp as f64 / (i + 1) as f64,
                    recall: if n_gt == 0 { 0.0 } else { tp as f64 / n_gt as f64 },
                    true_positive: hit,
                }
            })
            .collect();
        let tp_flags: Vec<bool> = flags.iter().map(|f| f.1).collect();
        classes.push(ClassCurve {
            class_id: c,
            ground_truths: n_gt,
            ap: average_precision(&tp_flags, n_gt),
            points,
        });
    }
    let defined: Vec<f64> = classes.iter().filter_map(|c| c.ap).collect();
    let map = if defined.is_empty() {
        0.0
    } else {
        defined.iter().sum::<f64>() / defined.len() as f64
    };
    Ok(PrResponse { classes, map })
}
