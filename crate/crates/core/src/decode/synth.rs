//! Synthesizes head outputs that decode to a chosen set of objects.
//!
//! Used for replay fixtures: each object is written into exactly one anchor
//! whose distance distributions have the required expectations, while every
//! other anchor carries a low class logit.

use super::grid::{grid_levels, make_grid, GridLevel};
use super::head::{sigmoid, HeadLevel, PretransformedOutput, RawHeadOutput};
use super::DecodeError;
use crate::geometry::PixelBox;

/// Logit assigned to empty bins; its softmax weight underflows to zero.
const EMPTY_BIN: f32 = -1.0e4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedObject {
    /// Box in letterboxed-input pixels.
    pub bbox: PixelBox,
    pub class_id: usize,
    pub logit: f32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthLayout {
    pub input_w: u32,
    pub input_h: u32,
    pub strides: Vec<u32>,
    pub reg_max: usize,
    pub nc: usize,
    pub background_logit: f32,
}

impl SynthLayout {
    pub fn new(input_w: u32, input_h: u32, nc: usize) -> Self {
        Self {
            input_w,
            input_h,
            strides: super::grid::DEFAULT_STRIDES.to_vec(),
            reg_max: super::head::DEFAULT_REG_MAX,
            nc,
            background_logit: -12.0,
        }
    }
}

/// Logits over `reg_max` bins whose softmax expectation equals `d`.
pub fn distance_logits(d: f64, reg_max: usize) -> Vec<f32> {
    let mut logits = vec![EMPTY_BIN; reg_max];
    let d = d.clamp(0.0, (reg_max - 1) as f64);
    let k = (d.floor() as usize).min(reg_max - 2);
    let p = d - k as f64;
    logits[k] = if p < 1.0 { (1.0 - p).ln() as f32 } else { EMPTY_BIN };
    logits[k + 1] = if p > 0.0 { p.ln() as f32 } else { EMPTY_BIN };
    logits
}

/// Picks the finest level whose cell holding the box center can express the
/// box with distances inside `[0, reg_max - 1]`. Returns `(level index, row, col, ltrb)`.
fn place(
    levels: &[GridLevel],
    reg_max: usize,
    b: &PixelBox,
) -> Option<(usize, usize, usize, [f64; 4])> {
    let (cx, cy) = b.center();
    let limit = (reg_max - 1) as f64 - 1e-3;
    levels.iter().enumerate().find_map(|(li, level)| {
        let s = level.stride as f64;
        let col = (cx / s).floor();
        let row = (cy / s).floor();
        if col < 0.0 || row < 0.0 || col as usize >= level.cols || row as usize >= level.rows {
            return None;
        }
        let (ax, ay) = ((col + 0.5) * s, (row + 0.5) * s);
        let ltrb = [(ax - b.x1) / s, (ay - b.y1) / s, (b.x2 - ax) / s, (b.y2 - ay) / s];
        ltrb.iter()
            .all(|d| (0.0..=limit).contains(d))
            .then_some((li, row as usize, col as usize, ltrb))
    })
}

/// Builds a raw head output that decodes to `objects`.
pub fn plant_raw(layout: &SynthLayout, objects: &[PlantedObject]) -> Result<RawHeadOutput, DecodeError> {
    let levels = grid_levels(layout.input_w, layout.input_h, &layout.strides)?;
    let reg_max = layout.reg_max;
    let channels = 4 * reg_max + layout.nc;
    let mut heads: Vec<HeadLevel> = levels.iter().map(|&l| HeadLevel::zeros(l, channels)).collect();
    for head in &mut heads {
        for c in 0..layout.nc {
            head.plane_mut(4 * reg_max + c).fill(layout.background_logit);
        }
    }
    let mut used = std::collections::HashSet::new();
    for obj in objects {
        if obj.class_id >= layout.nc {
            return Err(DecodeError::ShapeMismatch(format!("class {} >= nc {}", obj.class_id, layout.nc)));
        }
        let (li, row, col, ltrb) = place(&levels, reg_max, &obj.bbox).ok_or_else(|| {
            DecodeError::ShapeMismatch(format!("object {:?} cannot be expressed by any level", obj.bbox))
        })?;
        if !used.insert((li, row, col)) {
            return Err(DecodeError::ShapeMismatch(format!("two objects share the anchor of {:?}", obj.bbox)));
        }
        let head = &mut heads[li];
        let n = head.cells();
        let cell = row * head.cols + col;
        for (side, d) in ltrb.iter().enumerate() {
            for (k, v) in distance_logits(*d, reg_max).into_iter().enumerate() {
                head.data[(side * reg_max + k) * n + cell] = v;
            }
        }
        head.data[(4 * reg_max + obj.class_id) * n + cell] = obj.logit;
    }
    Ok(RawHeadOutput {
        levels: heads,
        reg_max,
        nc: layout.nc,
    })
}

/// Builds the matching already-decoded output: one column per anchor, planted
/// objects at the anchor [`plant_raw`] would use and sigmoid scores elsewhere.
pub fn plant_pretransformed(
    layout: &SynthLayout,
    objects: &[PlantedObject],
) -> Result<PretransformedOutput, DecodeError> {
    let levels = grid_levels(layout.input_w, layout.input_h, &layout.strides)?;
    let grid = make_grid(layout.input_w, layout.input_h, &layout.strides)?;
    let anchors = grid.len();
    let rows = 4 + layout.nc;
    let mut data = vec![0.0f32; rows * anchors];
    let background = sigmoid(layout.background_logit as f64) as f32;
    for (a, p) in grid.iter().enumerate() {
        data[a] = p.cx as f32;
        data[anchors + a] = p.cy as f32;
        data[2 * anchors + a] = p.stride as f32;
        data[3 * anchors + a] = p.stride as f32;
        for c in 0..layout.nc {
            data[(4 + c) * anchors + a] = background;
        }
    }
    let offsets: Vec<usize> = levels
        .iter()
        .scan(0, |acc, l| {
            let o = *acc;
            *acc += l.cells();
            Some(o)
        })
        .collect();
    for obj in objects {
        let (li, row, col, _) = place(&levels, layout.reg_max, &obj.bbox).ok_or_else(|| {
            DecodeError::ShapeMismatch(format!("object {:?} cannot be expressed by any level", obj.bbox))
        })?;
        let a = offsets[li] + row * levels[li].cols + col;
        let (cx, cy) = obj.bbox.center();
        data[a] = cx as f32;
        data[anchors + a] = cy as f32;
        data[2 * anchors + a] = obj.bbox.width() as f32;
        data[3 * anchors + a] = obj.bbox.height() as f32;
        data[(4 + obj.class_id) * anchors + a] = sigmoid(obj.logit as f64) as f32;
    }
    PretransformedOutput::new(data, layout.nc, anchors)
}
