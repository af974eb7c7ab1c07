//! Raw and pre-transformed detector head outputs and their decoders.

use serde::{Deserialize, Serialize};

use super::grid::{grid_levels, AnchorPoint, GridLevel};
use super::DecodeError;
use crate::geometry::PixelBox;

pub const DEFAULT_REG_MAX: usize = 16;

/// One decoded object: box in letterboxed-input pixels until unmapped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    #[serde(rename = "box")]
    pub bbox: PixelBox,
    #[serde(rename = "class")]
    pub class_id: usize,
    pub score: f64,
}

/// One level of a raw head output: `(4 * reg_max + nc)` channel planes of
/// `rows x cols` logits, stored channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadLevel {
    pub stride: u32,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl HeadLevel {
    pub fn zeros(level: GridLevel, channels: usize) -> Self {
        Self {
            stride: level.stride,
            rows: level.rows,
            cols: level.cols,
            data: vec![0.0; channels * level.cells()],
        }
    }

    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }

    /// Channel plane `c`.
    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.cells();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.cells();
        &mut self.data[c * n..(c + 1) * n]
    }
}

/// Per-stride logits of an anchor-free decoupled head.
///
/// Channels per cell: four groups of `reg_max` distance bins (left, top,
/// right, bottom) followed by `nc` class logits.
#[derive(Debug, Clone, PartialEq)]
pub struct RawHeadOutput {
    pub levels: Vec<HeadLevel>,
    pub reg_max: usize,
    pub nc: usize,
}

impl RawHeadOutput {
    pub fn channels(&self) -> usize {
        4 * self.reg_max + self.nc
    }

    pub fn anchors(&self) -> usize {
        self.levels.iter().map(HeadLevel::cells).sum()
    }

    /// Splits an exporter's concatenated `(channels, anchors)` matrix into levels.
    pub fn from_concatenated(
        data: &[f32],
        reg_max: usize,
        nc: usize,
        input_w: u32,
        input_h: u32,
        strides: &[u32],
    ) -> Result<Self, DecodeError> {
        let levels = grid_levels(input_w, input_h, strides)?;
        let channels = 4 * reg_max + nc;
        let anchors: usize = levels.iter().map(GridLevel::cells).sum();
        if data.len() != channels * anchors {
            return Err(DecodeError::ShapeMismatch(format!(
                "concatenated raw output has {} values, expected {channels} x {anchors}",
                data.len()
            )));
        }
        let mut out = Vec::with_capacity(levels.len());
        let mut offset = 0;
        for level in levels {
            let mut head = HeadLevel::zeros(level, channels);
            let n = level.cells();
            for c in 0..channels {
                let src = &data[c * anchors + offset..c * anchors + offset + n];
                head.plane_mut(c).copy_from_slice(src);
            }
            offset += n;
            out.push(head);
        }
        Ok(Self {
            levels: out,
            reg_max,
            nc,
        })
    }

    /// Inverse of [`RawHeadOutput::from_concatenated`].
    pub fn to_concatenated(&self) -> Vec<f32> {
        let channels = self.channels();
        let anchors = self.anchors();
        let mut data = vec![0.0; channels * anchors];
        let mut offset = 0;
        for level in &self.levels {
            let n = level.cells();
            for c in 0..channels {
                data[c * anchors + offset..c * anchors + offset + n].copy_from_slice(level.plane(c));
            }
            offset += n;
        }
        data
    }

    fn check(&self, grid: &[AnchorPoint]) -> Result<(), DecodeError> {
        if self.reg_max < 2 {
            return Err(DecodeError::ShapeMismatch(format!("reg_max {} < 2", self.reg_max)));
        }
        if grid.len() != self.anchors() {
            return Err(DecodeError::ShapeMismatch(format!(
                "grid has {} anchors, head output has {}",
                grid.len(),
                self.anchors()
            )));
        }
        let channels = self.channels();
        let mut offset = 0;
        for level in &self.levels {
            if level.data.len() != channels * level.cells() {
                return Err(DecodeError::ShapeMismatch(format!(
                    "stride {} level has {} values, expected {channels} x {}",
                    level.stride,
                    level.data.len(),
                    level.cells()
                )));
            }
            let first = &grid[offset];
            let last = &grid[offset + level.cells() - 1];
            let s = level.stride as f64;
            if first.stride != level.stride
                || last.stride != level.stride
                || last.cx != (level.cols as f64 - 0.5) * s
                || last.cy != (level.rows as f64 - 0.5) * s
            {
                return Err(DecodeError::ShapeMismatch(format!(
                    "grid does not match the stride {} level ({}x{})",
                    level.stride, level.rows, level.cols
                )));
            }
            offset += level.cells();
        }
        Ok(())
    }
}

/// Already-decoded exporter output: `(4 + nc)` rows by `anchors` columns.
/// Rows 0..4 are `cx, cy, w, h` in letterboxed pixels, the rest class probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct PretransformedOutput {
    pub data: Vec<f32>,
    pub nc: usize,
    pub anchors: usize,
}

impl PretransformedOutput {
    pub fn new(data: Vec<f32>, nc: usize, anchors: usize) -> Result<Self, DecodeError> {
        if data.len() != (4 + nc) * anchors {
            return Err(DecodeError::ShapeMismatch(format!(
                "pretransformed output has {} values, expected {} x {anchors}",
                data.len(),
                4 + nc
            )));
        }
        Ok(Self { data, nc, anchors })
    }

    fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.anchors..(r + 1) * self.anchors]
    }
}

/// What a model backend returns for one frame.
#[derive(Debug, Clone, PartialEq)]
pub enum HeadOutput {
    Raw(RawHeadOutput),
    Pretransformed(PretransformedOutput),
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softmax expectation of a distance distribution, in bin units.
///
/// Uses max-subtraction, so adding a constant to every logit does not change the result.
pub fn dfl_expectation<T: Copy + Into<f64>>(logits: &[T]) -> f64 {
    let max = logits.iter().map(|&v| v.into()).fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    let mut weighted = 0.0;
    for (k, &v) in logits.iter().enumerate() {
        let e = (v.into() - max).exp();
        total += e;
        weighted += k as f64 * e;
    }
    weighted / total
}

/// Decodes every anchor whose class score exceeds `conf_threshold`.
///
/// Each passing class of an anchor yields its own candidate. Output is ordered
/// by level, anchor, then class.
pub fn decode_raw(
    raw: &RawHeadOutput,
    grid: &[AnchorPoint],
    conf_threshold: f64,
) -> Result<Vec<Detection>, DecodeError> {
    raw.check(grid)?;
    let reg_max = raw.reg_max;
    // sigmoid is monotone: prefilter on the logit, confirm on the probability.
    let logit_floor = if conf_threshold <= 0.0 {
        f64::NEG_INFINITY
    } else if conf_threshold >= 1.0 {
        f64::INFINITY
    } else {
        (conf_threshold / (1.0 - conf_threshold)).ln() - 1e-6
    };

    let mut out = Vec::new();
    let mut bins = vec![0.0f64; reg_max];
    let mut offset = 0;
    for level in &raw.levels {
        let n = level.cells();
        let mut candidate = vec![false; n];
        for c in 0..raw.nc {
            for (flag, &v) in candidate.iter_mut().zip(level.plane(4 * reg_max + c)) {
                *flag |= v as f64 > logit_floor;
            }
        }
        let s = level.stride as f64;
        for (cell, _) in candidate.iter().enumerate().filter(|(_, &f)| f) {
            let mut dist = [0.0f64; 4];
            for (side, d) in dist.iter_mut().enumerate() {
                for (k, b) in bins.iter_mut().enumerate() {
                    *b = level.data[(side * reg_max + k) * n + cell] as f64;
                }
                *d = dfl_expectation(&bins);
            }
            let a = &grid[offset + cell];
            let bbox = PixelBox::new(
                a.cx - dist[0] * s,
                a.cy - dist[1] * s,
                a.cx + dist[2] * s,
                a.cy + dist[3] * s,
            );
            for c in 0..raw.nc {
                let score = sigmoid(level.data[(4 * reg_max + c) * n + cell] as f64);
                if score > conf_threshold {
                    out.push(Detection {
                        bbox,
                        class_id: c,
                        score,
                    });
                }
            }
        }
        offset += n;
    }
    Ok(out)
}

/// Thresholds an already-decoded output; scores are used as given.
pub fn decode_pretransformed(
    tensor: &PretransformedOutput,
    conf_threshold: f64,
) -> Result<Vec<Detection>, DecodeError> {
    if tensor.data.len() != (4 + tensor.nc) * tensor.anchors {
        return Err(DecodeError::ShapeMismatch(format!(
            "pretransformed output has {} values, expected {} x {}",
            tensor.data.len(),
            4 + tensor.nc,
            tensor.anchors
        )));
    }
    let (cx, cy, w, h) = (tensor.row(0), tensor.row(1), tensor.row(2), tensor.row(3));
    let mut out = Vec::new();
    for a in 0..tensor.anchors {
        let mut bbox = None;
        for c in 0..tensor.nc {
            let score = tensor.data[(4 + c) * tensor.anchors + a] as f64;
            if score > conf_threshold {
                let b = *bbox.get_or_insert_with(|| {
                    PixelBox::from_center(cx[a] as f64, cy[a] as f64, w[a] as f64, h[a] as f64)
                });
                out.push(Detection {
                    bbox: b,
                    class_id: c,
                    score,
                });
            }
        }
    }
    Ok(out)
}
