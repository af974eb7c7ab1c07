use super::DecodeError;

pub const DEFAULT_STRIDES: [u32; 3] = [8, 16, 32];

/// Cell center of one prediction location.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorPoint {
    pub cx: f64,
    pub cy: f64,
    pub stride: u32,
}

/// Grid layout of one head level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridLevel {
    pub stride: u32,
    pub rows: usize,
    pub cols: usize,
}

impl GridLevel {
    pub fn cells(&self) -> usize {
        self.rows * self.cols
    }
}

pub fn grid_levels(input_w: u32, input_h: u32, strides: &[u32]) -> Result<Vec<GridLevel>, DecodeError> {
    strides
        .iter()
        .map(|&stride| {
            if stride == 0 || !input_w.is_multiple_of(stride) || !input_h.is_multiple_of(stride) {
                return Err(DecodeError::NotDivisible {
                    width: input_w,
                    height: input_h,
                    stride,
                });
            }
            Ok(GridLevel {
                stride,
                rows: (input_h / stride) as usize,
                cols: (input_w / stride) as usize,
            })
        })
        .collect()
}

/// Anchor points for every level, level by level, each in row-major order.
pub fn make_grid(input_w: u32, input_h: u32, strides: &[u32]) -> Result<Vec<AnchorPoint>, DecodeError> {
    let levels = grid_levels(input_w, input_h, strides)?;
    let mut points = Vec::with_capacity(levels.iter().map(GridLevel::cells).sum());
    for level in levels {
        let s = level.stride as f64;
        for i in 0..level.rows {
            for j in 0..level.cols {
                points.push(AnchorPoint {
                    cx: (j as f64 + 0.5) * s,
                    cy: (i as f64 + 0.5) * s,
                    stride: level.stride,
                });
            }
        }
    }
    Ok(points)
}
