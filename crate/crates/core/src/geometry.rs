//! Box representations, coordinate transforms and overlap metrics.
//!
//! Boxes are kept as continuous `xyxy` pixel coordinates everywhere inside the
//! crate. [`NormBox`] only appears at the label-file boundary.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// Axis-aligned box in absolute pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl PixelBox {
    pub const fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Self {
        Self { x1, y1, x2, y2 }
    }

    /// Builds a box from center and size.
    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self::new(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)
    }

    pub fn width(&self) -> f64 {
        (self.x2 - self.x1).max(0.0)
    }

    pub fn height(&self) -> f64 {
        (self.y2 - self.y1).max(0.0)
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    /// True when coordinates are finite and ordered.
    pub fn is_valid(&self) -> bool {
        [self.x1, self.y1, self.x2, self.y2].iter().all(|v| v.is_finite())
            && self.x1 <= self.x2
            && self.y1 <= self.y2
    }

    pub fn clamp(&self, w: f64, h: f64) -> Self {
        Self::new(
            self.x1.clamp(0.0, w),
            self.y1.clamp(0.0, h),
            self.x2.clamp(0.0, w),
            self.y2.clamp(0.0, h),
        )
    }

    pub fn intersection(&self, other: &Self) -> f64 {
        let w = self.x2.min(other.x2) - self.x1.max(other.x1);
        let h = self.y2.min(other.y2) - self.y1.max(other.y1);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }
}

/// YOLO-normalized box: center and size as fractions of the image size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl NormBox {
    pub const fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self { cx, cy, w, h }
    }

    /// Every coordinate and every edge lies inside `[0, 1]` and the size is positive.
    pub fn is_valid(&self) -> bool {
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        const EPS: f64 = 1e-9;
        in_unit(self.cx)
            && in_unit(self.cy)
            && in_unit(self.w)
            && in_unit(self.h)
            && self.w > 0.0
            && self.h > 0.0
            && self.cx - self.w / 2.0 >= -EPS
            && self.cx + self.w / 2.0 <= 1.0 + EPS
            && self.cy - self.h / 2.0 >= -EPS
            && self.cy + self.h / 2.0 <= 1.0 + EPS
    }

    /// Builds a normalized box from edges given as fractions, clamping them to `[0, 1]`.
    ///
    /// Returns `None` when the clamped box has no area.
    pub fn from_unit_edges(x1: f64, y1: f64, x2: f64, y2: f64) -> Option<Self> {
        let (x1, x2) = (x1.clamp(0.0, 1.0), x2.clamp(0.0, 1.0));
        let (y1, y2) = (y1.clamp(0.0, 1.0), y2.clamp(0.0, 1.0));
        let (w, h) = (x2 - x1, y2 - y1);
        if w <= 0.0 || h <= 0.0 {
            return None;
        }
        Some(Self::new((x1 + x2) / 2.0, (y1 + y2) / 2.0, w, h))
    }
}

pub fn norm_to_pixel(b: &NormBox, img_w: f64, img_h: f64) -> PixelBox {
    PixelBox::new(
        (b.cx - b.w / 2.0) * img_w,
        (b.cy - b.h / 2.0) * img_h,
        (b.cx + b.w / 2.0) * img_w,
        (b.cy + b.h / 2.0) * img_h,
    )
}

pub fn pixel_to_norm(b: &PixelBox, img_w: f64, img_h: f64) -> NormBox {
    NormBox::new(
        (b.x1 + b.x2) / 2.0 / img_w,
        (b.y1 + b.y2) / 2.0 / img_h,
        (b.x2 - b.x1) / img_w,
        (b.y2 - b.y1) / img_h,
    )
}

/// Intersection over union. Zero-area or disjoint boxes give 0.
pub fn iou(a: &PixelBox, b: &PixelBox) -> f64 {
    let inter = a.intersection(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).min(1.0)
    }
}

fn aspect_angle(b: &PixelBox) -> f64 {
    let (w, h) = (b.width(), b.height());
    if w == 0.0 && h == 0.0 {
        0.0
    } else {
        (w / h).atan()
    }
}

/// Complete IoU: IoU minus the normalized center distance and an aspect-ratio
/// consistency penalty. Identical boxes score exactly 1.
pub fn ciou(a: &PixelBox, b: &PixelBox) -> f64 {
    if a == b {
        return 1.0;
    }
    let iou = iou(a, b);

    let (acx, acy) = a.center();
    let (bcx, bcy) = b.center();
    let rho2 = (acx - bcx).powi(2) + (acy - bcy).powi(2);
    let cw = a.x2.max(b.x2) - a.x1.min(b.x1);
    let ch = a.y2.max(b.y2) - a.y1.min(b.y1);
    let c2 = cw * cw + ch * ch;
    let distance = if c2 > 0.0 { rho2 / c2 } else { 0.0 };

    let v = 4.0 / (PI * PI) * (aspect_angle(b) - aspect_angle(a)).powi(2);
    let denom = (1.0 - iou) + v;
    let alpha = if denom > 0.0 { v / denom } else { 0.0 };

    iou - distance - alpha * v
}

/// Geometry of an aspect-preserving resize followed by centered padding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LetterboxMeta {
    pub scale: f64,
    pub pad_x: f64,
    pub pad_y: f64,
    pub src_w: u32,
    pub src_h: u32,
    pub dst_w: u32,
    pub dst_h: u32,
}

impl LetterboxMeta {
    /// Size of the resized content before padding.
    pub fn content_size(&self) -> (u32, u32) {
        (
            ((self.src_w as f64 * self.scale).round() as u32).clamp(1, self.dst_w),
            ((self.src_h as f64 * self.scale).round() as u32).clamp(1, self.dst_h),
        )
    }

    /// Integer pixel offset where the resized content is pasted.
    pub fn content_offset(&self) -> (u32, u32) {
        (self.pad_x.floor() as u32, self.pad_y.floor() as u32)
    }

    /// Source pixel box to letterboxed-input coordinates.
    pub fn map_box(&self, b: &PixelBox) -> PixelBox {
        PixelBox::new(
            b.x1 * self.scale + self.pad_x,
            b.y1 * self.scale + self.pad_y,
            b.x2 * self.scale + self.pad_x,
            b.y2 * self.scale + self.pad_y,
        )
    }

    pub fn map_point(&self, x: f64, y: f64) -> (f64, f64) {
        (x * self.scale + self.pad_x, y * self.scale + self.pad_y)
    }
}

pub fn letterbox_params(src_w: u32, src_h: u32, dst_w: u32, dst_h: u32) -> LetterboxMeta {
    let scale = (dst_w as f64 / src_w as f64).min(dst_h as f64 / src_h as f64);
    let new_w = ((src_w as f64 * scale).round() as u32).min(dst_w);
    let new_h = ((src_h as f64 * scale).round() as u32).min(dst_h);
    LetterboxMeta {
        scale,
        pad_x: (dst_w - new_w) as f64 / 2.0,
        pad_y: (dst_h - new_h) as f64 / 2.0,
        src_w,
        src_h,
        dst_w,
        dst_h,
    }
}

/// Maps a box from letterboxed-input space back to the source image, clamped to its bounds.
pub fn unmap_box(b: &PixelBox, m: &LetterboxMeta) -> PixelBox {
    PixelBox::new(
        (b.x1 - m.pad_x) / m.scale,
        (b.y1 - m.pad_y) / m.scale,
        (b.x2 - m.pad_x) / m.scale,
        (b.y2 - m.pad_y) / m.scale,
    )
    .clamp(m.src_w as f64, m.src_h as f64)
}
