//! Seeded image augmentations that keep YOLO labels consistent.
//!
//! Noise is salt-and-pepper on an exact pixel count. Rotation is about the
//! image center with bilinear sampling; each label becomes the axis-aligned
//! hull of its rotated corners.

use image::{imageops, Rgb, RgbImage};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::labels::LabelEntry;
use crate::geometry::{norm_to_pixel, NormBox};

pub const MAX_ROTATION_DEGREES: f64 = 45.0;
/// Boxes keeping less than this fraction of their area after clipping are dropped.
pub const MIN_KEPT_AREA_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AugmentError {
    #[error("noise fraction {0} outside [0, 1]")]
    NoiseFraction(f64),
    #[error("rotation magnitude {0} exceeds {MAX_ROTATION_DEGREES} degrees")]
    Rotation(f64),
    #[error("target size must be positive")]
    TargetSize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    pub noise_fraction: f64,
    pub rotation_degrees: f64,
    pub target_w: u32,
    pub target_h: u32,
    pub seed: u64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self {
            noise_fraction: 0.05,
            rotation_degrees: 10.0,
            target_w: 432,
            target_h: 256,
            seed: 42,
        }
    }
}

impl AugmentSpec {
    pub fn validate(&self) -> Result<(), AugmentError> {
        if !(0.0..=1.0).contains(&self.noise_fraction) {
            return Err(AugmentError::NoiseFraction(self.noise_fraction));
        }
        if self.rotation_degrees.is_nan() || self.rotation_degrees.abs() > MAX_ROTATION_DEGREES {
            return Err(AugmentError::Rotation(self.rotation_degrees));
        }
        if self.target_w == 0 || self.target_h == 0 {
            return Err(AugmentError::TargetSize);
        }
        Ok(())
    }
}

/// Derives an independent per-item seed so parallel workers stay reproducible.
pub fn item_seed(seed: u64, item: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ item.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sets exactly `round(fraction * W * H)` distinct pixels to pure black or
/// pure white with equal probability.
pub fn augment_noise(image: &RgbImage, fraction: f64, seed: u64) -> RgbImage {
    let mut out = image.clone();
    let total = (image.width() * image.height()) as usize;
    let count = ((fraction.clamp(0.0, 1.0) * total as f64).round() as usize).min(total);
    if count == 0 {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = index::sample(&mut rng, total, count);
    let w = image.width();
    for idx in chosen.iter() {
        let value = if rng.random_bool(0.5) { 255 } else { 0 };
        let (x, y) = (idx as u32 % w, idx as u32 / w);
        out.put_pixel(x, y, Rgb([value; 3]));
    }
    out
}

/// Maps a point by a rotation of `angle_degrees` about `(cx, cy)`.
///
/// Positive angles turn counter-clockwise as displayed (y axis pointing down).
pub fn rotate_point(x: f64, y: f64, cx: f64, cy: f64, angle_degrees: f64) -> (f64, f64) {
    let (s, c) = angle_degrees.to_radians().sin_cos();
    let (dx, dy) = (x - cx, y - cy);
    (cx + dx * c + dy * s, cy - dx * s + dy * c)
}

fn bilinear(image: &RgbImage, u: f64, v: f64) -> [f64; 3] {
    let (w, h) = (image.width() as i64, image.height() as i64);
    let (x0, y0) = (u.floor(), v.floor());
    let (fx, fy) = (u - x0, v - y0);
    let (x0, y0) = (x0 as i64, y0 as i64);
    let mut acc = [0.0; 3];
    for (dx, dy, weight) in [
        (0, 0, (1.0 - fx) * (1.0 - fy)),
        (1, 0, fx * (1.0 - fy)),
        (0, 1, (1.0 - fx) * fy),
        (1, 1, fx * fy),
    ] {
        let (x, y) = (x0 + dx, y0 + dy);
        if weight == 0.0 || x < 0 || y < 0 || x >= w || y >= h {
            continue;
        }
        let p = image.get_pixel(x as u32, y as u32).0;
        for (a, &ch) in acc.iter_mut().zip(&p) {
            *a += weight * ch as f64;
        }
    }
    acc
}

fn rotate_image(image: &RgbImage, angle_degrees: f64) -> RgbImage {
    let (w, h) = image.dimensions();
    let (cx, cy) = (w as f64 / 2.0, h as f64 / 2.0);
    RgbImage::from_fn(w, h, |x, y| {
        // Inverse mapping: find the source point that lands on this pixel center.
        let (sx, sy) = rotate_point(x as f64 + 0.5, y as f64 + 0.5, cx, cy, -angle_degrees);
        let rgb = bilinear(image, sx - 0.5, sy - 0.5);
        Rgb(rgb.map(|c| c.round().clamp(0.0, 255.0) as u8))
    })
}

/// Axis-aligned hull of the rotated box, clipped to the image, in normalized
/// form. `None` when the clipped hull keeps less than
/// [`MIN_KEPT_AREA_FRACTION`] of the original area.
pub fn rotate_box(b: &NormBox, img_w: u32, img_h: u32, angle_degrees: f64) -> Option<NormBox> {
    let (w, h) = (img_w as f64, img_h as f64);
    let p = norm_to_pixel(b, w, h);
    let (cx, cy) = (w / 2.0, h / 2.0);
    let corners = [(p.x1, p.y1), (p.x2, p.y1), (p.x1, p.y2), (p.x2, p.y2)]
        .map(|(x, y)| rotate_point(x, y, cx, cy, angle_degrees));
    let (mut x1, mut y1, mut x2, mut y2) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for (x, y) in corners {
        x1 = x1.min(x);
        y1 = y1.min(y);
        x2 = x2.max(x);
        y2 = y2.max(y);
    }
    let (cx1, cy1, cx2, cy2) = (x1.clamp(0.0, w), y1.clamp(0.0, h), x2.clamp(0.0, w), y2.clamp(0.0, h));
    let kept = (cx2 - cx1).max(0.0) * (cy2 - cy1).max(0.0);
    if kept < MIN_KEPT_AREA_FRACTION * p.area() || kept <= 0.0 {
        return None;
    }
    NormBox::from_unit_edges(cx1 / w, cy1 / h, cx2 / w, cy2 / h)
}

/// Rotates the image about its center on an unchanged canvas, filling
/// uncovered pixels with black, and re-boxes every label.
pub fn augment_rotate(
    image: &RgbImage,
    boxes: &[LabelEntry],
    angle_degrees: f64,
) -> (RgbImage, Vec<LabelEntry>) {
    if angle_degrees == 0.0 {
        return (image.clone(), boxes.to_vec());
    }
    let rotated = rotate_image(image, angle_degrees);
    let (w, h) = image.dimensions();
    let kept = boxes
        .iter()
        .filter_map(|e| rotate_box(&e.bbox, w, h, angle_degrees).map(|b| LabelEntry::new(e.class_id, b)))
        .collect();
    (rotated, kept)
}

/// Direct (non-uniform) resize. Normalized labels are unchanged by a full-image resize.
pub fn resize_with_boxes(
    image: &RgbImage,
    boxes: &[LabelEntry],
    target_w: u32,
    target_h: u32,
) -> (RgbImage, Vec<LabelEntry>) {
    let out = if image.dimensions() == (target_w, target_h) {
        image.clone()
    } else {
        imageops::resize(image, target_w, target_h, imageops::FilterType::Triangle)
    };
    (out, boxes.to_vec())
}

/// One augmented copy: resize to the spec target, add noise, then rotate by a
/// seeded angle drawn uniformly from `[-rotation, +rotation]`.
pub fn augment_sample(
    image: &RgbImage,
    boxes: &[LabelEntry],
    spec: &AugmentSpec,
    seed: u64,
) -> (RgbImage, Vec<LabelEntry>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise_seed: u64 = rng.random();
    let angle = if spec.rotation_degrees > 0.0 {
        rng.random_range(-spec.rotation_degrees..=spec.rotation_degrees)
    } else {
        0.0
    };
    let (resized, boxes) = resize_with_boxes(image, boxes, spec.target_w, spec.target_h);
    let noisy = augment_noise(&resized, spec.noise_fraction, noise_seed);
    let (rotated, boxes) = augment_rotate(&noisy, &boxes, angle);
    (rotated, boxes, angle)
}
