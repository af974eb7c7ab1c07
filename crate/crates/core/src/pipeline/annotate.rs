//! Burns boxes and labels into frames.

use std::path::Path;

use image::{Rgb, RgbImage};

use super::stream::{DetectionSink, FrameRecord};
use super::caption::CaptionEvent;
use super::source::Frame;
use crate::decode::Detection;

// 3x5 glyphs, one row per entry, bit 2 is the leftmost column.
const GLYPHS: &[(char, [u8; 5])] = &[
    ('0', [7, 5, 5, 5, 7]),
    ('1', [2, 6, 2, 2, 7]),
    ('2', [7, 1, 7, 4, 7]),
    ('3', [7, 1, 7, 1, 7]),
    ('4', [5, 5, 7, 1, 1]),
    ('5', [7, 4, 7, 1, 7]),
    ('6', [7, 4, 7, 5, 7]),
    ('7', [7, 1, 1, 1, 1]),
    ('8', [7, 5, 7, 5, 7]),
    ('9', [7, 5, 7, 1, 7]),
    ('.', [0, 0, 0, 0, 2]),
    ('a', [2, 5, 7, 5, 5]),
    ('b', [6, 5, 6, 5, 6]),
    ('c', [7, 4, 4, 4, 7]),
    ('d', [6, 5, 5, 5, 6]),
    ('e', [7, 4, 6, 4, 7]),
    ('f', [7, 4, 6, 4, 4]),
    ('g', [7, 4, 5, 5, 7]),
    ('h', [5, 5, 7, 5, 5]),
    ('i', [7, 2, 2, 2, 7]),
    ('j', [1, 1, 1, 5, 7]),
    ('k', [5, 5, 6, 5, 5]),
    ('l', [4, 4, 4, 4, 7]),
    ('m', [5, 7, 7, 5, 5]),
    ('n', [6, 5, 5, 5, 5]),
    ('o', [7, 5, 5, 5, 7]),
    ('p', [7, 5, 7, 4, 4]),
    ('q', [7, 5, 5, 7, 1]),
    ('r', [6, 5, 6, 5, 5]),
    ('s', [7, 4, 7, 1, 7]),
    ('t', [7, 2, 2, 2, 2]),
    ('u', [5, 5, 5, 5, 7]),
    ('v', [5, 5, 5, 5, 2]),
    ('w', [5, 5, 7, 7, 5]),
    ('x', [5, 5, 2, 5, 5]),
    ('y', [5, 5, 2, 2, 2]),
    ('z', [7, 1, 2, 4, 7]),
];

const TEXT_SCALE: u32 = 2;

/// Distinct, saturated color per class.
pub fn class_color(class_id: usize) -> Rgb<u8> {
    let hue = (class_id as f64 * 0.618_033_988_75).fract() * 6.0;
    let x = 1.0 - (hue % 2.0 - 1.0).abs();
    let (r, g, b) = match hue as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    Rgb([(r * 230.0) as u8 + 25, (g * 230.0) as u8 + 25, (b * 230.0) as u8 + 25])
}

fn fill_rect(img: &mut RgbImage, x0: i64, y0: i64, x1: i64, y1: i64, color: Rgb<u8>) {
    let (w, h) = (img.width() as i64, img.height() as i64);
    for y in y0.max(0)..y1.min(h) {
        for x in x0.max(0)..x1.min(w) {
            img.put_pixel(x as u32, y as u32, color);
        }
    }
}

fn draw_text(img: &mut RgbImage, x: i64, y: i64, text: &str, color: Rgb<u8>) {
    let s = TEXT_SCALE as i64;
    let mut cx = x;
    for ch in text.chars().map(|c| c.to_ascii_lowercase()) {
        if let Some((_, rows)) = GLYPHS.iter().find(|(g, _)| *g == ch) {
            for (ry, bits) in rows.iter().enumerate() {
                for col in 0..3 {
                    if bits & (4 >> col) != 0 {
                        let (px, py) = (cx + col * s, y + ry as i64 * s);
                        fill_rect(img, px, py, px + s, py + s, color);
                    }
                }
            }
        }
        cx += 4 * s;
    }
}

/// Draws each detection's box and a `label score` tag above it.
pub fn annotate(image: &RgbImage, detections: &[Detection], names: &[String]) -> RgbImage {
    let mut out = image.clone();
    let thickness = 2;
    for d in detections {
        let color = class_color(d.class_id);
        let b = d.bbox;
        let (x1, y1, x2, y2) = (b.x1.round() as i64, b.y1.round() as i64, b.x2.round() as i64, b.y2.round() as i64);
        fill_rect(&mut out, x1, y1, x2, y1 + thickness, color);
        fill_rect(&mut out, x1, y2 - thickness, x2, y2, color);
        fill_rect(&mut out, x1, y1, x1 + thickness, y2, color);
        fill_rect(&mut out, x2 - thickness, y1, x2, y2, color);

        let label = names.get(d.class_id).cloned().unwrap_or_else(|| d.class_id.to_string());
        let text = format!("{label} {:.2}", d.score);
        let text_w = text.chars().count() as i64 * 4 * TEXT_SCALE as i64;
        let text_h = 6 * TEXT_SCALE as i64;
        let ty = if y1 - text_h >= 0 { y1 - text_h } else { y1 + thickness };
        fill_rect(&mut out, x1, ty, x1 + text_w + 2, ty + text_h, color);
        draw_text(&mut out, x1 + 2, ty + TEXT_SCALE as i64 / 2, &text, Rgb([0, 0, 0]));
    }
    out
}

/// Sink decorator that also writes annotated frames as numbered PNG files.
pub struct AnnotatingSink<'a, S: DetectionSink> {
    inner: S,
    dir: &'a Path,
    names: Vec<String>,
}

impl<'a, S: DetectionSink> AnnotatingSink<'a, S> {
    pub fn new(inner: S, dir: &'a Path, names: Vec<String>) -> Self {
        Self { inner, dir, names }
    }

    pub fn into_inner(self) -> S {
        self.inner
    }
}

impl<S: DetectionSink> DetectionSink for AnnotatingSink<'_, S> {
    fn frame(&mut self, frame: &Frame, record: &FrameRecord, detections: &[Detection]) -> std::io::Result<()> {
        let img = annotate(&frame.image, detections, &self.names);
        img.save(self.dir.join(format!("frame_{:06}.png", frame.index)))
            .map_err(std::io::Error::other)?;
        self.inner.frame(frame, record, detections)
    }

    fn event(&mut self, event: &CaptionEvent) -> std::io::Result<()> {
        self.inner.event(event)
    }
}
