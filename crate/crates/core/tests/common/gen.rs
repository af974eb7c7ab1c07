//! Seeded random scenes for the oracle comparisons.

use image::{Rgb, RgbImage};
use rand::Rng;

use msl_core::decode::synth::PlantedObject;
use msl_core::decode::Detection;
use msl_core::eval::GroundTruth;
use msl_core::geometry::{letterbox_params, LetterboxMeta, PixelBox};

fn score<R: Rng>(rng: &mut R) -> f64 {
    // A share of coarse scores makes ties common.
    if rng.random_bool(0.3) {
        rng.random_range(1..20) as f64 / 20.0
    } else {
        rng.random_range(0.01..1.0)
    }
}

fn jitter<R: Rng>(rng: &mut R, b: &PixelBox, amount: f64) -> PixelBox {
    let mut d = || rng.random_range(-amount..=amount);
    let (x1, y1) = (b.x1 + d(), b.y1 + d());
    let (x2, y2) = (b.x2 + d(), b.y2 + d());
    PixelBox::new(x1.min(x2 - 1.0), y1.min(y2 - 1.0), x2.max(x1 + 1.0), y2.max(y1 + 1.0))
}

fn random_box<R: Rng>(rng: &mut R, extent: f64, min: f64, max: f64) -> PixelBox {
    let (w, h) = (rng.random_range(min..max), rng.random_range(min..max));
    let (x, y) = (rng.random_range(0.0..extent - w), rng.random_range(0.0..extent - h));
    PixelBox::new(x, y, x + w, y + h)
}

/// Up to 50 candidates of 20 classes, clustered so that suppression happens.
pub fn nms_scene<R: Rng>(rng: &mut R) -> Vec<Detection> {
    let n = rng.random_range(0..=50);
    let clusters: Vec<PixelBox> = (0..rng.random_range(1..=6)).map(|_| random_box(rng, 640.0, 20.0, 200.0)).collect();
    (0..n)
        .map(|_| {
            let base = clusters[rng.random_range(0..clusters.len())];
            let bbox = if rng.random_bool(0.1) {
                base
            } else {
                jitter(rng, &base, 25.0)
            };
            Detection {
                bbox,
                class_id: rng.random_range(0..20),
                score: score(rng),
            }
        })
        .collect()
}

/// Up to 5 images with up to 10 ground truths and 10 predictions each over 3 classes.
pub fn map_scene<R: Rng>(rng: &mut R) -> (Vec<Vec<Detection>>, Vec<Vec<GroundTruth>>) {
    let images = rng.random_range(1..=5);
    let mut preds = Vec::new();
    let mut gts = Vec::new();
    for _ in 0..images {
        let g: Vec<GroundTruth> = (0..rng.random_range(0..=10))
            .map(|_| GroundTruth {
                class_id: rng.random_range(0..3),
                bbox: random_box(rng, 300.0, 10.0, 120.0),
            })
            .collect();
        let mut p = Vec::new();
        for gt in &g {
            for _ in 0..rng.random_range(0..=2) {
                let class_id = if rng.random_bool(0.85) { gt.class_id } else { rng.random_range(0..3) };
                p.push(Detection {
                    bbox: jitter(rng, &gt.bbox, 12.0),
                    class_id,
                    score: score(rng),
                });
            }
        }
        for _ in 0..rng.random_range(0..=3) {
            p.push(Detection {
                bbox: random_box(rng, 300.0, 10.0, 120.0),
                class_id: rng.random_range(0..3),
                score: score(rng),
            });
        }
        // shuffle, then cap at 10 predictions
        for i in (1..p.len()).rev() {
            p.swap(i, rng.random_range(0..=i));
        }
        p.truncate(10);
        preds.push(p);
        gts.push(g);
    }
    (preds, gts)
}

pub struct PlantedScene {
    pub image: RgbImage,
    pub meta: LetterboxMeta,
    /// Boxes in letterboxed-input pixels.
    pub planted: Vec<PlantedObject>,
    /// The same boxes mapped back to source pixels.
    pub expected: Vec<(PixelBox, usize)>,
}

/// A random source image with up to `max_objects` non-overlapping objects of
/// `nc` classes, planted in input coordinates inside the letterbox content.
pub fn planted_scene<R: Rng>(rng: &mut R, input_w: u32, input_h: u32, nc: usize, max_objects: usize) -> PlantedScene {
    let (src_w, src_h) = (rng.random_range(160..1600), rng.random_range(160..1600));
    let meta = letterbox_params(src_w, src_h, input_w, input_h);
    let (ox, oy) = (meta.pad_x, meta.pad_y);
    let (cw, ch) = (src_w as f64 * meta.scale, src_h as f64 * meta.scale);
    let k = rng.random_range(1..=max_objects);
    let mut planted: Vec<PlantedObject> = Vec::new();
    let mut attempts = 0;
    while planted.len() < k && attempts < 1000 {
        attempts += 1;
        let (w, h) = (rng.random_range(16.0..160.0f64), rng.random_range(16.0..160.0f64));
        if w + 2.0 > cw || h + 2.0 > ch {
            continue;
        }
        let x = ox + 1.0 + rng.random_range(0.0..cw - w - 2.0);
        let y = oy + 1.0 + rng.random_range(0.0..ch - h - 2.0);
        let bbox = PixelBox::new(x, y, x + w, y + h);
        // keep a gap so that boxes never touch
        let padded = PixelBox::new(x - 4.0, y - 4.0, x + w + 4.0, y + h + 4.0);
        if planted.iter().any(|p| p.bbox.intersection(&padded) > 0.0) {
            continue;
        }
        planted.push(PlantedObject {
            bbox,
            class_id: rng.random_range(0..nc),
            logit: rng.random_range(0.5..6.0),
        });
    }
    let back = |v: f64, pad: f64| (v - pad) / meta.scale;
    let expected = planted
        .iter()
        .map(|p| {
            let b = &p.bbox;
            let src = PixelBox::new(back(b.x1, ox), back(b.y1, oy), back(b.x2, ox), back(b.y2, oy));
            (src, p.class_id)
        })
        .collect();
    let base = Rgb([rng.random(), rng.random(), rng.random()]);
    PlantedScene {
        image: RgbImage::from_pixel(src_w, src_h, base),
        meta,
        planted,
        expected,
    }
}
