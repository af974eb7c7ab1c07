//! The acceptance criteria as functions returning a verdict and a summary line.

use std::sync::Arc;
use std::time::{Duration, Instant};

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use msl_core::dataset::augment::{augment_noise, augment_sample, rotate_box, AugmentSpec};
use msl_core::dataset::{dataset_stats, parse_label_file, write_label_file, DatasetManifest, LabelEntry};
use msl_core::decode::synth::{plant_raw, PlantedObject, SynthLayout};
use msl_core::decode::{decode_raw, dfl_expectation, make_grid, nms, DecodeConfig, HeadOutput};
use msl_core::eval::{coco_thresholds, map_at};
use msl_core::geometry::{NormBox, PixelBox};
use msl_core::pipeline::{
    run_stream, BackendInfo, Detector, JsonLinesSink, OutputMode, ReplayBackend, StreamOptions, VecSource,
};

use super::fixtures::{caption_clip, frame, CollectSink};
use super::{gen, oracle};

pub struct Verdict {
    pub passed: bool,
    pub detail: String,
}

impl Verdict {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Self {
            passed,
            detail: detail.into(),
        }
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2} s", d.as_secs_f64())
}

pub fn nms_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x4e4d53);
    let started = Instant::now();
    let mut mismatches = 0;
    let mut suppressed = 0;
    for _ in 0..1000 {
        let dets = gen::nms_scene(&mut rng);
        let got = nms(&dets, 0.45, true, 300);
        let want = oracle::brute_force_nms(&dets, 0.45, true, 300);
        suppressed += dets.len() - got.len();
        mismatches += (got != want) as usize;
    }
    let elapsed = started.elapsed();
    Verdict::new(
        mismatches == 0 && elapsed < Duration::from_secs(10),
        format!("1000 scenes, {mismatches} mismatches, {suppressed} boxes suppressed, {} (limit 10 s)", secs(elapsed)),
    )
}

pub fn map_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d4150);
    let thresholds = coco_thresholds();
    let started = Instant::now();
    let mut worst = 0.0f64;
    let mut undefined_mismatch = 0;
    for _ in 0..1000 {
        let (preds, gts) = gen::map_scene(&mut rng);
        let got = map_at(&preds, &gts, 3, &thresholds);
        let want = oracle::brute_force_map(&preds, &gts, 3, &thresholds);
        for (a, b) in got.map.iter().zip(&want.map) {
            worst = worst.max((a - b).abs());
        }
        for (ra, rb) in got.ap.iter().zip(&want.ap) {
            for (a, b) in ra.iter().zip(rb) {
                match (a, b) {
                    (Some(a), Some(b)) => worst = worst.max((a - b).abs()),
                    (None, None) => {}
                    _ => undefined_mismatch += 1,
                }
            }
        }
    }
    let elapsed = started.elapsed();
    Verdict::new(
        worst <= 1e-9 && undefined_mismatch == 0 && elapsed < Duration::from_secs(30),
        format!(
            "1000 scene sets x 10 IoU thresholds, max |diff| {worst:.1e} (tol 1e-9), {} (limit 30 s)",
            secs(elapsed)
        ),
    )
}

pub fn dfl() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0xdf1);
    let mut uniform_err = 0.0f64;
    for c in [-1e3, -7.5, 0.0, 0.3, 12.0, 1e3] {
        uniform_err = uniform_err.max((dfl_expectation(&[c; 16]) - 7.5).abs());
    }
    let mut onehot_err = 0.0f64;
    for k in 0..16 {
        let mut hard = [f64::NEG_INFINITY; 16];
        hard[k] = 0.0;
        let mut soft = [-1.0e4f32; 16];
        soft[k] = 0.0;
        onehot_err = onehot_err.max((dfl_expectation(&hard) - k as f64).abs());
        onehot_err = onehot_err.max((dfl_expectation(&soft) - k as f64).abs());
    }
    let mut shift_err = 0.0f64;
    let mut naive_err = 0.0f64;
    for _ in 0..100_000 {
        let logits: Vec<f64> = (0..16).map(|_| rng.random_range(-10.0..10.0)).collect();
        let shift = rng.random_range(-100.0..100.0);
        let shifted: Vec<f64> = logits.iter().map(|v| v + shift).collect();
        let base = dfl_expectation(&logits);
        shift_err = shift_err.max((base - dfl_expectation(&shifted)).abs());
        naive_err = naive_err.max((base - oracle::naive_expectation(&logits)).abs());
    }
    Verdict::new(
        uniform_err <= 1e-9 && onehot_err <= 1e-6 && shift_err <= 1e-9 && naive_err <= 1e-9,
        format!(
            "uniform err {uniform_err:.1e} (tol 1e-9), one-hot err {onehot_err:.1e} (tol 1e-6), \
             shift err {shift_err:.1e} over 1e5 vectors (tol 1e-9), vs naive softmax {naive_err:.1e}"
        ),
    )
}

pub fn planted_round_trip() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x91a47);
    let layout = SynthLayout::new(640, 640, 20);
    let mut frames = Vec::new();
    let mut outputs = Vec::new();
    let mut expected = Vec::new();
    while frames.len() < 100 {
        let scene = gen::planted_scene(&mut rng, 640, 640, 20, 10);
        // Scenes whose objects would share an anchor are redrawn.
        let Ok(raw) = plant_raw(&layout, &scene.planted) else { continue };
        outputs.push(HeadOutput::Raw(raw));
        frames.push(frame(frames.len() as u64, scene.image));
        expected.push(scene.expected);
    }
    let info = BackendInfo::new(OutputMode::Raw, 20, 640, 640);
    let backend = Arc::new(ReplayBackend::new(info, outputs).expect("replay"));
    let detector = Detector::new(backend, DecodeConfig::default()).expect("detector");
    let mut sink = CollectSink::default();
    let mut options = StreamOptions::new(vec![]);
    options.workers = 4;
    if let Err(e) = run_stream(&mut VecSource::new(frames), &detector, &options, &mut sink) {
        return Verdict::new(false, format!("stream failed: {e}"));
    }

    let mut worst = 0.0f64;
    let mut failures = 0;
    let mut objects = 0;
    for ((_, dets), want) in sink.frames.iter().zip(&expected) {
        objects += want.len();
        if dets.len() != want.len() {
            failures += 1;
            continue;
        }
        for (bbox, class_id) in want {
            let (ex, ey) = bbox.center();
            let nearest = dets
                .iter()
                .map(|d| {
                    let (x, y) = d.bbox.center();
                    (d, (x - ex).hypot(y - ey))
                })
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match nearest {
                Some((d, dist)) if d.class_id == *class_id => worst = worst.max(dist),
                _ => failures += 1,
            }
        }
    }
    Verdict::new(
        failures == 0 && worst < 0.5 && sink.frames.len() == 100,
        format!(
            "100 scenes, {objects} objects, {failures} scenes/objects wrong, max center error {worst:.2e} px (tol 0.5)"
        ),
    )
}

pub fn anchor_count() -> Verdict {
    let a = make_grid(640, 640, &[8, 16, 32]).map(|g| g.len());
    let b = make_grid(640, 384, &[8, 16, 32]).map(|g| g.len());
    Verdict::new(
        matches!((&a, &b), (Ok(8400), Ok(5040))),
        format!("640x640 -> {a:?}, 640x384 -> {b:?}"),
    )
}

pub fn augmentation() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa06);
    // Pixels are never pure black or white, so every noised pixel changes.
    let img = RgbImage::from_fn(100, 100, |_, _| Rgb([rng.random_range(1..255), rng.random_range(1..255), rng.random_range(1..255)]));
    let noisy = augment_noise(&img, 0.05, 7);
    let changed = img.pixels().zip(noisy.pixels()).filter(|(a, b)| a != b).count();

    let boxes = vec![LabelEntry::new(2, NormBox::new(0.5, 0.5, 0.3, 0.4))];
    let spec = AugmentSpec::default();
    let a = augment_sample(&img, &boxes, &spec, 99);
    let b = augment_sample(&img, &boxes, &spec, 99);
    let c = augment_sample(&img, &boxes, &spec, 100);
    let same_seed = a == b;
    let other_seed = a.0 != c.0;

    let mut hull_failures = 0;
    let mut dropped = 0;
    for _ in 0..1000 {
        let (w, h) = (rng.random_range(32..1200u32), rng.random_range(32..1200u32));
        let (bw, bh) = (rng.random_range(0.02..1.0f64), rng.random_range(0.02..1.0f64));
        let (cx, cy) = (rng.random_range(bw / 2.0..=1.0 - bw / 2.0), rng.random_range(bh / 2.0..=1.0 - bh / 2.0));
        let angle = rng.random_range(-45.0..=45.0);
        let got = rotate_box(&NormBox::new(cx, cy, bw, bh), w, h, angle);
        let want = hull_oracle(cx, cy, bw, bh, w, h, angle);
        match (got, want) {
            (None, None) => dropped += 1,
            (Some(g), Some([x1, y1, x2, y2])) => {
                let edges = [g.cx - g.w / 2.0, g.cy - g.h / 2.0, g.cx + g.w / 2.0, g.cy + g.h / 2.0];
                let ok = edges.iter().zip([x1, y1, x2, y2]).all(|(a, b)| (a - b).abs() < 1e-9);
                hull_failures += (!ok) as usize;
            }
            _ => hull_failures += 1,
        }
    }
    Verdict::new(
        changed == 500 && same_seed && other_seed && hull_failures == 0,
        format!(
            "noise changed {changed}/10000 pixels (want 500), same seed identical: {same_seed}, \
             other seed differs: {other_seed}, rotate-hull {hull_failures}/1000 failures ({dropped} dropped below 20% area)"
        ),
    )
}

/// Rotated-corner hull clipped to the image, in unit edges; `None` when the
/// clipped hull keeps less than a fifth of the box area.
fn hull_oracle(cx: f64, cy: f64, bw: f64, bh: f64, w: u32, h: u32, angle: f64) -> Option<[f64; 4]> {
    let (wf, hf) = (w as f64, h as f64);
    let (x1, y1, x2, y2) = ((cx - bw / 2.0) * wf, (cy - bh / 2.0) * hf, (cx + bw / 2.0) * wf, (cy + bh / 2.0) * hf);
    let pts: Vec<(f64, f64)> = [(x1, y1), (x2, y1), (x2, y2), (x1, y2)]
        .iter()
        .map(|&(x, y)| oracle::rotate_screen_point(x, y, wf / 2.0, hf / 2.0, angle))
        .collect();
    let lo = |f: fn(&(f64, f64)) -> f64| pts.iter().map(f).fold(f64::INFINITY, f64::min);
    let hi = |f: fn(&(f64, f64)) -> f64| pts.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let hx1 = lo(|p| p.0).max(0.0);
    let hy1 = lo(|p| p.1).max(0.0);
    let hx2 = hi(|p| p.0).min(wf);
    let hy2 = hi(|p| p.1).min(hf);
    let area = (hx2 - hx1).max(0.0) * (hy2 - hy1).max(0.0);
    if area <= 0.0 || area < 0.2 * (x2 - x1) * (y2 - y1) {
        return None;
    }
    Some([hx1 / wf, hy1 / hf, hx2 / wf, hy2 / hf])
}

pub fn random_label_set<R: Rng>(rng: &mut R) -> Vec<LabelEntry> {
    (0..rng.random_range(0..=20))
        .map(|_| {
            let (w, h) = (rng.random_range(1e-4..0.9), rng.random_range(1e-4..0.9));
            let cx = rng.random_range(w / 2.0 + 1e-5..1.0 - w / 2.0 - 1e-5);
            let cy = rng.random_range(h / 2.0 + 1e-5..1.0 - h / 2.0 - 1e-5);
            LabelEntry::new(rng.random_range(0..20), NormBox::new(cx, cy, w, h))
        })
        .collect()
}

/// `parse(write(x))` equals `x` to six decimals.
pub fn label_set_round_trips(set: &[LabelEntry]) -> bool {
    let text = write_label_file(set);
    let Ok(back) = parse_label_file(&text, 20) else { return false };
    let close = |a: f64, b: f64| (a - b).abs() <= 5e-7 + 1e-12;
    back.len() == set.len()
        && back.iter().zip(set).all(|(p, x)| {
            p.class_id == x.class_id
                && close(p.bbox.cx, x.bbox.cx)
                && close(p.bbox.cy, x.bbox.cy)
                && close(p.bbox.w, x.bbox.w)
                && close(p.bbox.h, x.bbox.h)
        })
        && write_label_file(&back) == text
}

/// Writes 20 classes x 295 labeled images split over train and val and
/// returns the manifest.
pub fn synthetic_sign_dataset(root: &std::path::Path) -> DatasetManifest {
    let mut png = Vec::new();
    RgbImage::from_pixel(8, 8, Rgb([90, 90, 90]))
        .write_to(&mut std::io::Cursor::new(&mut png), image::ImageFormat::Png)
        .expect("encode");
    let names: Vec<String> = (0..20).map(|i| format!("sign{i:02}")).collect();
    for split in ["train", "val"] {
        std::fs::create_dir_all(root.join("images").join(split)).unwrap();
        std::fs::create_dir_all(root.join("labels").join(split)).unwrap();
    }
    for class_id in 0..20 {
        for i in 0..295 {
            let split = if i % 5 == 0 { "val" } else { "train" };
            let stem = format!("{class_id:02}_{i:03}");
            std::fs::write(root.join("images").join(split).join(format!("{stem}.png")), &png).unwrap();
            let label = write_label_file(&[LabelEntry::new(class_id, NormBox::new(0.5, 0.5, 0.4, 0.6))]);
            std::fs::write(root.join("labels").join(split).join(format!("{stem}.txt")), label).unwrap();
        }
    }
    let yaml = format!(
        "path: {}\ntrain: images/train\nval: images/val\nnames: [{}]\n",
        root.display(),
        names.join(", ")
    );
    std::fs::write(root.join("data.yaml"), yaml).unwrap();
    msl_core::dataset::load_manifest(&root.join("data.yaml")).expect("manifest")
}

pub fn labels_and_total() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1abe1);
    let mut failures = 0;
    for _ in 0..10_000 {
        let set = random_label_set(&mut rng);
        failures += (!label_set_round_trips(&set)) as usize;
    }
    let dir = tempfile::tempdir().expect("tempdir");
    let manifest = synthetic_sign_dataset(dir.path());
    let total = dataset_stats(&manifest).map(|s| (s.total_images(), s.total.boxes));
    Verdict::new(
        failures == 0 && matches!(total, Ok((5900, 5900))),
        format!("10000 label sets, {failures} round-trip failures; 20x295 dataset stats (images, boxes) = {total:?}"),
    )
}

/// A 640x640, 20-class raw frame with ten objects, each with a 3x3 block of
/// confident neighbours, over random background logits.
pub fn busy_raw_frame(seed: u64) -> msl_core::decode::RawHeadOutput {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = SynthLayout::new(640, 640, 20);
    let objects: Vec<PlantedObject> = (0..10)
        .map(|i| {
            let x = 20.0 + 60.0 * i as f64;
            PlantedObject {
                bbox: PixelBox::new(x, 100.0 + 30.0 * i as f64, x + 48.0, 180.0 + 30.0 * i as f64),
                class_id: i * 2,
                logit: 3.0,
            }
        })
        .collect();
    let mut raw = plant_raw(&layout, &objects).expect("objects fit");
    let reg_max = raw.reg_max;
    let level = &mut raw.levels[0];
    let n = level.cells();
    for c in 0..20 {
        for v in level.plane_mut(4 * reg_max + c) {
            if *v < 0.0 {
                *v = rng.random_range(-9.0..-3.0);
            }
        }
    }
    for obj in &objects {
        let (cx, cy) = obj.bbox.center();
        let (col, row) = ((cx / 8.0) as usize, (cy / 8.0) as usize);
        for dr in [-1i64, 0, 1] {
            for dc in [-1i64, 0, 1] {
                let cell = (row as i64 + dr) as usize * level.cols + (col as i64 + dc) as usize;
                let idx = (4 * reg_max + obj.class_id) * n + cell;
                if level.data[idx] < 0.0 {
                    level.data[idx] = rng.random_range(0.0..2.5);
                }
            }
        }
    }
    raw
}

pub fn throughput() -> Verdict {
    let raw = busy_raw_frame(5);
    let grid = make_grid(640, 640, &[8, 16, 32]).expect("grid");
    let config = DecodeConfig::default();
    let mut samples = Vec::with_capacity(200);
    let mut kept = 0;
    let mut candidates = 0;
    for _ in 0..200 {
        let t = Instant::now();
        let dets = decode_raw(&raw, &grid, config.conf_threshold).expect("decode");
        candidates = dets.len();
        let out = nms(&dets, config.nms_iou_threshold, true, config.max_detections);
        samples.push(t.elapsed());
        kept = out.len();
    }
    samples.sort();
    let median = samples[samples.len() / 2];
    Verdict::new(
        median < Duration::from_millis(5),
        format!(
            "8400 anchors x 20 classes, {candidates} candidates -> {kept} kept, median {:.3} ms over 200 runs (limit 5 ms)",
            median.as_secs_f64() * 1e3
        ),
    )
}

pub fn stream_bytes(workers: usize) -> Result<Vec<u8>, String> {
    let (frames, backend) = caption_clip(0xc1a9);
    let detector = Detector::new(Arc::new(backend), DecodeConfig::default()).map_err(|e| e.to_string())?;
    let names: Vec<String> = (0..20).map(|i| format!("sign{i:02}")).collect();
    let mut options = StreamOptions::new(names);
    options.workers = workers;
    options.captions = Some(Default::default());
    let mut sink = JsonLinesSink::new(Vec::new());
    run_stream(&mut VecSource::new(frames), &detector, &options, &mut sink).map_err(|e| e.to_string())?;
    Ok(sink.into_inner())
}

pub fn pipeline_determinism() -> Verdict {
    let runs: Vec<Result<Vec<u8>, String>> = [1, 4, 8].iter().map(|&w| stream_bytes(w)).collect();
    let first = match &runs[0] {
        Ok(b) => b.clone(),
        Err(e) => return Verdict::new(false, format!("stream failed: {e}")),
    };
    let identical = runs.iter().all(|r| r.as_ref().is_ok_and(|b| *b == first));
    let text = String::from_utf8_lossy(&first);
    let lines = text.lines().count();
    let events = text.lines().filter(|l| l.starts_with("{\"event\"")).count();
    Verdict::new(
        identical && lines > 100,
        format!("100 frames, {lines} lines ({events} caption events), byte-identical for workers 1/4/8: {identical}"),
    )
}
