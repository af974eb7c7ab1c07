//! Shared stream fixtures and sinks.

use std::sync::Arc;

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use msl_core::decode::synth::{plant_raw, PlantedObject, SynthLayout};
use msl_core::decode::{Detection, HeadOutput};
use msl_core::geometry::PixelBox;
use msl_core::pipeline::caption::CaptionEvent;
use msl_core::pipeline::{BackendInfo, DetectionSink, Frame, FrameRecord, OutputMode, ReplayBackend};

/// Keeps every frame's detections and every caption event.
#[derive(Default)]
pub struct CollectSink {
    pub frames: Vec<(u64, Vec<Detection>)>,
    pub events: Vec<CaptionEvent>,
}

impl DetectionSink for CollectSink {
    fn frame(&mut self, frame: &Frame, _record: &FrameRecord, detections: &[Detection]) -> std::io::Result<()> {
        self.frames.push((frame.index, detections.to_vec()));
        Ok(())
    }

    fn event(&mut self, event: &CaptionEvent) -> std::io::Result<()> {
        self.events.push(event.clone());
        Ok(())
    }
}

pub fn frame(index: u64, image: RgbImage) -> Frame {
    Frame {
        index,
        image: Arc::new(image),
        timestamp: index as f64 / 30.0,
        name: Some(format!("frame_{index:05}.png")),
    }
}

/// A 100-frame clip of 640x480 frames where three signs come and go with
/// occasional dropouts, replayed at a 640x640 input.
pub fn caption_clip(seed: u64) -> (Vec<Frame>, ReplayBackend) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = SynthLayout::new(640, 640, 20);
    // letterbox of 640x480 into 640x640: scale 1, vertical pad 80
    let tracks = [
        (3usize, 5u64, 60u64, PixelBox::new(100.0, 200.0, 220.0, 330.0)),
        (19, 30, 95, PixelBox::new(400.0, 150.0, 520.0, 300.0)),
        (7, 70, 100, PixelBox::new(250.0, 400.0, 330.0, 520.0)),
    ];
    let mut frames = Vec::new();
    let mut outputs = Vec::new();
    for f in 0..100u64 {
        let mut objects = Vec::new();
        for &(class_id, start, end, bbox) in &tracks {
            if (start..end).contains(&f) && !rng.random_bool(0.15) {
                let d = rng.random_range(-2.0..2.0);
                objects.push(PlantedObject {
                    bbox: PixelBox::new(bbox.x1 + d, bbox.y1 + d, bbox.x2 + d, bbox.y2 + d),
                    class_id,
                    logit: rng.random_range(-0.5..4.0),
                });
            }
        }
        outputs.push(HeadOutput::Raw(plant_raw(&layout, &objects).expect("fixture objects fit")));
        frames.push(frame(f, RgbImage::from_pixel(640, 480, Rgb([40, 60, 80]))));
    }
    let info = BackendInfo::new(OutputMode::Raw, 20, 640, 640);
    (frames, ReplayBackend::new(info, outputs).expect("valid replay"))
}
