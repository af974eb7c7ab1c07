//! Frame-by-frame detection and the ordered multi-worker stream driver.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::backend::{output_mode, ModelBackend};
use super::caption::{CaptionConfig, CaptionEvent, CaptionState};
use super::preprocess::preprocess;
use super::source::{Frame, FrameSource};
use super::PipelineError;
use crate::decode::{decode_and_suppress, make_grid, AnchorPoint, DecodeConfig, Detection};
use crate::geometry::unmap_box;

/// Wall time spent in each stage for one frame.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimings {
    pub preprocess: Duration,
    pub infer: Duration,
    pub decode: Duration,
}

/// Runs single frames through preprocess, inference, decoding, NMS and unmapping.
pub struct Detector {
    backend: Arc<dyn ModelBackend>,
    config: DecodeConfig,
    grid: Vec<AnchorPoint>,
    serial: Mutex<()>,
}

impl Detector {
    pub fn new(backend: Arc<dyn ModelBackend>, config: DecodeConfig) -> Result<Self, PipelineError> {
        config.validate().map_err(PipelineError::Config)?;
        let info = backend.info();
        let grid = make_grid(info.input_w, info.input_h, &info.strides)?;
        Ok(Self {
            backend,
            config,
            grid,
            serial: Mutex::new(()),
        })
    }

    pub fn config(&self) -> &DecodeConfig {
        &self.config
    }

    pub fn backend(&self) -> &dyn ModelBackend {
        self.backend.as_ref()
    }

    /// Detections in source-image pixels, highest score first.
    pub fn run_frame(&self, frame: &Frame) -> Result<Vec<Detection>, PipelineError> {
        self.run_frame_timed(frame).map(|(d, _)| d)
    }

    pub fn run_frame_timed(&self, frame: &Frame) -> Result<(Vec<Detection>, StageTimings), PipelineError> {
        let info = self.backend.info();
        let t0 = Instant::now();
        let (input, meta) = preprocess(&frame.image, info.input_w, info.input_h);
        let t1 = Instant::now();
        let output = {
            let _guard = (!info.concurrent).then(|| self.serial.lock().unwrap_or_else(|e| e.into_inner()));
            self.backend.infer(frame.index, &input)
        }
        .map_err(|source| PipelineError::Backend {
            frame: frame.index,
            source,
        })?;
        let produced = output_mode(&output);
        if produced != info.mode {
            return Err(PipelineError::Backend {
                frame: frame.index,
                source: super::BackendError::ModeMismatch {
                    declared: info.mode,
                    produced,
                },
            });
        }
        let t2 = Instant::now();
        let mut dets = decode_and_suppress(&output, &self.grid, &self.config)?;
        for d in &mut dets {
            d.bbox = unmap_box(&d.bbox, &meta);
        }
        let t3 = Instant::now();
        Ok((
            dets,
            StageTimings {
                preprocess: t1 - t0,
                infer: t2 - t1,
                decode: t3 - t2,
            },
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    #[serde(rename = "box")]
    pub bbox: [f64; 4],
    #[serde(rename = "class")]
    pub class_id: usize,
    pub label: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    pub detections: Vec<DetectionRecord>,
}

impl FrameRecord {
    pub fn new(frame: &Frame, dets: &[Detection], names: &[String]) -> Self {
        Self {
            frame: frame.index,
            image: frame.name.clone(),
            detections: dets
                .iter()
                .map(|d| DetectionRecord {
                    bbox: d.bbox.to_array(),
                    class_id: d.class_id,
                    label: names.get(d.class_id).cloned().unwrap_or_else(|| d.class_id.to_string()),
                    score: d.score,
                })
                .collect(),
        }
    }
}

#[derive(Serialize)]
struct EventRecord<'a> {
    event: &'a CaptionEvent,
}

/// Receives results strictly in frame order.
pub trait DetectionSink {
    fn frame(&mut self, frame: &Frame, record: &FrameRecord, detections: &[Detection]) -> std::io::Result<()>;
    fn event(&mut self, event: &CaptionEvent) -> std::io::Result<()>;
}

/// One JSON object per line: frame records and `{"event": ...}` records.
pub struct JsonLinesSink<W: Write> {
    out: W,
}

impl<W: Write> JsonLinesSink<W> {
    pub fn new(out: W) -> Self {
        Self { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> DetectionSink for JsonLinesSink<W> {
    fn frame(&mut self, _frame: &Frame, record: &FrameRecord, _detections: &[Detection]) -> std::io::Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")
    }

    fn event(&mut self, event: &CaptionEvent) -> std::io::Result<()> {
        serde_json::to_writer(&mut self.out, &EventRecord { event })?;
        self.out.write_all(b"\n")
    }
}

#[derive(Debug, Clone)]
pub struct StreamOptions {
    pub workers: usize,
    pub captions: Option<CaptionConfig>,
    pub names: Vec<String>,
}

impl StreamOptions {
    pub fn new(names: Vec<String>) -> Self {
        Self {
            workers: 1,
            captions: None,
            names,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub mean_ms: f64,
    pub median_ms: f64,
}

impl LatencyStats {
    fn from(samples: &[Duration]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let mut ms: Vec<f64> = samples.iter().map(|d| d.as_secs_f64() * 1e3).collect();
        ms.sort_by(f64::total_cmp);
        let mid = ms.len() / 2;
        let median = if ms.len().is_multiple_of(2) {
            (ms[mid - 1] + ms[mid]) / 2.0
        } else {
            ms[mid]
        };
        Self {
            mean_ms: ms.iter().sum::<f64>() / ms.len() as f64,
            median_ms: median,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StreamSummary {
    pub frames: u64,
    pub detections: u64,
    pub events: u64,
    pub fps: f64,
    pub preprocess: LatencyStats,
    pub infer: LatencyStats,
    pub decode: LatencyStats,
}

type FrameResult = Result<(Frame, Vec<Detection>, StageTimings), PipelineError>;

struct Collector<'a> {
    sink: &'a mut dyn DetectionSink,
    captions: Option<CaptionState>,
    names: &'a [String],
    summary: StreamSummary,
    timings: Vec<StageTimings>,
}

impl Collector<'_> {
    fn accept(&mut self, result: FrameResult) -> Result<(), PipelineError> {
        let (frame, dets, timings) = result?;
        let record = FrameRecord::new(&frame, &dets, self.names);
        self.sink.frame(&frame, &record, &dets).map_err(PipelineError::Sink)?;
        self.summary.frames += 1;
        self.summary.detections += dets.len() as u64;
        self.timings.push(timings);
        if let Some(state) = &mut self.captions {
            for event in state.step(frame.index, &dets) {
                self.sink.event(&event).map_err(PipelineError::Sink)?;
                self.summary.events += 1;
            }
        }
        Ok(())
    }

    fn finish(mut self, elapsed: Duration) -> Result<StreamSummary, PipelineError> {
        if let Some(state) = &mut self.captions {
            for event in state.flush() {
                self.sink.event(&event).map_err(PipelineError::Sink)?;
                self.summary.events += 1;
            }
        }
        let pick = |f: fn(&StageTimings) -> Duration| self.timings.iter().map(f).collect::<Vec<_>>();
        self.summary.preprocess = LatencyStats::from(&pick(|t| t.preprocess));
        self.summary.infer = LatencyStats::from(&pick(|t| t.infer));
        self.summary.decode = LatencyStats::from(&pick(|t| t.decode));
        let secs = elapsed.as_secs_f64();
        self.summary.fps = if secs > 0.0 { self.summary.frames as f64 / secs } else { 0.0 };
        Ok(self.summary)
    }
}

fn log_failure(err: &PipelineError) {
    if let PipelineError::Backend { frame, .. } = err {
        log::error!("backend failed on frame {frame}: {err}");
    }
}

/// Processes every frame in index order, feeding captions and the sink.
///
/// With `workers > 1`, frames are preprocessed and decoded concurrently and
/// released to the sink by an ordered collector, so the sink sees the same
/// sequence for any worker count.
pub fn run_stream(
    source: &mut dyn FrameSource,
    detector: &Detector,
    options: &StreamOptions,
    sink: &mut dyn DetectionSink,
) -> Result<StreamSummary, PipelineError> {
    if let Some(c) = &options.captions {
        c.validate().map_err(PipelineError::Config)?;
    }
    let started = Instant::now();
    let mut collector = Collector {
        sink,
        captions: options.captions.map(|c| CaptionState::new(c, options.names.clone())),
        names: &options.names,
        summary: StreamSummary::default(),
        timings: Vec::new(),
    };

    let process = |frame: Frame| -> FrameResult {
        let (dets, t) = detector.run_frame_timed(&frame)?;
        Ok((frame, dets, t))
    };

    if options.workers <= 1 {
        while let Some(frame) = source.next_frame() {
            let result = frame.and_then(process);
            if let Err(e) = &result {
                log_failure(e);
            }
            collector.accept(result)?;
        }
        return collector.finish(started.elapsed());
    }

    let workers = options.workers;
    let outcome = std::thread::scope(|scope| -> Result<(), PipelineError> {
        let (work_tx, work_rx) = crossbeam_channel::bounded::<(u64, Result<Frame, PipelineError>)>(2 * workers);
        let (done_tx, done_rx) = crossbeam_channel::bounded::<(u64, FrameResult)>(2 * workers);

        scope.spawn(move || {
            let mut seq = 0u64;
            while let Some(frame) = source.next_frame() {
                if work_tx.send((seq, frame)).is_err() {
                    break;
                }
                seq += 1;
            }
        });
        for _ in 0..workers {
            let (rx, tx) = (work_rx.clone(), done_tx.clone());
            let process = &process;
            scope.spawn(move || {
                for (seq, frame) in rx {
                    if tx.send((seq, frame.and_then(process))).is_err() {
                        break;
                    }
                }
            });
        }
        drop(done_tx);
        drop(work_rx);

        let mut pending = BTreeMap::new();
        let mut next = 0u64;
        for (seq, result) in &done_rx {
            pending.insert(seq, result);
            while let Some(result) = pending.remove(&next) {
                next += 1;
                if let Err(e) = &result {
                    log_failure(e);
                }
                // Returning drops the receivers, which stops producer and workers.
                collector.accept(result)?;
            }
        }
        Ok(())
    });
    outcome?;
    collector.finish(started.elapsed())
}
