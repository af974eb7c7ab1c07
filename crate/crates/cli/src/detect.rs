use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use anyhow::{anyhow, bail, Context};
use clap::Args;

use msl_core::dataset::load_manifest;
use msl_core::dataset::manifest::default_class_names;
use msl_core::decode::DecodeConfig;
use msl_core::pipeline::annotate::AnnotatingSink;
use msl_core::pipeline::{
    run_stream, CaptionConfig, ChannelSource, Detector, DirectorySource, Frame, FrameSource,
    JsonLinesSink, ModelBackend, ModelMetadata, ReplayBackend, SingleImageSource, StreamOptions,
};

use crate::config::{parse_size, FileConfig};
use crate::Outcome;

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Image file, directory of frames, or `-` for frame paths read line by line from stdin.
    #[arg(long)]
    pub input: PathBuf,
    /// ONNX model, or a `.tensor` file / directory of recorded head outputs to replay.
    #[arg(long, env = "MSL_MODEL")]
    pub model: Option<PathBuf>,
    /// Sidecar metadata JSON; defaults to `<model>.json` or `metadata.json` next to the model.
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    /// Network input size for replayed tensors without metadata.
    #[arg(long, value_parser = parse_size)]
    pub input_size: Option<(u32, u32)>,
    /// Take class names from this manifest when there is no metadata.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Minimum class score.
    #[arg(long)]
    pub conf: Option<f64>,
    /// NMS IoU threshold.
    #[arg(long)]
    pub iou: Option<f64>,
    #[arg(long)]
    pub max_det: Option<usize>,
    /// Suppress across classes instead of per class.
    #[arg(long)]
    pub agnostic: bool,
    /// Emit caption events alongside frame records.
    #[arg(long)]
    pub captions: bool,
    #[arg(long, default_value_t = 15)]
    pub caption_window: usize,
    #[arg(long, default_value_t = 10)]
    pub caption_hits: usize,
    /// Write annotated frames into this directory.
    #[arg(long)]
    pub annotate: Option<PathBuf>,
    /// JSON-lines destination instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Pipeline workers; defaults to the number of available cores.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Nominal frame rate used for timestamps.
    #[arg(long, default_value_t = 30.0)]
    pub fps: f64,
}

struct Loaded {
    backend: Arc<dyn ModelBackend>,
    names: Vec<String>,
}

fn sidecar(model: &Path) -> Option<PathBuf> {
    let candidates = if model.is_dir() {
        vec![model.join("metadata.json")]
    } else {
        vec![model.with_extension("json"), model.with_file_name("metadata.json")]
    };
    candidates.into_iter().find(|p| p.is_file())
}

fn placeholder_names(nc: usize) -> Vec<String> {
    let defaults = default_class_names();
    (0..nc)
        .map(|i| defaults.get(i).cloned().unwrap_or_else(|| i.to_string()))
        .collect()
}

#[cfg(feature = "onnx")]
fn load_onnx(model: &Path, meta: &ModelMetadata) -> anyhow::Result<Arc<dyn ModelBackend>> {
    Ok(Arc::new(msl_core::pipeline::onnx::OnnxBackend::load(model, meta)?))
}

#[cfg(not(feature = "onnx"))]
fn load_onnx(model: &Path, _meta: &ModelMetadata) -> anyhow::Result<Arc<dyn ModelBackend>> {
    bail!(
        "{}: this build has no ONNX runtime; rebuild with `--features onnx` or replay tensor files",
        model.display()
    )
}

fn load_backend(a: &DetectArgs, cfg: &FileConfig) -> anyhow::Result<Loaded> {
    let model = a
        .model
        .clone()
        .or_else(|| cfg.model.clone())
        .ok_or_else(|| anyhow!("no model given: pass --model, set MSL_MODEL or add `model` to the config file"))?;
    let meta_path = a.metadata.clone().or_else(|| cfg.metadata.clone()).or_else(|| sidecar(&model));
    let meta = meta_path
        .as_deref()
        .map(ModelMetadata::load)
        .transpose()?;
    if let Some(m) = &meta {
        m.validate().map_err(|e| anyhow!("metadata: {e}"))?;
    }

    if model.extension().is_some_and(|e| e == "onnx") {
        let meta = meta.ok_or_else(|| anyhow!("{} needs metadata JSON (--metadata)", model.display()))?;
        let backend = load_onnx(&model, &meta)?;
        return Ok(Loaded {
            backend,
            names: meta.names,
        });
    }

    let size = match (a.input_size, &meta, &cfg.input_size) {
        (Some(s), _, _) => s,
        (None, Some(m), _) => (m.input_w, m.input_h),
        (None, None, Some(s)) => parse_size(s).map_err(|e| anyhow!("config input_size: {e}"))?,
        (None, None, None) => (640, 640),
    };
    let backend = ReplayBackend::from_path(&model, size.0, size.1)?;
    let nc = backend.info().nc;
    let names = match (&meta, &a.manifest) {
        (Some(m), _) => m.names.clone(),
        (None, Some(p)) => load_manifest(p)?.names,
        (None, None) => placeholder_names(nc),
    };
    if names.len() != nc {
        bail!("{} class names for a model with nc = {nc}", names.len());
    }
    Ok(Loaded {
        backend: Arc::new(backend),
        names,
    })
}

/// Frame paths arriving on stdin, loaded on a reader thread.
fn stdin_source(fps: f64, failure: Arc<Mutex<Option<String>>>) -> ChannelSource {
    let (tx, rx) = crossbeam_channel::bounded(4);
    std::thread::spawn(move || {
        let start = std::time::Instant::now();
        for (index, line) in std::io::stdin().lock().lines().enumerate() {
            let line = match line {
                Ok(l) if l.trim().is_empty() => continue,
                Ok(l) => l,
                Err(e) => {
                    *failure.lock().unwrap() = Some(format!("stdin: {e}"));
                    break;
                }
            };
            let path = PathBuf::from(line.trim());
            let image = match image::open(&path) {
                Ok(i) => i.to_rgb8(),
                Err(e) => {
                    *failure.lock().unwrap() = Some(format!("{}: {e}", path.display()));
                    break;
                }
            };
            let frame = Frame {
                index: index as u64,
                image: Arc::new(image),
                timestamp: if fps > 0.0 { index as f64 / fps } else { start.elapsed().as_secs_f64() },
                name: path.file_name().map(|n| n.to_string_lossy().into_owned()),
            };
            if tx.send(frame).is_err() {
                break;
            }
        }
    });
    ChannelSource::new(rx)
}

pub fn run(a: DetectArgs, cfg: &FileConfig) -> anyhow::Result<Outcome> {
    let loaded = load_backend(&a, cfg)?;
    let defaults = DecodeConfig::default();
    let config = DecodeConfig {
        conf_threshold: a.conf.or(cfg.conf).unwrap_or(defaults.conf_threshold),
        nms_iou_threshold: a.iou.or(cfg.iou).unwrap_or(defaults.nms_iou_threshold),
        max_detections: a.max_det.or(cfg.max_det).unwrap_or(defaults.max_detections),
        class_aware: !a.agnostic,
    };
    let detector = Detector::new(loaded.backend, config)?;
    let workers = a
        .workers
        .or(cfg.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1);
    let options = StreamOptions {
        workers,
        captions: a.captions.then_some(CaptionConfig {
            window: a.caption_window,
            hits: a.caption_hits,
            ..CaptionConfig::default()
        }),
        names: loaded.names.clone(),
    };

    let failure = Arc::new(Mutex::new(None));
    let mut source: Box<dyn FrameSource> = if a.input.as_os_str() == "-" {
        Box::new(stdin_source(a.fps, failure.clone()))
    } else if a.input.is_dir() {
        Box::new(DirectorySource::new(&a.input, a.fps)?)
    } else if a.input.is_file() {
        Box::new(SingleImageSource::new(&a.input))
    } else {
        bail!("input {} does not exist", a.input.display());
    };

    let out: Box<dyn Write> = match &a.output {
        Some(p) => Box::new(std::fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let json = JsonLinesSink::new(BufWriter::new(out));
    let summary = match &a.annotate {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            let mut sink = AnnotatingSink::new(json, dir, loaded.names);
            let s = run_stream(source.as_mut(), &detector, &options, &mut sink);
            finish(sink.into_inner(), s)?
        }
        None => {
            let mut sink = json;
            let s = run_stream(source.as_mut(), &detector, &options, &mut sink);
            finish(sink, s)?
        }
    };
    if let Some(reason) = failure.lock().unwrap().take() {
        bail!("frame source stopped after {} frames: {reason}", summary.frames);
    }
    eprintln!(
        "{} frames, {} detections, {} caption events, {:.1} fps (infer median {:.2} ms, {} workers)",
        summary.frames, summary.detections, summary.events, summary.fps, summary.infer.median_ms, workers
    );
    Ok(Outcome::Clean)
}

fn finish<W: Write>(
    sink: JsonLinesSink<W>,
    result: Result<msl_core::pipeline::StreamSummary, msl_core::pipeline::PipelineError>,
) -> anyhow::Result<msl_core::pipeline::StreamSummary> {
    // Flush what was produced even when a frame failed.
    let mut w = sink.into_inner();
    let flushed = w.flush();
    let summary = result?;
    flushed.context("cannot write detections")?;
    Ok(summary)
}
