use std::path::{Path, PathBuf};
use std::sync::Arc;

use crossbeam_channel::Receiver;
use image::RgbImage;

use super::PipelineError;
use crate::dataset::manifest::is_image_path;

#[derive(Debug, Clone)]
pub struct Frame {
    pub index: u64,
    pub image: Arc<RgbImage>,
    /// Seconds since the start of the stream.
    pub timestamp: f64,
    /// File name when the frame came from disk.
    pub name: Option<String>,
}

/// Ordered stream of frames with strictly increasing indices.
pub trait FrameSource: Send {
    fn next_frame(&mut self) -> Option<Result<Frame, PipelineError>>;
}

fn load(path: &Path) -> Result<RgbImage, PipelineError> {
    image::open(path)
        .map(|i| i.to_rgb8())
        .map_err(|e| PipelineError::Source(format!("{}: {e}", path.display())))
}

/// Every image of a directory in file-name order, timestamped at a nominal rate.
pub struct DirectorySource {
    files: std::vec::IntoIter<PathBuf>,
    next_index: u64,
    fps: f64,
}

impl DirectorySource {
    pub fn new(dir: &Path, fps: f64) -> Result<Self, PipelineError> {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| PipelineError::Source(format!("{}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_file() && is_image_path(p))
            .collect();
        files.sort();
        Ok(Self {
            files: files.into_iter(),
            next_index: 0,
            fps,
        })
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.len() == 0
    }
}

impl FrameSource for DirectorySource {
    fn next_frame(&mut self) -> Option<Result<Frame, PipelineError>> {
        let path = self.files.next()?;
        let index = self.next_index;
        self.next_index += 1;
        Some(load(&path).map(|image| Frame {
            index,
            image: Arc::new(image),
            timestamp: index as f64 / self.fps,
            name: path.file_name().map(|n| n.to_string_lossy().into_owned()),
        }))
    }
}

/// A single still image as a one-frame stream.
pub struct SingleImageSource {
    path: Option<PathBuf>,
}

impl SingleImageSource {
    pub fn new(path: &Path) -> Self {
        Self {
            path: Some(path.to_path_buf()),
        }
    }
}

impl FrameSource for SingleImageSource {
    fn next_frame(&mut self) -> Option<Result<Frame, PipelineError>> {
        let path = self.path.take()?;
        Some(load(&path).map(|image| Frame {
            index: 0,
            image: Arc::new(image),
            timestamp: 0.0,
            name: path.file_name().map(|n| n.to_string_lossy().into_owned()),
        }))
    }
}

/// In-memory frames, mostly for tests and embedding.
pub struct VecSource {
    frames: std::vec::IntoIter<Frame>,
}

impl VecSource {
    pub fn new(frames: Vec<Frame>) -> Self {
        Self {
            frames: frames.into_iter(),
        }
    }
}

impl FrameSource for VecSource {
    fn next_frame(&mut self) -> Option<Result<Frame, PipelineError>> {
        self.frames.next().map(Ok)
    }
}

/// Adapter slot for live capture: a capture thread pushes frames into the
/// channel; the stream ends when the sender is dropped.
pub struct ChannelSource {
    rx: Receiver<Frame>,
    last_index: Option<u64>,
}

impl ChannelSource {
    pub fn new(rx: Receiver<Frame>) -> Self {
        Self { rx, last_index: None }
    }
}

impl FrameSource for ChannelSource {
    fn next_frame(&mut self) -> Option<Result<Frame, PipelineError>> {
        let frame = self.rx.recv().ok()?;
        if self.last_index.is_some_and(|last| frame.index <= last) {
            return Some(Err(PipelineError::Source(format!(
                "frame index {} does not increase",
                frame.index
            ))));
        }
        self.last_index = Some(frame.index);
        Some(Ok(frame))
    }
}
