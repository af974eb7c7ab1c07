//! Real-time path: preprocess, model backend, decode, unmap, captions.

pub mod annotate;
pub mod backend;
pub mod caption;
#[cfg(feature = "onnx")]
pub mod onnx;
pub mod preprocess;
pub mod source;
pub mod stream;
pub mod tensorfile;

use thiserror::Error;

pub use backend::{BackendError, BackendInfo, ModelBackend, ModelMetadata, ReplayBackend};
pub use caption::{CaptionConfig, CaptionEvent, CaptionState};
pub use preprocess::{preprocess, InputTensor};
pub use source::{ChannelSource, DirectorySource, Frame, FrameSource, SingleImageSource, VecSource};
pub use stream::{run_stream, DetectionRecord, Detector, DetectionSink, FrameRecord, JsonLinesSink, StreamOptions, StreamSummary};
pub use tensorfile::{OutputMode, TensorFile};

use crate::decode::DecodeError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("backend failure on frame {frame}: {source}")]
    Backend {
        frame: u64,
        #[source]
        source: BackendError,
    },
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error("frame source: {0}")]
    Source(String),
    #[error("sink: {0}")]
    Sink(std::io::Error),
    #[error("configuration: {0}")]
    Config(String),
}
