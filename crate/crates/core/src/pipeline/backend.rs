//! Model backends: the boundary behind which trained weights run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::preprocess::InputTensor;
use super::tensorfile::{OutputMode, TensorFile, TensorFileError};
use crate::decode::{HeadOutput, DEFAULT_REG_MAX, DEFAULT_STRIDES};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error(transparent)]
    TensorFile(#[from] TensorFileError),
    #[error("cannot load model {path}: {reason}")]
    Load { path: PathBuf, reason: String },
    #[error("inference failed: {0}")]
    Inference(String),
    #[error("backend declared {declared:?} output but produced {produced:?}")]
    ModeMismatch {
        declared: OutputMode,
        produced: OutputMode,
    },
}

/// What a backend declares about its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendInfo {
    pub mode: OutputMode,
    pub reg_max: usize,
    pub nc: usize,
    pub strides: Vec<u32>,
    pub input_w: u32,
    pub input_h: u32,
    /// True when `infer` may run on several threads at once.
    pub concurrent: bool,
}

impl BackendInfo {
    pub fn new(mode: OutputMode, nc: usize, input_w: u32, input_h: u32) -> Self {
        Self {
            mode,
            reg_max: DEFAULT_REG_MAX,
            nc,
            strides: DEFAULT_STRIDES.to_vec(),
            input_w,
            input_h,
            concurrent: false,
        }
    }
}

/// A detector that maps a planar RGB input in `[0, 1]` to head outputs.
///
/// Backends that do not set [`BackendInfo::concurrent`] are only ever called
/// from one thread at a time.
pub trait ModelBackend: Send + Sync {
    fn info(&self) -> &BackendInfo;

    fn infer(&self, frame_index: u64, input: &InputTensor) -> Result<HeadOutput, BackendError>;
}

pub fn output_mode(out: &HeadOutput) -> OutputMode {
    match out {
        HeadOutput::Raw(_) => OutputMode::Raw,
        HeadOutput::Pretransformed(_) => OutputMode::Pretransformed,
    }
}

/// Replays recorded head outputs: frame `i` receives entry `i mod len`.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    info: BackendInfo,
    outputs: Vec<HeadOutput>,
}

impl ReplayBackend {
    pub fn new(info: BackendInfo, outputs: Vec<HeadOutput>) -> Result<Self, BackendError> {
        if outputs.is_empty() {
            return Err(BackendError::Inference("replay backend needs at least one output".into()));
        }
        for out in &outputs {
            let produced = output_mode(out);
            if produced != info.mode {
                return Err(BackendError::ModeMismatch {
                    declared: info.mode,
                    produced,
                });
            }
        }
        Ok(Self {
            info: BackendInfo {
                concurrent: true,
                ..info
            },
            outputs,
        })
    }

    /// Loads one tensor file, or every `*.tensor` file of a directory in name order.
    pub fn from_path(path: &Path, input_w: u32, input_h: u32) -> Result<Self, BackendError> {
        let files: Vec<PathBuf> = if path.is_dir() {
            let mut v: Vec<PathBuf> = std::fs::read_dir(path)
                .map_err(TensorFileError::from)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "tensor"))
                .collect();
            v.sort();
            v
        } else {
            vec![path.to_path_buf()]
        };
        if files.is_empty() {
            return Err(BackendError::Load {
                path: path.to_path_buf(),
                reason: "no .tensor files found".into(),
            });
        }
        let mut info = None;
        let mut outputs = Vec::with_capacity(files.len());
        for f in &files {
            let tf = TensorFile::load(f)?;
            let h = &tf.header;
            let this = BackendInfo {
                mode: h.mode,
                reg_max: h.reg_max.unwrap_or(DEFAULT_REG_MAX),
                nc: h.nc,
                strides: h.strides.clone().unwrap_or_else(|| DEFAULT_STRIDES.to_vec()),
                input_w,
                input_h,
                concurrent: true,
            };
            match &info {
                None => info = Some(this),
                Some(prev) if *prev != this => {
                    return Err(BackendError::Load {
                        path: f.clone(),
                        reason: "header disagrees with the first replay file".into(),
                    })
                }
                _ => {}
            }
            outputs.push(tf.to_head_output(input_w, input_h)?);
        }
        Self::new(info.expect("at least one file"), outputs)
    }
}

impl ModelBackend for ReplayBackend {
    fn info(&self) -> &BackendInfo {
        &self.info
    }

    fn infer(&self, frame_index: u64, _input: &InputTensor) -> Result<HeadOutput, BackendError> {
        Ok(self.outputs[(frame_index % self.outputs.len() as u64) as usize].clone())
    }
}

/// Sidecar metadata written next to an exported model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub mode: OutputMode,
    pub reg_max: usize,
    pub nc: usize,
    pub strides: Vec<u32>,
    pub input_w: u32,
    pub input_h: u32,
    pub names: Vec<String>,
}

impl ModelMetadata {
    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let text = std::fs::read_to_string(path).map_err(|e| BackendError::Load {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| BackendError::Load {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.names.len() != self.nc {
            return Err(format!("{} names for nc = {}", self.names.len(), self.nc));
        }
        if !self.input_w.is_multiple_of(32) || !self.input_h.is_multiple_of(32) {
            return Err(format!("input {}x{} is not a multiple of 32", self.input_w, self.input_h));
        }
        Ok(())
    }

    pub fn backend_info(&self) -> BackendInfo {
        BackendInfo {
            mode: self.mode,
            reg_max: self.reg_max,
            nc: self.nc,
            strides: self.strides.clone(),
            input_w: self.input_w,
            input_h: self.input_h,
            concurrent: false,
        }
    }
}
