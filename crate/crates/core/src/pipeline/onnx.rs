//! ONNX models run in-process through tract.

use std::path::Path;
use std::sync::Arc;

use tract_onnx::prelude::*;

use super::backend::{BackendError, BackendInfo, ModelBackend, ModelMetadata};
use super::preprocess::InputTensor;
use super::tensorfile::OutputMode;
use crate::decode::{grid_levels, HeadLevel, HeadOutput, PretransformedOutput, RawHeadOutput};

/// Runs an exported detector; the sidecar metadata declares its output layout.
///
/// Accepted outputs: pretransformed `(1, 4 + nc, A)` or `(1, A, 4 + nc)`;
/// raw as one concatenated `(1, C, A)` tensor or one `(1, C, H, W)` tensor
/// per stride.
pub struct OnnxBackend {
    info: BackendInfo,
    plan: Arc<TypedRunnableModel>,
}

fn load_err(path: &Path) -> impl Fn(TractError) -> BackendError + '_ {
    move |e| BackendError::Load {
        path: path.to_path_buf(),
        reason: format!("{e:#}"),
    }
}

fn infer_err(e: TractError) -> BackendError {
    BackendError::Inference(format!("{e:#}"))
}

impl OnnxBackend {
    pub fn load(model: &Path, metadata: &ModelMetadata) -> Result<Self, BackendError> {
        metadata.validate().map_err(|reason| BackendError::Load {
            path: model.to_path_buf(),
            reason,
        })?;
        let (w, h) = (metadata.input_w as usize, metadata.input_h as usize);
        let plan = tract_onnx::onnx()
            .model_for_path(model)
            .and_then(|m| m.with_input_fact(0, f32::fact([1, 3, h, w]).into()))
            .and_then(|m| m.into_optimized())
            .and_then(|m| m.into_runnable())
            .map_err(load_err(model))?;
        let info = BackendInfo {
            concurrent: true,
            ..metadata.backend_info()
        };
        Ok(Self { info, plan })
    }

    fn to_raw(&self, outputs: &[TValue]) -> Result<RawHeadOutput, BackendError> {
        let info = &self.info;
        let channels = 4 * info.reg_max + info.nc;
        if outputs.len() == 1 {
            let view = outputs[0].to_plain_array_view::<f32>().map_err(infer_err)?;
            let data: Vec<f32> = view.iter().copied().collect();
            return RawHeadOutput::from_concatenated(&data, info.reg_max, info.nc, info.input_w, info.input_h, &info.strides)
                .map_err(|e| BackendError::Inference(e.to_string()));
        }
        let levels = grid_levels(info.input_w, info.input_h, &info.strides)
            .map_err(|e| BackendError::Inference(e.to_string()))?;
        if outputs.len() != levels.len() {
            return Err(BackendError::Inference(format!(
                "{} raw outputs for {} strides",
                outputs.len(),
                levels.len()
            )));
        }
        let mut heads = Vec::with_capacity(levels.len());
        for (out, level) in outputs.iter().zip(levels) {
            let view = out.to_plain_array_view::<f32>().map_err(infer_err)?;
            if view.shape() != [1, channels, level.rows, level.cols] {
                return Err(BackendError::Inference(format!(
                    "stride {} output has shape {:?}, expected [1, {channels}, {}, {}]",
                    level.stride,
                    view.shape(),
                    level.rows,
                    level.cols
                )));
            }
            let mut head = HeadLevel::zeros(level, channels);
            head.data.iter_mut().zip(view.iter()).for_each(|(d, s)| *d = *s);
            heads.push(head);
        }
        Ok(RawHeadOutput {
            levels: heads,
            reg_max: info.reg_max,
            nc: info.nc,
        })
    }

    fn to_pretransformed(&self, outputs: &[TValue]) -> Result<PretransformedOutput, BackendError> {
        let rows = 4 + self.info.nc;
        let view = outputs
            .first()
            .ok_or_else(|| BackendError::Inference("model has no outputs".into()))?
            .to_plain_array_view::<f32>()
            .map_err(infer_err)?;
        let shape = view.shape().to_vec();
        let data: Vec<f32> = match shape.as_slice() {
            [1, r, _] if *r == rows => view.iter().copied().collect(),
            [1, _, r] if *r == rows => {
                let v = view.into_dimensionality::<tract_ndarray::Ix3>().map_err(|e| BackendError::Inference(e.to_string()))?;
                v.permuted_axes([0, 2, 1]).iter().copied().collect()
            }
            _ => {
                return Err(BackendError::Inference(format!(
                    "pretransformed output has shape {shape:?}, expected [1, {rows}, anchors]"
                )))
            }
        };
        let anchors = data.len() / rows;
        PretransformedOutput::new(data, self.info.nc, anchors).map_err(|e| BackendError::Inference(e.to_string()))
    }
}

impl ModelBackend for OnnxBackend {
    fn info(&self) -> &BackendInfo {
        &self.info
    }

    fn infer(&self, _frame_index: u64, input: &InputTensor) -> Result<HeadOutput, BackendError> {
        let (w, h) = (input.width as usize, input.height as usize);
        let array = tract_ndarray::Array4::from_shape_vec((1, 3, h, w), input.data.clone())
            .map_err(|e| BackendError::Inference(e.to_string()))?;
        let outputs = self.plan.run(tvec!(Tensor::from(array).into())).map_err(infer_err)?;
        match self.info.mode {
            OutputMode::Raw => self.to_raw(&outputs).map(HeadOutput::Raw),
            OutputMode::Pretransformed => self.to_pretransformed(&outputs).map(HeadOutput::Pretransformed),
        }
    }
}
