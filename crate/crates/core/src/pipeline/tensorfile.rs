//! Replay tensor files: one JSON header line, then little-endian `f32`
//! values in row-major order.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decode::{HeadOutput, PretransformedOutput, RawHeadOutput};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputMode {
    Raw,
    Pretransformed,
}

impl std::str::FromStr for OutputMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw" => Ok(Self::Raw),
            "pretransformed" => Ok(Self::Pretransformed),
            other => Err(format!("unknown output mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorHeader {
    pub dims: Vec<usize>,
    pub dtype: String,
    pub mode: OutputMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reg_max: Option<usize>,
    pub nc: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strides: Option<Vec<u32>>,
}

#[derive(Debug, Error)]
pub enum TensorFileError {
    #[error("tensor file I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad tensor header: {0}")]
    Header(String),
    #[error("payload holds {got} values, header dims need {expected}")]
    PayloadLength { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub header: TensorHeader,
    pub data: Vec<f32>,
}

impl TensorFile {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), TensorFileError> {
        let expected: usize = self.header.dims.iter().product();
        if expected != self.data.len() {
            return Err(TensorFileError::PayloadLength {
                expected,
                got: self.data.len(),
            });
        }
        let header = serde_json::to_string(&self.header).map_err(|e| TensorFileError::Header(e.to_string()))?;
        w.write_all(header.as_bytes())?;
        w.write_all(b"\n")?;
        let mut bytes = Vec::with_capacity(self.data.len() * 4);
        for v in &self.data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&bytes)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self, TensorFileError> {
        let mut reader = BufReader::new(r);
        let mut line = Vec::new();
        reader.read_until(b'\n', &mut line)?;
        if line.last() != Some(&b'\n') {
            return Err(TensorFileError::Header("missing header line terminator".into()));
        }
        let header: TensorHeader =
            serde_json::from_slice(&line[..line.len() - 1]).map_err(|e| TensorFileError::Header(e.to_string()))?;
        if header.dtype != "f32" {
            return Err(TensorFileError::Header(format!("unsupported dtype {:?}", header.dtype)));
        }
        let expected: usize = header.dims.iter().product();
        let mut payload = Vec::new();
        reader.read_to_end(&mut payload)?;
        if payload.len() != expected * 4 {
            return Err(TensorFileError::PayloadLength {
                expected,
                got: payload.len() / 4,
            });
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok(Self { header, data })
    }

    pub fn load(path: &Path) -> Result<Self, TensorFileError> {
        Self::read_from(std::fs::File::open(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), TensorFileError> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    /// Stores a raw head output in the exporter's concatenated `(1, channels, anchors)` layout.
    pub fn from_raw(raw: &RawHeadOutput) -> Self {
        Self {
            header: TensorHeader {
                dims: vec![1, raw.channels(), raw.anchors()],
                dtype: "f32".into(),
                mode: OutputMode::Raw,
                reg_max: Some(raw.reg_max),
                nc: raw.nc,
                strides: Some(raw.levels.iter().map(|l| l.stride).collect()),
            },
            data: raw.to_concatenated(),
        }
    }

    pub fn from_pretransformed(t: &PretransformedOutput) -> Self {
        Self {
            header: TensorHeader {
                dims: vec![1, 4 + t.nc, t.anchors],
                dtype: "f32".into(),
                mode: OutputMode::Pretransformed,
                reg_max: None,
                nc: t.nc,
                strides: None,
            },
            data: t.data.clone(),
        }
    }

    /// `(rows, columns)` after dropping leading unit dimensions.
    fn matrix_dims(&self) -> Result<(usize, usize), TensorFileError> {
        let dims: Vec<usize> = self.header.dims.iter().copied().skip_while(|&d| d == 1).collect();
        match dims.as_slice() {
            [r, c] => Ok((*r, *c)),
            [c] => Ok((1, *c)),
            _ => Err(TensorFileError::Header(format!(
                "expected a (channels, anchors) matrix, got dims {:?}",
                self.header.dims
            ))),
        }
    }

    /// Interprets the payload for a model whose input is `input_w x input_h`.
    pub fn to_head_output(&self, input_w: u32, input_h: u32) -> Result<HeadOutput, TensorFileError> {
        let (rows, cols) = self.matrix_dims()?;
        let h = &self.header;
        let bad = |e: crate::decode::DecodeError| TensorFileError::Header(e.to_string());
        match h.mode {
            OutputMode::Raw => {
                let reg_max = h.reg_max.ok_or_else(|| TensorFileError::Header("raw mode requires reg_max".into()))?;
                let strides = h
                    .strides
                    .as_ref()
                    .ok_or_else(|| TensorFileError::Header("raw mode requires strides".into()))?;
                if rows != 4 * reg_max + h.nc {
                    return Err(TensorFileError::Header(format!(
                        "raw tensor has {rows} channels, expected 4 * {reg_max} + {}",
                        h.nc
                    )));
                }
                RawHeadOutput::from_concatenated(&self.data, reg_max, h.nc, input_w, input_h, strides)
                    .map(HeadOutput::Raw)
                    .map_err(bad)
            }
            OutputMode::Pretransformed => {
                if rows != 4 + h.nc {
                    return Err(TensorFileError::Header(format!(
                        "pretransformed tensor has {rows} rows, expected 4 + {}",
                        h.nc
                    )));
                }
                PretransformedOutput::new(self.data.clone(), h.nc, cols)
                    .map(HeadOutput::Pretransformed)
                    .map_err(bad)
            }
        }
    }
}
