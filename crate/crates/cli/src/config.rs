//! Optional TOML defaults. Anything given on the command line wins.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub model: Option<PathBuf>,
    pub metadata: Option<PathBuf>,
    pub conf: Option<f64>,
    pub iou: Option<f64>,
    pub max_det: Option<usize>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub input_size: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: FileConfig = toml::from_str(&text).with_context(|| format!("config {}", path.display()))?;
        // Relative paths are relative to the config file.
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for p in [&mut cfg.model, &mut cfg.metadata].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

pub fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
    let dim = |v: &str| v.trim().parse::<u32>().ok().filter(|&v| v > 0);
    match (dim(w), dim(h)) {
        (Some(w), Some(h)) => Ok((w, h)),
        _ => Err(format!("expected positive WIDTHxHEIGHT, got {s:?}")),
    }
}

pub fn parse_ratios(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    match parts.as_slice() {
        [a, b] => Ok([*a, *b, 0.0]),
        [a, b, c] => Ok([*a, *b, *c]),
        _ => Err(format!("expected TRAIN,VAL[,TEST], got {s:?}")),
    }
}
