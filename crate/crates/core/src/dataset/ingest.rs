use std::path::{Path, PathBuf};

use thiserror::Error;

use super::manifest::is_image_path;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("no image frames found in {0}")]
    EmptyDirectory(PathBuf),
    #[error("frame stride must be at least 1")]
    InvalidStride,
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Lists the image frames directly inside `dir` in lexicographic order and
/// keeps every `stride`-th one, starting with the first.
pub fn ingest_frames(dir: &Path, stride: usize) -> Result<Vec<PathBuf>, IngestError> {
    if stride == 0 {
        return Err(IngestError::InvalidStride);
    }
    let io_err = |source| IngestError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut frames = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err)? {
        let path = entry.map_err(io_err)?.path();
        if path.is_file() && is_image_path(&path) {
            frames.push(path);
        }
    }
    if frames.is_empty() {
        return Err(IngestError::EmptyDirectory(dir.to_path_buf()));
    }
    frames.sort();
    Ok(frames.into_iter().step_by(stride).collect())
}

/// Command line for an external frame extractor that writes numbered PNG frames.
pub fn frame_extraction_command(video: &Path, out_dir: &Path, fps: u32) -> String {
    format!(
        "ffmpeg -i {} -vf fps={} {}",
        shell_quote(&video.display().to_string()),
        fps,
        shell_quote(&out_dir.join("frame_%05d.png").display().to_string())
    )
}

fn shell_quote(s: &str) -> String {
    if s.chars().all(|c| c.is_ascii_alphanumeric() || "/._-%".contains(c)) {
        s.to_string()
    } else {
        format!("'{}'", s.replace('\'', r"'\''"))
    }
}
