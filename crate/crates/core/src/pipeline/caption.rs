//! Debounces per-frame detections into caption events.
//!
//! Per class, presence is tracked over the last `window` frames. A caption
//! opens once presence reaches `hits` and closes when it drops below
//! `hits / 2`; the event is emitted on close.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::decode::Detection;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CaptionConfig {
    pub window: usize,
    pub hits: usize,
    /// Detections at or below this score do not count as presence.
    pub min_score: f64,
}

impl Default for CaptionConfig {
    fn default() -> Self {
        Self {
            window: 15,
            hits: 10,
            min_score: 0.0,
        }
    }
}

impl CaptionConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.hits == 0 || self.hits > self.window {
            return Err(format!(
                "caption window {} and hits {} must satisfy window >= hits >= 1",
                self.window, self.hits
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionEvent {
    #[serde(rename = "class")]
    pub class_id: usize,
    pub label: String,
    pub start_frame: u64,
    pub end_frame: u64,
    pub mean_score: f64,
}

#[derive(Debug, Clone)]
struct OpenCaption {
    start_frame: u64,
    last_present: u64,
    score_sum: f64,
    score_count: usize,
}

#[derive(Debug, Clone, Default)]
struct ClassTrack {
    window: VecDeque<bool>,
    present: usize,
    open: Option<OpenCaption>,
}

#[derive(Debug, Clone)]
pub struct CaptionState {
    config: CaptionConfig,
    names: Vec<String>,
    tracks: Vec<ClassTrack>,
}

impl CaptionState {
    pub fn new(config: CaptionConfig, names: Vec<String>) -> Self {
        let tracks = vec![ClassTrack::default(); names.len()];
        Self { config, names, tracks }
    }

    fn label(&self, class_id: usize) -> String {
        self.names.get(class_id).cloned().unwrap_or_else(|| class_id.to_string())
    }

    fn close(&self, class_id: usize, open: OpenCaption) -> CaptionEvent {
        CaptionEvent {
            class_id,
            label: self.label(class_id),
            start_frame: open.start_frame,
            end_frame: open.last_present,
            mean_score: open.score_sum / open.score_count as f64,
        }
    }

    /// Advances one frame and returns captions that closed on it, in class order.
    pub fn step(&mut self, frame_index: u64, detections: &[Detection]) -> Vec<CaptionEvent> {
        let (window, hits) = (self.config.window, self.config.hits);
        let mut best: Vec<Option<f64>> = vec![None; self.tracks.len()];
        for d in detections.iter().filter(|d| d.score > self.config.min_score) {
            if d.class_id >= best.len() {
                continue;
            }
            let slot = &mut best[d.class_id];
            *slot = Some(slot.map_or(d.score, |s: f64| s.max(d.score)));
        }

        let mut closed = Vec::new();
        for (class_id, score) in best.into_iter().enumerate() {
            let track = &mut self.tracks[class_id];
            let present = score.is_some();
            track.window.push_back(present);
            track.present += present as usize;
            if track.window.len() > window && track.window.pop_front() == Some(true) {
                track.present -= 1;
            }
            match (&mut track.open, score) {
                (None, Some(s)) if track.present >= hits => {
                    track.open = Some(OpenCaption {
                        start_frame: frame_index,
                        last_present: frame_index,
                        score_sum: s,
                        score_count: 1,
                    });
                }
                (Some(open), Some(s)) => {
                    open.last_present = frame_index;
                    open.score_sum += s;
                    open.score_count += 1;
                }
                _ => {}
            }
            if track.open.is_some() && 2 * track.present < hits {
                closed.push((class_id, track.open.take().expect("checked")));
            }
        }
        closed.into_iter().map(|(c, o)| self.close(c, o)).collect()
    }

    /// Force-closes every open caption, e.g. at the end of a stream.
    pub fn flush(&mut self) -> Vec<CaptionEvent> {
        let open: Vec<(usize, OpenCaption)> = self
            .tracks
            .iter_mut()
            .enumerate()
            .filter_map(|(c, t)| t.open.take().map(|o| (c, o)))
            .collect();
        open.into_iter().map(|(c, o)| self.close(c, o)).collect()
    }

    pub fn is_open(&self, class_id: usize) -> bool {
        self.tracks.get(class_id).is_some_and(|t| t.open.is_some())
    }
}
