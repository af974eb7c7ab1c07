//! Aligning JSON-lines predictions with a manifest split's ground truth.

use std::collections::HashMap;
use std::path::PathBuf;

use super::matching::GroundTruth;
use super::EvalError;
use crate::dataset::stats::read_labels;
use crate::dataset::{DatasetManifest, Split};
use crate::decode::Detection;
use crate::geometry::{norm_to_pixel, PixelBox};
use crate::pipeline::FrameRecord;

/// Ground truth of one image in source pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalImage {
    pub path: PathBuf,
    pub width: u32,
    pub height: u32,
    pub ground_truth: Vec<GroundTruth>,
}

impl EvalImage {
    pub fn file_name(&self) -> String {
        self.path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
    }
}

/// Frame records of a detection run; caption event lines are skipped.
pub fn parse_prediction_lines(text: &str) -> Result<Vec<FrameRecord>, EvalError> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let schema = |reason: String| EvalError::Schema { line: i + 1, reason };
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| schema(e.to_string()))?;
        if value.get("event").is_some() {
            continue;
        }
        records.push(serde_json::from_value(value).map_err(|e| schema(e.to_string()))?);
    }
    Ok(records)
}

/// Images of a split with their labels scaled to pixels. Unlabeled images have
/// no ground truth.
pub fn load_ground_truth(manifest: &DatasetManifest, split: Split) -> Result<Vec<EvalImage>, EvalError> {
    let paths = manifest.list_images(split)?;
    paths
        .into_iter()
        .map(|path| {
            let (width, height) = image::image_dimensions(&path).map_err(|e| EvalError::Image {
                path: path.clone(),
                reason: e.to_string(),
            })?;
            let ground_truth = read_labels(&path, manifest.nc)?
                .unwrap_or_default()
                .into_iter()
                .map(|e| GroundTruth {
                    class_id: e.class_id,
                    bbox: norm_to_pixel(&e.bbox, width as f64, height as f64),
                })
                .collect();
            Ok(EvalImage {
                path,
                width,
                height,
                ground_truth,
            })
        })
        .collect()
}

/// Predictions per image, in the order of `images`.
///
/// Records carrying an `image` name are matched by file name; records without
/// one are matched by frame index into `images`. Images without a record have
/// no predictions.
pub fn align_predictions(
    records: &[FrameRecord],
    images: &[EvalImage],
    nc: usize,
) -> Result<Vec<Vec<Detection>>, EvalError> {
    let mut by_name: HashMap<String, usize> = HashMap::new();
    let mut ambiguous = Vec::new();
    for (i, img) in images.iter().enumerate() {
        if by_name.insert(img.file_name(), i).is_some() {
            ambiguous.push(img.file_name());
        }
    }
    let mut preds: Vec<Option<Vec<Detection>>> = vec![None; images.len()];
    for r in records {
        let slot = match &r.image {
            Some(name) if ambiguous.contains(name) => {
                return Err(EvalError::UnknownImage(format!("{name} is ambiguous in the split")))
            }
            Some(name) => *by_name.get(name).ok_or_else(|| EvalError::UnknownImage(name.clone()))?,
            None => usize::try_from(r.frame)
                .ok()
                .filter(|&i| i < images.len())
                .ok_or_else(|| EvalError::UnknownImage(format!("frame {}", r.frame)))?,
        };
        if preds[slot].is_some() {
            return Err(EvalError::UnknownImage(format!(
                "{} has more than one prediction record",
                images[slot].file_name()
            )));
        }
        let dets = r
            .detections
            .iter()
            .map(|d| {
                if d.class_id >= nc {
                    return Err(EvalError::ClassOutOfRange { class_id: d.class_id, nc });
                }
                let [x1, y1, x2, y2] = d.bbox;
                Ok(Detection {
                    bbox: PixelBox::new(x1, y1, x2, y2),
                    class_id: d.class_id,
                    score: d.score,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        preds[slot] = Some(dets);
    }
    Ok(preds.into_iter().map(Option::unwrap_or_default).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image(name: &str) -> EvalImage {
        EvalImage {
            path: PathBuf::from("imgs").join(name),
            width: 100,
            height: 100,
            ground_truth: vec![],
        }
    }

    #[test]
    fn skips_events_and_blank_lines() {
        let text = r#"{"frame":0,"image":"a.png","detections":[{"box":[1,2,3,4],"class":1,"label":"x","score":0.5}]}

{"event":{"class":1,"label":"x","start_frame":0,"end_frame":0,"mean_score":0.5}}
{"frame":1,"detections":[]}
"#;
        let recs = parse_prediction_lines(text).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].detections[0].bbox, [1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn schema_errors_carry_line() {
        let err = parse_prediction_lines("{\"frame\":0,\"detections\":[]}\n{\"frame\":\"x\"}\n").unwrap_err();
        assert!(matches!(err, EvalError::Schema { line: 2, .. }));
    }

    #[test]
    fn aligns_by_name_then_index() {
        let imgs = vec![image("a.png"), image("b.png"), image("c.png")];
        let recs = parse_prediction_lines(
            r#"{"frame":7,"image":"c.png","detections":[{"box":[0,0,1,1],"class":0,"label":"x","score":0.9}]}
{"frame":0,"detections":[{"box":[0,0,2,2],"class":1,"label":"y","score":0.8}]}"#,
        )
        .unwrap();
        let preds = align_predictions(&recs, &imgs, 2).unwrap();
        assert_eq!(preds[0][0].class_id, 1);
        assert!(preds[1].is_empty());
        assert_eq!(preds[2][0].score, 0.9);
    }

    #[test]
    fn rejects_unknown_and_out_of_range() {
        let imgs = vec![image("a.png")];
        let recs = parse_prediction_lines(r#"{"frame":0,"image":"z.png","detections":[]}"#).unwrap();
        assert!(matches!(align_predictions(&recs, &imgs, 2), Err(EvalError::UnknownImage(_))));
        let recs = parse_prediction_lines(
            r#"{"frame":0,"detections":[{"box":[0,0,1,1],"class":5,"label":"x","score":0.9}]}"#,
        )
        .unwrap();
        assert!(matches!(
            align_predictions(&recs, &imgs, 2),
            Err(EvalError::ClassOutOfRange { class_id: 5, nc: 2 })
        ));
    }
}
