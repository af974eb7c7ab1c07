use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, ValueEnum};

use msl_core::dataset::{load_manifest, Split};
use msl_core::eval::{
    align_predictions, emit_report, evaluate, load_ground_truth, parse_prediction_lines, parse_training_log, EvalConfig,
    ReportFormat,
};

use crate::Outcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// JSON-lines predictions as written by `msl detect`.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Dataset manifest holding the ground truth.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value = "val")]
    pub split: Split,
    /// Report directory; without it the JSON report goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "json,csv")]
    pub format: Vec<Format>,
    /// Training log (results.csv) whose loss and mAP series are attached.
    #[arg(long)]
    pub curves: Option<PathBuf>,
    /// Score threshold for the confusion matrix and precision/recall.
    #[arg(long, default_value_t = 0.25)]
    pub conf: f64,
    /// IoU threshold for the confusion matrix.
    #[arg(long, default_value_t = 0.45)]
    pub iou: f64,
}

pub fn run(a: EvalArgs) -> anyhow::Result<Outcome> {
    let manifest = load_manifest(&a.manifest)?;
    let text = std::fs::read_to_string(&a.predictions)
        .with_context(|| format!("cannot read {}", a.predictions.display()))?;
    let records = parse_prediction_lines(&text).with_context(|| a.predictions.display().to_string())?;
    let images = load_ground_truth(&manifest, a.split)?;
    let preds = align_predictions(&records, &images, manifest.nc)?;
    let gts: Vec<_> = images.iter().map(|i| i.ground_truth.clone()).collect();
    let config = EvalConfig {
        conf_threshold: a.conf,
        matrix_iou: a.iou,
        ..EvalConfig::default()
    };
    let mut report = evaluate(&preds, &gts, &manifest.names, &config)?;
    if let Some(p) = &a.curves {
        let log = std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
        report.training = Some(parse_training_log(&log).with_context(|| p.display().to_string())?);
    }

    match &a.out {
        Some(dir) => {
            let formats: Vec<ReportFormat> = a
                .format
                .iter()
                .map(|f| match f {
                    Format::Json => ReportFormat::Json,
                    Format::Csv => ReportFormat::Csv,
                })
                .collect();
            for path in emit_report(&report, dir, &formats)? {
                log::info!("wrote {}", path.display());
            }
        }
        None => println!("{}", report.to_json()),
    }
    let op = &report.operating_point;
    eprintln!(
        "mAP50 = {:.3}  mAP50-95 = {:.3}  P = {:.3}  R = {:.3}  ({} images, {} predictions, {} ground truths)",
        report.map50,
        report.map50_95,
        op.precision,
        op.recall,
        report.counts.images,
        report.counts.predictions,
        report.counts.ground_truths
    );
    Ok(Outcome::Clean)
}
