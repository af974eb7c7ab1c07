use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Subcommand};

use msl_core::dataset::manifest::default_class_names;
use msl_core::dataset::split::{DEFAULT_RATIOS, DEFAULT_SPLIT_SEED};
use msl_core::dataset::stats::read_labels;
use msl_core::dataset::{
    augment_dataset, build_dataset, dataset_stats, frame_extraction_command, load_manifest, split_dataset,
    validate_dataset, AugmentPlan, AugmentSpec, BuildOptions, BuildReport, DatasetManifest, Split,
};

use crate::config::{parse_ratios, parse_size, FileConfig};
use crate::{Outcome, SeedArg};

#[derive(Debug, Subcommand)]
pub enum DatasetCommand {
    /// Turn annotated frame folders into an images/labels tree with data.yaml.
    Build(BuildArgs),
    /// Copy a dataset, adding noisy and rotated variants.
    Augment(AugmentArgs),
    /// Re-split a dataset into train/val/test list files.
    Split(SplitArgs),
    /// Image and box counts per split and class.
    Stats(ManifestArg),
    /// Check every label file; exit 2 when anything is wrong.
    Validate(ManifestArg),
    /// Print the frame extraction command for a video clip.
    Frames(FramesArgs),
}

#[derive(Debug, Args)]
pub struct ManifestArg {
    /// Dataset manifest (data.yaml).
    #[arg(long)]
    pub manifest: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct AugmentFlags {
    /// Fraction of pixels set to pure black or white.
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    /// Rotation magnitude in degrees; positive turns counter-clockwise.
    #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
    pub rotate: f64,
    /// Size of augmented images.
    #[arg(long, value_parser = parse_size, default_value = "432x256")]
    pub size: (u32, u32),
    /// Splits that receive augmented copies.
    #[arg(long, value_delimiter = ',', default_value = "train")]
    pub splits: Vec<Split>,
}

impl AugmentFlags {
    fn plan(&self, copies: usize, seed: u64) -> AugmentPlan {
        AugmentPlan {
            spec: AugmentSpec {
                noise_fraction: self.noise,
                rotation_degrees: self.rotate,
                target_w: self.size.0,
                target_h: self.size.1,
                seed,
            },
            copies,
            splits: self.splits.clone(),
        }
    }
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Directory of annotated frames; each sub-directory is one clip.
    #[arg(long)]
    pub src: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Keep every N-th frame of each clip.
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Class names in index order; defaults to the 20 placeholder names.
    #[arg(long, value_delimiter = ',')]
    pub names: Option<Vec<String>>,
    /// Resize every kept image.
    #[arg(long, value_parser = parse_size)]
    pub resize: Option<(u32, u32)>,
    /// Split ratios TRAIN,VAL[,TEST].
    #[arg(long, value_parser = parse_ratios)]
    pub ratios: Option<[f64; 3]>,
    /// Augmented copies per image in the augmented splits (0 disables augmentation).
    #[arg(long, default_value_t = 0)]
    pub augment_copies: usize,
    #[command(flatten)]
    pub augment: AugmentFlags,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Augmented copies per image.
    #[arg(long, default_value_t = 1)]
    pub copies: usize,
    /// Also resize the original images.
    #[arg(long, value_parser = parse_size)]
    pub resize: Option<(u32, u32)>,
    #[command(flatten)]
    pub augment: AugmentFlags,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory for the list files and the new data.yaml.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = parse_ratios)]
    pub ratios: Option<[f64; 3]>,
    #[command(flatten)]
    pub seed: SeedArg,
}

#[derive(Debug, Args)]
pub struct FramesArgs {
    #[arg(long)]
    pub video: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub fps: u32,
}

pub fn run(cmd: DatasetCommand, cfg: &FileConfig) -> anyhow::Result<Outcome> {
    match cmd {
        DatasetCommand::Build(a) => build(a, cfg),
        DatasetCommand::Augment(a) => augment(a, cfg),
        DatasetCommand::Split(a) => split(a, cfg),
        DatasetCommand::Stats(a) => stats(&a.manifest),
        DatasetCommand::Validate(a) => validate(&a.manifest),
        DatasetCommand::Frames(a) => {
            println!("{}", frame_extraction_command(&a.video, &a.out, a.fps));
            eprintln!("then: msl dataset build --src {} --out <dataset>", a.out.display());
            Ok(Outcome::Clean)
        }
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn report_build(report: &BuildReport, out: &Path) -> anyhow::Result<Outcome> {
    eprintln!(
        "wrote {} images to {} (train {}, val {}, test {}, {} boxes dropped)",
        report.total(),
        out.display(),
        report.train_images,
        report.val_images,
        report.test_images,
        report.dropped_boxes
    );
    print_json(report)?;
    Ok(Outcome::Clean)
}

fn build(a: BuildArgs, cfg: &FileConfig) -> anyhow::Result<Outcome> {
    let seed = a.seed.resolve(cfg);
    let opts = BuildOptions {
        src: a.src,
        out: a.out,
        stride: a.stride,
        names: a.names.unwrap_or_else(default_class_names),
        resize: a.resize,
        ratios: a.ratios.unwrap_or(DEFAULT_RATIOS),
        seed,
        augment: (a.augment_copies > 0).then(|| a.augment.plan(a.augment_copies, seed)),
    };
    let report = build_dataset(&opts).context("dataset build failed")?;
    report_build(&report, &opts.out)
}

fn augment(a: AugmentArgs, cfg: &FileConfig) -> anyhow::Result<Outcome> {
    let manifest = load_manifest(&a.manifest)?;
    let plan = a.augment.plan(a.copies, a.seed.resolve(cfg));
    let report = augment_dataset(&manifest, &a.out, &plan, a.resize).context("augmentation failed")?;
    report_build(&report, &a.out)
}

fn relative_to(root: &Path, p: &Path) -> String {
    p.strip_prefix(root).unwrap_or(p).display().to_string()
}

fn split(a: SplitArgs, cfg: &FileConfig) -> anyhow::Result<Outcome> {
    let manifest = load_manifest(&a.manifest)?;
    let seed = a.seed.seed.or(cfg.seed).unwrap_or(DEFAULT_SPLIT_SEED);
    let ratios = a.ratios.unwrap_or(DEFAULT_RATIOS);
    let mut images = Vec::new();
    for s in Split::ALL {
        if !manifest.split_paths(s).is_empty() {
            images.extend(manifest.list_images(s)?);
        }
    }
    images.sort();
    images.dedup();
    let labeled = images
        .into_iter()
        .map(|p| Ok((read_labels(&p, manifest.nc)?.unwrap_or_default(), p)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let parts = split_dataset(labeled, ratios, seed, Some(|(l, _): &(Vec<_>, PathBuf)| {
        l.first().map(|e: &msl_core::dataset::LabelEntry| e.class_id)
    }))?;

    std::fs::create_dir_all(&a.out).with_context(|| format!("cannot create {}", a.out.display()))?;
    let out = std::path::absolute(&a.out)?;
    let mut lists: [Vec<PathBuf>; 3] = Default::default();
    let mut counts = serde_json::Map::new();
    for (i, (s, mut part)) in [(Split::Train, parts.train), (Split::Val, parts.val), (Split::Test, parts.test)]
        .into_iter()
        .enumerate()
    {
        counts.insert(s.key().into(), part.len().into());
        if part.is_empty() && s == Split::Test {
            continue;
        }
        part.sort_by(|x, y| x.1.cmp(&y.1));
        let text: String = part.iter().map(|(_, p)| relative_to(&manifest.root, p) + "\n").collect();
        let list = out.join(format!("{}.txt", s.key()));
        std::fs::write(&list, text).with_context(|| format!("cannot write {}", list.display()))?;
        lists[i].push(list);
    }
    let [train, val, test] = lists;
    let resplit = DatasetManifest {
        train,
        val,
        test,
        split_seed: Some(seed),
        split_ratios: Some(ratios),
        ..manifest
    };
    resplit.write(&out.join("data.yaml"))?;
    eprintln!(
        "split {} images (train {}, val {}, test {}) into {}",
        counts.values().filter_map(|v| v.as_u64()).sum::<u64>(),
        counts["train"],
        counts["val"],
        counts["test"],
        out.display()
    );
    print_json(&counts)?;
    Ok(Outcome::Clean)
}

fn stats(manifest: &Path) -> anyhow::Result<Outcome> {
    let m = load_manifest(manifest)?;
    let stats = dataset_stats(&m)?;
    for (split, s) in &stats.splits {
        eprintln!("{split:<6} {:>6} images {:>7} boxes {:>5} unlabeled", s.images, s.boxes, s.unlabeled_images);
    }
    eprintln!("total {}", stats.total_images());
    print_json(&stats)?;
    Ok(Outcome::Clean)
}

fn validate(manifest: &Path) -> anyhow::Result<Outcome> {
    let m = load_manifest(manifest)?;
    let findings = validate_dataset(&m)?;
    for f in &findings {
        eprintln!("{f}");
    }
    print_json(&findings)?;
    if findings.is_empty() {
        eprintln!("no findings");
        Ok(Outcome::Clean)
    } else {
        eprintln!("{} finding(s)", findings.len());
        Ok(Outcome::Findings)
    }
}
