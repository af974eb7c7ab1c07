//! Dataset manifest in the usual YOLO `data.yaml` layout.

use std::path::{Component, Path, PathBuf};

use serde_yaml::{Mapping, Value};
use thiserror::Error;
use walkdir::WalkDir;

pub const DEFAULT_NC: usize = 20;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("manifest is missing required key `{0}`")]
    MissingKey(String),
    #[error("nc is {nc} but {names} class names are listed")]
    CountMismatch { nc: usize, names: usize },
    #[error("cannot read {path}: {source}")]
    Unreadable {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid manifest: {0}")]
    Invalid(String),
}

/// Which split of the dataset to address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn key(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split {other:?} (expected train, val or test)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub root: PathBuf,
    pub train: Vec<PathBuf>,
    pub val: Vec<PathBuf>,
    pub test: Vec<PathBuf>,
    pub nc: usize,
    pub names: Vec<String>,
    /// Seed and ratios used to produce the split, when the manifest records them.
    pub split_seed: Option<u64>,
    pub split_ratios: Option<[f64; 3]>,
}

/// Placeholder class names used when none are supplied.
pub fn default_class_names() -> Vec<String> {
    [
        "a", "aa", "i", "ii", "u", "uu", "e", "ee", "ai", "o", "oo", "au", "ka", "ga", "cha",
        "ja", "ta", "na", "pa", "va",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

impl DatasetManifest {
    pub fn split_paths(&self, split: Split) -> &[PathBuf] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    /// Checks the `nc`/`names` invariants.
    pub fn validate(&self) -> Result<(), ManifestError> {
        if self.nc != self.names.len() {
            return Err(ManifestError::CountMismatch {
                nc: self.nc,
                names: self.names.len(),
            });
        }
        for (i, name) in self.names.iter().enumerate() {
            if name.trim().is_empty() {
                return Err(ManifestError::Invalid(format!("class {i} has an empty name")));
            }
            if self.names[..i].contains(name) {
                return Err(ManifestError::Invalid(format!("duplicate class name {name:?}")));
            }
        }
        Ok(())
    }

    /// Image files belonging to a split, in sorted order.
    ///
    /// Directory entries are walked recursively; `.txt` entries are list files
    /// with one image path per line, relative to the dataset root.
    pub fn list_images(&self, split: Split) -> Result<Vec<PathBuf>, ManifestError> {
        let mut out = Vec::new();
        for entry in self.split_paths(split) {
            if entry.is_dir() {
                for item in WalkDir::new(entry).sort_by_file_name() {
                    let item = item.map_err(|e| ManifestError::Unreadable {
                        path: entry.clone(),
                        source: e.into(),
                    })?;
                    if item.file_type().is_file() && is_image_path(item.path()) {
                        out.push(item.into_path());
                    }
                }
            } else if entry.extension().is_some_and(|e| e == "txt") {
                let text = read(entry)?;
                out.extend(
                    text.lines()
                        .map(str::trim)
                        .filter(|l| !l.is_empty())
                        .map(|l| resolve(&self.root, Path::new(l))),
                );
            } else if entry.is_file() {
                out.push(entry.clone());
            } else {
                return Err(ManifestError::Unreadable {
                    path: entry.clone(),
                    source: std::io::Error::new(std::io::ErrorKind::NotFound, "split path not found"),
                });
            }
        }
        Ok(out)
    }

    /// Serializes the manifest with paths relative to `root` where possible.
    pub fn to_yaml(&self) -> String {
        self.yaml(true)
    }

    fn yaml(&self, with_root: bool) -> String {
        let mut map = Mapping::new();
        if with_root {
            map.insert("path".into(), Value::String(self.root.display().to_string()));
        }
        for split in Split::ALL {
            let paths = self.split_paths(split);
            if paths.is_empty() && split == Split::Test {
                continue;
            }
            let rel: Vec<Value> = paths
                .iter()
                .map(|p| {
                    Value::String(
                        p.strip_prefix(&self.root)
                            .unwrap_or(p)
                            .display()
                            .to_string(),
                    )
                })
                .collect();
            let value = if rel.len() == 1 {
                rel.into_iter().next().unwrap()
            } else {
                Value::Sequence(rel)
            };
            map.insert(split.key().into(), value);
        }
        map.insert("nc".into(), Value::Number(self.nc.into()));
        map.insert(
            "names".into(),
            Value::Sequence(self.names.iter().cloned().map(Value::String).collect()),
        );
        if let Some(seed) = self.split_seed {
            map.insert("split_seed".into(), Value::Number(seed.into()));
        }
        if let Some(r) = self.split_ratios {
            map.insert(
                "split_ratios".into(),
                Value::Sequence(r.iter().map(|&x| Value::Number(x.into())).collect()),
            );
        }
        serde_yaml::to_string(&Value::Mapping(map)).expect("manifest serializes")
    }

    /// Writes the manifest. When it lands in `root` itself the `path` key is
    /// left out, so the tree stays relocatable.
    pub fn write(&self, path: &Path) -> Result<(), ManifestError> {
        let dir = path.parent().unwrap_or_else(|| Path::new("."));
        let in_root = resolve(Path::new("."), dir) == self.root;
        std::fs::write(path, self.yaml(!in_root)).map_err(|source| ManifestError::Unreadable {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn read(path: &Path) -> Result<String, ManifestError> {
    std::fs::read_to_string(path).map_err(|source| ManifestError::Unreadable {
        path: path.to_path_buf(),
        source,
    })
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    let joined = if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    };
    normalize(&std::path::absolute(&joined).unwrap_or(joined))
}

fn normalize(p: &Path) -> PathBuf {
    let mut out = PathBuf::new();
    for c in p.components() {
        match c {
            Component::CurDir => {}
            Component::ParentDir => {
                out.pop();
            }
            other => out.push(other),
        }
    }
    out
}

pub fn is_image_path(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .map(|e| {
            matches!(
                e.to_ascii_lowercase().as_str(),
                "png" | "jpg" | "jpeg" | "bmp" | "webp" | "tif" | "tiff"
            )
        })
        .unwrap_or(false)
}

/// Label file for an image: the last `images` directory component is swapped
/// for `labels` and the extension becomes `.txt`. Images outside an `images`
/// directory use a sibling `.txt`.
pub fn label_path_for(image: &Path) -> PathBuf {
    let comps: Vec<Component> = image.components().collect();
    let idx = comps
        .iter()
        .rposition(|c| c.as_os_str() == "images")
        .filter(|&i| i + 1 < comps.len());
    let mut out: PathBuf = match idx {
        Some(i) => comps
            .iter()
            .enumerate()
            .map(|(j, c)| {
                if j == i {
                    std::ffi::OsStr::new("labels")
                } else {
                    c.as_os_str()
                }
            })
            .collect(),
        None => image.to_path_buf(),
    };
    out.set_extension("txt");
    out
}

fn split_value(map: &Mapping, key: &str, root: &Path) -> Result<Option<Vec<PathBuf>>, ManifestError> {
    match map.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(vec![resolve(root, Path::new(s))])),
        Some(Value::Sequence(items)) => items
            .iter()
            .map(|v| match v {
                Value::String(s) => Ok(resolve(root, Path::new(s))),
                other => Err(ManifestError::Invalid(format!("`{key}` entry {other:?} is not a path"))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some),
        Some(other) => Err(ManifestError::Invalid(format!("`{key}` must be a path or list, got {other:?}"))),
    }
}

fn parse_names(value: &Value) -> Result<Vec<String>, ManifestError> {
    let as_name = |v: &Value| match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        other => Err(ManifestError::Invalid(format!("class name {other:?} is not a string"))),
    };
    match value {
        Value::Sequence(items) => items.iter().map(as_name).collect(),
        // `names: {0: a, 1: b}` form.
        Value::Mapping(m) => {
            let mut pairs = m
                .iter()
                .map(|(k, v)| {
                    let idx = k
                        .as_u64()
                        .ok_or_else(|| ManifestError::Invalid(format!("class index {k:?} is not an integer")))?;
                    Ok((idx, as_name(v)?))
                })
                .collect::<Result<Vec<_>, ManifestError>>()?;
            pairs.sort_by_key(|(i, _)| *i);
            for (expect, (got, _)) in pairs.iter().enumerate() {
                if *got != expect as u64 {
                    return Err(ManifestError::Invalid(format!("class indices are not contiguous at {got}")));
                }
            }
            Ok(pairs.into_iter().map(|(_, n)| n).collect())
        }
        other => Err(ManifestError::Invalid(format!("`names` must be a list, got {other:?}"))),
    }
}

/// Parses manifest text; relative paths resolve against `base_dir`.
pub fn parse_manifest(text: &str, base_dir: &Path) -> Result<DatasetManifest, ManifestError> {
    let doc: Value = serde_yaml::from_str(text).map_err(|e| ManifestError::Invalid(e.to_string()))?;
    let map = doc
        .as_mapping()
        .ok_or_else(|| ManifestError::Invalid("top level is not a mapping".into()))?;

    let root = match map.get("path") {
        Some(Value::String(p)) => resolve(base_dir, Path::new(p)),
        _ => resolve(base_dir, Path::new(".")),
    };
    let train = split_value(map, "train", &root)?.ok_or_else(|| ManifestError::MissingKey("train".into()))?;
    let val = split_value(map, "val", &root)?.ok_or_else(|| ManifestError::MissingKey("val".into()))?;
    let test = split_value(map, "test", &root)?.unwrap_or_default();
    let names = parse_names(map.get("names").ok_or_else(|| ManifestError::MissingKey("names".into()))?)?;
    let nc = match map.get("nc") {
        None => names.len(),
        Some(v) => v
            .as_u64()
            .ok_or_else(|| ManifestError::Invalid(format!("nc {v:?} is not an integer")))? as usize,
    };
    let split_seed = map.get("split_seed").and_then(Value::as_u64);
    let split_ratios = match map.get("split_ratios") {
        Some(Value::Sequence(s)) if s.len() == 3 => {
            let v: Vec<f64> = s.iter().filter_map(Value::as_f64).collect();
            (v.len() == 3).then(|| [v[0], v[1], v[2]])
        }
        _ => None,
    };

    let manifest = DatasetManifest {
        root,
        train,
        val,
        test,
        nc,
        names,
        split_seed,
        split_ratios,
    };
    manifest.validate()?;
    Ok(manifest)
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest, ManifestError> {
    let text = read(path)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_manifest(&text, base)
}
