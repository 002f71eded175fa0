//! Dataset ingestion, normalization, labeling, and splitting.
//!
//! Two ingestion paths:
//! - an image directory `<root>/<class_name>/*.{png,jpg,jpeg}` (class labels
//!   from alphabetical directory order, bilinear resize to the target
//!   dimensions, per-image min-max normalization);
//! - a raw little-endian float32 row-major matrix file plus a
//!   newline-delimited integer label file, so small synthetic experiments
//!   need no image codecs. The matrix file starts with the 8-byte magic
//!   `PQCMATRX`, a little-endian u32 version (1), u32 row count, and u32
//!   column count, followed by `rows * cols` little-endian f32 values.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::gaussian;

/// One labeled feature vector. Image features are flattened height-major
/// (H, W, channel) with values in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: usize,
    pub one_hot: Vec<f64>,
}

impl Sample {
    pub fn new(features: Vec<f64>, label: usize, n_classes: usize) -> Self {
        Sample {
            features,
            label,
            one_hot: one_hot(label, n_classes),
        }
    }
}

/// One-hot vector with a single 1 at `label`.
pub fn one_hot(label: usize, n_classes: usize) -> Vec<f64> {
    let mut v = vec![0.0; n_classes];
    v[label] = 1.0;
    v
}

/// Structural description of a loaded dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub class_names: Vec<String>,
    pub class_counts: Vec<usize>,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

/// Samples plus their manifest.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub manifest: DatasetManifest,
}

impl Dataset {
    pub fn n_classes(&self) -> usize {
        self.manifest.class_names.len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn feature_len(&self) -> usize {
        self.samples.first().map_or(0, |s| s.features.len())
    }

    /// Recount per-class totals (after augmentation or splitting).
    pub fn refresh_counts(&mut self) {
        let mut counts = vec![0usize; self.manifest.class_names.len()];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        self.manifest.class_counts = counts;
    }
}

/// Scale values so the minimum maps to 0 and the maximum to 1. A constant
/// image maps to all zeros (and is later rejected by amplitude encoding with
/// a clear error).
pub fn min_max_normalize(values: &mut [f64]) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in values.iter() {
        min = min.min(v);
        max = max.max(v);
    }
    let range = max - min;
    if range == 0.0 {
        values.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    for v in values {
        *v = (*v - min) / range;
    }
}

/// Files skipped during ingestion (unreadable or undecodable).
#[derive(Clone, Debug, Default)]
pub struct LoadReport {
    pub skipped: Vec<PathBuf>,
}

/// Load `<root>/<class>/*` images: decode, bilinear-resize to
/// `(height, width)`, min-max normalize per image, label by alphabetical
/// class-directory order. Unreadable files are skipped and reported; an
/// empty class directory is a hard error.
pub fn load_image_dataset(
    root: &Path,
    target_height: usize,
    target_width: usize,
) -> Result<(Dataset, LoadReport)> {
    let mut class_dirs: Vec<(String, PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(root)
        .map_err(|e| Error::Data(format!("cannot read dataset root {}: {e}", root.display())))?
    {
        let entry = entry.map_err(|e| Error::Data(e.to_string()))?;
        if entry.path().is_dir() {
            class_dirs.push((entry.file_name().to_string_lossy().into_owned(), entry.path()));
        }
    }
    if class_dirs.is_empty() {
        return Err(Error::Data(format!(
            "no class directories under {}",
            root.display()
        )));
    }
    class_dirs.sort_by(|a, b| a.0.cmp(&b.0));
    let n_classes = class_dirs.len();

    let mut jobs: Vec<(PathBuf, usize)> = Vec::new();
    for (label, (name, dir)) in class_dirs.iter().enumerate() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| Error::Data(format!("cannot read class directory {name}: {e}")))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.extension()
                    .and_then(|e| e.to_str())
                    .map(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
                    .unwrap_or(false)
            })
            .collect();
        if files.is_empty() {
            return Err(Error::Data(format!("class directory {name} contains no images")));
        }
        files.sort();
        jobs.extend(files.into_iter().map(|f| (f, label)));
    }

    // Decode in parallel; the ordered collect keeps the manifest deterministic.
    let decoded: Vec<(PathBuf, usize, Option<Vec<f64>>)> = jobs
        .into_par_iter()
        .map(|(path, label)| {
            let features = decode_image(&path, target_height, target_width).ok();
            (path, label, features)
        })
        .collect();

    let mut report = LoadReport::default();
    let mut samples = Vec::new();
    for (path, label, features) in decoded {
        match features {
            Some(f) => samples.push(Sample::new(f, label, n_classes)),
            None => report.skipped.push(path),
        }
    }
    if samples.is_empty() {
        return Err(Error::Data("no decodable images in dataset".into()));
    }

    let mut dataset = Dataset {
        samples,
        manifest: DatasetManifest {
            class_names: class_dirs.into_iter().map(|(n, _)| n).collect(),
            class_counts: Vec::new(),
            height: target_height,
            width: target_width,
            channels: 3,
        },
    };
    dataset.refresh_counts();
    Ok((dataset, report))
}

fn decode_image(path: &Path, height: usize, width: usize) -> Result<Vec<f64>> {
    let img = image::open(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let resized = image::imageops::resize(
        &img.to_rgb8(),
        width as u32,
        height as u32,
        image::imageops::FilterType::Triangle,
    );
    let mut features: Vec<f64> = resized.into_raw().into_iter().map(f64::from).collect();
    min_max_normalize(&mut features);
    Ok(features)
}

const RAW_MAGIC: &[u8; 8] = b"PQCMATRX";

/// Load the raw float32 matrix + label pair described in the module docs.
pub fn load_raw_dataset(features_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let mut r = BufReader::new(File::open(features_path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != RAW_MAGIC {
        return Err(Error::Data(format!(
            "{} is not a raw feature matrix (bad magic)",
            features_path.display()
        )));
    }
    let version = read_u32(&mut r)?;
    if version != 1 {
        return Err(Error::Data(format!("unsupported raw matrix version {version}")));
    }
    let rows = read_u32(&mut r)? as usize;
    let cols = read_u32(&mut r)? as usize;
    let mut buf = [0u8; 4];
    let mut rows_data = Vec::with_capacity(rows);
    for _ in 0..rows {
        let mut row = Vec::with_capacity(cols);
        for _ in 0..cols {
            r.read_exact(&mut buf)?;
            row.push(f32::from_le_bytes(buf) as f64);
        }
        rows_data.push(row);
    }

    let labels: Vec<usize> = BufReader::new(File::open(labels_path)?)
        .lines()
        .map(|l| {
            let l = l?;
            l.trim()
                .parse::<usize>()
                .map_err(|e| Error::Data(format!("bad label line {l:?}: {e}")))
        })
        .collect::<Result<_>>()?;
    if labels.len() != rows {
        return Err(Error::Data(format!(
            "{} labels for {} feature rows",
            labels.len(),
            rows
        )));
    }
    let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    if n_classes == 0 {
        return Err(Error::Data("empty raw dataset".into()));
    }

    let samples: Vec<Sample> = rows_data
        .into_iter()
        .zip(&labels)
        .map(|(f, &l)| Sample::new(f, l, n_classes))
        .collect();
    let mut dataset = Dataset {
        samples,
        manifest: DatasetManifest {
            class_names: (0..n_classes).map(|c| format!("class_{c}")).collect(),
            class_counts: Vec::new(),
            height: 1,
            width: cols,
            channels: 1,
        },
    };
    dataset.refresh_counts();
    Ok(dataset)
}

/// Write the raw-matrix form read by [`load_raw_dataset`].
pub fn save_raw_dataset(dataset: &Dataset, features_path: &Path, labels_path: &Path) -> Result<()> {
    let cols = dataset.feature_len();
    let mut w = BufWriter::new(File::create(features_path)?);
    w.write_all(RAW_MAGIC)?;
    w.write_all(&1u32.to_le_bytes())?;
    w.write_all(&(dataset.len() as u32).to_le_bytes())?;
    w.write_all(&(cols as u32).to_le_bytes())?;
    for s in &dataset.samples {
        for &v in &s.features {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    w.flush()?;

    let mut lw = BufWriter::new(File::create(labels_path)?);
    for s in &dataset.samples {
        writeln!(lw, "{}", s.label)?;
    }
    lw.flush()?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

/// Train/validation tag per sample of the parent dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
}

/// Result of a stratified split.
#[derive(Clone, Debug)]
pub struct SplitOutcome {
    pub train: Dataset,
    pub validation: Dataset,
    /// Assignment for each sample of the input dataset, in input order.
    pub assignments: Vec<Split>,
}

/// Seeded stratified split: within each class, `round(fraction * count)`
/// samples go to the training set. Every class needs at least 2 samples.
pub fn split(dataset: &Dataset, train_fraction: f64, rng: &mut ChaCha8Rng) -> Result<SplitOutcome> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Usage(format!(
            "train fraction must be in (0, 1), got {train_fraction}"
        )));
    }
    let n_classes = dataset.n_classes();
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, s) in dataset.samples.iter().enumerate() {
        per_class[s.label].push(i);
    }
    let mut assignments = vec![Split::Validation; dataset.len()];
    for (label, indices) in per_class.iter_mut().enumerate() {
        if indices.len() < 2 {
            return Err(Error::Data(format!(
                "class {} has {} samples; need at least 2 to stratify",
                dataset.manifest.class_names[label],
                indices.len()
            )));
        }
        indices.shuffle(rng);
        let n_train = (train_fraction * indices.len() as f64).round() as usize;
        let n_train = n_train.clamp(1, indices.len() - 1);
        for &i in indices.iter().take(n_train) {
            assignments[i] = Split::Train;
        }
    }

    let collect = |tag: Split| -> Dataset {
        let samples: Vec<Sample> = dataset
            .samples
            .iter()
            .zip(&assignments)
            .filter(|(_, &a)| a == tag)
            .map(|(s, _)| s.clone())
            .collect();
        let mut d = Dataset { samples, manifest: dataset.manifest.clone() };
        d.refresh_counts();
        d
    };
    Ok(SplitOutcome {
        train: collect(Split::Train),
        validation: collect(Split::Validation),
        assignments,
    })
}

/// Parameters of the built-in synthetic classification task: each class has
/// a block prototype over the feature vector and samples are the prototype
/// plus clamped Gaussian jitter. Classes are separable by construction
/// (nearest prototype after normalization).
#[derive(Clone, Copy, Debug)]
pub struct SyntheticSpec {
    pub n_features: usize,
    pub n_classes: usize,
    pub train_per_class: usize,
    pub val_per_class: usize,
    pub jitter_sigma: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_features: 16,
            n_classes: 3,
            train_per_class: 40,
            val_per_class: 20,
            jitter_sigma: 0.05,
        }
    }
}

/// Block prototype of one class: high on its feature block, low elsewhere.
pub fn synthetic_prototype(spec: &SyntheticSpec, class: usize) -> Vec<f64> {
    let block = spec.n_features / spec.n_classes;
    let start = class * block;
    let end = if class + 1 == spec.n_classes { spec.n_features } else { start + block };
    (0..spec.n_features)
        .map(|i| if i >= start && i < end { 1.0 } else { 0.05 })
        .collect()
}

/// Generate the seeded (train, validation) pair.
pub fn synthetic_task(spec: &SyntheticSpec, seed: u64) -> (Dataset, Dataset) {
    let manifest = DatasetManifest {
        class_names: (0..spec.n_classes).map(|c| format!("class_{c}")).collect(),
        class_counts: Vec::new(),
        height: 1,
        width: spec.n_features,
        channels: 1,
    };
    let make = |count: usize, tag: u64| -> Dataset {
        let mut samples = Vec::with_capacity(count * spec.n_classes);
        for class in 0..spec.n_classes {
            let proto = synthetic_prototype(spec, class);
            for k in 0..count {
                let mut rng = crate::rng::derive_rng(seed, &[tag, class as u64, k as u64]);
                let features: Vec<f64> = proto
                    .iter()
                    .map(|&p| (p + gaussian(&mut rng, spec.jitter_sigma)).clamp(0.0, 1.0))
                    .collect();
                samples.push(Sample::new(features, class, spec.n_classes));
            }
        }
        let mut d = Dataset { samples, manifest: manifest.clone() };
        d.refresh_counts();
        d
    };
    (make(spec.train_per_class, 0), make(spec.val_per_class, 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    #[test]
    fn min_max_frozen_cases() {
        let mut v = vec![0.0, 255.0];
        min_max_normalize(&mut v);
        assert_eq!(v, vec![0.0, 1.0]);
        let mut v = vec![10.0, 20.0, 30.0];
        min_max_normalize(&mut v);
        assert_eq!(v, vec![0.0, 0.5, 1.0]);
        let mut v = vec![7.0, 7.0, 7.0];
        min_max_normalize(&mut v);
        assert_eq!(v, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn one_hot_is_valid() {
        let v = one_hot(1, 3);
        assert_eq!(v, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn raw_round_trip() {
        let spec = SyntheticSpec { n_features: 16, train_per_class: 3, val_per_class: 1, ..SyntheticSpec::default() };
        let (train, _) = synthetic_task(&spec, 9);
        let dir = std::env::temp_dir().join("parqc_raw_test");
        std::fs::create_dir_all(&dir).unwrap();
        let fpath = dir.join("features.bin");
        let lpath = dir.join("labels.txt");
        save_raw_dataset(&train, &fpath, &lpath).unwrap();
        let loaded = load_raw_dataset(&fpath, &lpath).unwrap();
        assert_eq!(loaded.len(), train.len());
        assert_eq!(loaded.n_classes(), 3);
        for (a, b) in loaded.samples.iter().zip(&train.samples) {
            assert_eq!(a.label, b.label);
            // f32 round trip loses precision but stays close.
            for (x, y) in a.features.iter().zip(&b.features) {
                assert!((x - y).abs() < 1e-6);
            }
        }
        std::fs::remove_file(fpath).ok();
        std::fs::remove_file(lpath).ok();
    }

    #[test]
    fn split_reproduces_published_class_counts() {
        // 13725 samples at 0.67 -> 9196 train / 4529 validation.
        let manifest = DatasetManifest {
            class_names: vec!["very_mild".into()],
            class_counts: vec![],
            height: 1,
            width: 1,
            channels: 1,
        };
        let samples: Vec<Sample> = (0..13_725).map(|_| Sample::new(vec![1.0], 0, 1)).collect();
        let mut d = Dataset { samples, manifest };
        d.refresh_counts();
        let out = split(&d, 0.67, &mut derive_rng(1, &[])).unwrap();
        assert!((out.train.len() as i64 - 9196).abs() <= 1);
        assert!((out.validation.len() as i64 - 4529).abs() <= 1);
        assert_eq!(out.train.len() + out.validation.len(), 13_725);
    }

    #[test]
    fn split_even_halves() {
        let manifest = DatasetManifest {
            class_names: vec!["a".into(), "b".into()],
            class_counts: vec![],
            height: 1,
            width: 1,
            channels: 1,
        };
        let mut samples = Vec::new();
        for label in 0..2 {
            for _ in 0..10 {
                samples.push(Sample::new(vec![label as f64], label, 2));
            }
        }
        let mut d = Dataset { samples, manifest };
        d.refresh_counts();
        let out = split(&d, 0.5, &mut derive_rng(3, &[])).unwrap();
        assert_eq!(out.train.manifest.class_counts, vec![5, 5]);
        assert_eq!(out.validation.manifest.class_counts, vec![5, 5]);
    }

    #[test]
    fn split_partitions_the_dataset() {
        let spec = SyntheticSpec { train_per_class: 9, val_per_class: 0, ..SyntheticSpec::default() };
        let (d, _) = synthetic_task(&spec, 5);
        let out = split(&d, 0.67, &mut derive_rng(8, &[])).unwrap();
        assert_eq!(out.train.len() + out.validation.len(), d.len());
        assert_eq!(out.assignments.len(), d.len());
        // Deterministic for a fixed seed.
        let again = split(&d, 0.67, &mut derive_rng(8, &[])).unwrap();
        assert_eq!(out.assignments, again.assignments);
        // Per-class train fraction within one sample of the request.
        for c in 0..3 {
            let want = 0.67 * d.manifest.class_counts[c] as f64;
            let got = out.train.manifest.class_counts[c] as f64;
            assert!((got - want).abs() <= 1.0);
        }
    }

    #[test]
    fn split_rejects_tiny_classes() {
        let manifest = DatasetManifest {
            class_names: vec!["only".into()],
            class_counts: vec![],
            height: 1,
            width: 1,
            channels: 1,
        };
        let mut d = Dataset {
            samples: vec![Sample::new(vec![0.5], 0, 1)],
            manifest,
        };
        d.refresh_counts();
        assert!(split(&d, 0.5, &mut derive_rng(0, &[])).is_err());
    }

    #[test]
    fn synthetic_task_is_separable_and_deterministic() {
        let spec = SyntheticSpec::default();
        let (train_a, val_a) = synthetic_task(&spec, 77);
        let (train_b, _) = synthetic_task(&spec, 77);
        assert_eq!(train_a, train_b);
        assert!(train_a
            .samples
            .iter()
            .all(|s| s.features.iter().all(|&v| (0.0..=1.0).contains(&v))));

        // Nearest-prototype classification (cosine) is perfect by construction.
        let protos: Vec<Vec<f64>> = (0..3).map(|c| synthetic_prototype(&spec, c)).collect();
        let cosine = |a: &[f64], b: &[f64]| {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            dot / (na * nb)
        };
        for s in train_a.samples.iter().chain(&val_a.samples) {
            let best = (0..3)
                .max_by(|&a, &b| {
                    cosine(&s.features, &protos[a])
                        .partial_cmp(&cosine(&s.features, &protos[b]))
                        .unwrap()
                })
                .unwrap();
            assert_eq!(best, s.label);
        }
    }
}
