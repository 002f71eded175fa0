//! Run configuration: one JSON document carrying every training key plus the
//! data-source and output settings. Command-line flags override file values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use parqc_core::augment::{augment_minority, AugmentParams};
use parqc_core::data::{
    load_image_dataset, load_raw_dataset, split, synthetic_task, Dataset, SyntheticSpec,
};
use parqc_core::noise::NoiseMode;
use parqc_core::rng::derive_rng;
use parqc_core::trainer::TrainingConfig;
use parqc_core::Error;

use crate::CommonArgs;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub n_features: usize,
    pub n_classes: usize,
    pub train_per_class: usize,
    pub val_per_class: usize,
    pub jitter_sigma: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        let s = SyntheticSpec::default();
        SyntheticConfig {
            n_features: s.n_features,
            n_classes: s.n_classes,
            train_per_class: s.train_per_class,
            val_per_class: s.val_per_class,
            jitter_sigma: s.jitter_sigma,
        }
    }
}

impl SyntheticConfig {
    fn spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            n_features: self.n_features,
            n_classes: self.n_classes,
            train_per_class: self.train_per_class,
            val_per_class: self.val_per_class,
            jitter_sigma: self.jitter_sigma,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(flatten)]
    pub training: TrainingConfig,

    pub data_root: Option<PathBuf>,
    pub raw_features: Option<PathBuf>,
    pub raw_labels: Option<PathBuf>,
    pub synthetic: Option<SyntheticConfig>,

    pub target_height: Option<usize>,
    pub target_width: Option<usize>,
    pub train_fraction: Option<f64>,

    /// Grow this class (by name) on the training split after splitting.
    pub augment_class: Option<String>,
    pub augment_target: Option<usize>,

    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let run: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("cannot parse config {}: {e}", path.display())))?;
        Ok(run)
    }

    /// Load the file (when given) and apply flag overrides.
    pub fn resolve(args: &CommonArgs) -> anyhow::Result<RunConfig> {
        let mut run = match &args.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &args.data_root {
            run.data_root = Some(v.clone());
        }
        if let Some(v) = &args.raw_features {
            run.raw_features = Some(v.clone());
        }
        if let Some(v) = &args.raw_labels {
            run.raw_labels = Some(v.clone());
        }
        if args.synthetic && run.synthetic.is_none() {
            run.synthetic = Some(SyntheticConfig::default());
        }
        if let Some(v) = &args.output_dir {
            run.output_dir = Some(v.clone());
        }
        if let Some(v) = args.seed {
            run.training.seed = v;
        }
        if let Some(v) = args.epochs {
            run.training.epochs = v;
        }
        if let Some(v) = args.batch_size {
            run.training.batch_size = v;
        }
        if let Some(v) = args.n_qubits {
            run.training.n_qubits = v;
        }
        if let Some(v) = args.n_layers {
            run.training.n_layers = v;
        }
        if let Some(v) = args.learning_rate {
            run.training.learning_rate = v;
        }
        if let Some(v) = args.lambda {
            run.training.lambda = v;
        }
        if let Some(modes) = &args.noise_modes {
            run.training.noise.modes = modes
                .iter()
                .filter(|m| !m.is_empty())
                .map(|m| match m.to_ascii_lowercase().as_str() {
                    "pixel" => Ok(NoiseMode::Pixel),
                    "gate" => Ok(NoiseMode::Gate),
                    "phase" => Ok(NoiseMode::Phase),
                    other => Err(Error::Config(format!("unknown noise mode {other:?}"))),
                })
                .collect::<Result<Vec<_>, _>>()?;
        }
        Ok(run)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("run-output"))
    }

    pub fn output_dir_if_set(&self) -> Option<PathBuf> {
        self.output_dir.clone()
    }

    pub fn train_fraction(&self) -> f64 {
        self.train_fraction.unwrap_or(0.67)
    }

    /// Produce the (train, validation) pair from whichever source is
    /// configured: raw matrix files, an image directory, or the synthetic
    /// generator.
    pub fn load_data(&self) -> anyhow::Result<(Dataset, Dataset)> {
        let (train, val) = if let (Some(f), Some(l)) = (&self.raw_features, &self.raw_labels) {
            let dataset = load_raw_dataset(f, l)?;
            self.split_dataset(dataset)?
        } else if let Some(root) = &self.data_root {
            let h = self.target_height.unwrap_or(100);
            let w = self.target_width.unwrap_or(100);
            let (dataset, report) = load_image_dataset(root, h, w)?;
            for path in &report.skipped {
                eprintln!("warning: skipped unreadable file {}", path.display());
            }
            if !report.skipped.is_empty() {
                eprintln!("warning: skipped {} file(s) in total", report.skipped.len());
            }
            self.split_dataset(dataset)?
        } else if let Some(synth) = &self.synthetic {
            synthetic_task(&synth.spec(), self.training.seed)
        } else {
            return Err(Error::Config(
                "no data source: set data_root, raw_features/raw_labels, or synthetic".into(),
            )
            .into());
        };
        let train = self.apply_augmentation(train)?;
        if train.n_classes() != self.training.n_classes {
            return Err(Error::Config(format!(
                "dataset has {} classes but the config says {}",
                train.n_classes(),
                self.training.n_classes
            ))
            .into());
        }
        Ok((train, val))
    }

    fn split_dataset(&self, dataset: Dataset) -> anyhow::Result<(Dataset, Dataset)> {
        let mut rng = derive_rng(self.training.seed, &[0x5EED]);
        let outcome = split(&dataset, self.train_fraction(), &mut rng)?;
        Ok((outcome.train, outcome.validation))
    }

    fn apply_augmentation(&self, mut train: Dataset) -> anyhow::Result<Dataset> {
        let (Some(class_name), Some(target)) = (&self.augment_class, self.augment_target) else {
            return Ok(train);
        };
        let class_id = train
            .manifest
            .class_names
            .iter()
            .position(|n| n == class_name)
            .ok_or_else(|| Error::Config(format!("unknown augment class {class_name:?}")))?;
        let mut rng = derive_rng(self.training.seed, &[0xA06]);
        augment_minority(&mut train, class_id, target, &AugmentParams::default(), &mut rng)?;
        Ok(train)
    }
}
