//! End-to-end model assembly, the mini-batch training loop, and evaluation.
//!
//! A [`Model`] owns the two circuit programs (possibly rewritten for phase
//! noise) and the logit selection. A forward pass encodes the features once,
//! runs both circuits concurrently on independent copies of the encoded
//! state, fuses the per-qubit expectations into class logits, and applies
//! softmax. The circuits share nothing mutable, so concurrent and sequential
//! execution produce bit-identical logits.
//!
//! Three parallelism levels, all with fixed reduction order: the two
//! circuits per forward pass, the samples within a batch, and the
//! shift-rule evaluations per gradient.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{self, AnsatzSpec, AnsatzVariant, HadamardMode};
use crate::circuit::{run_circuit_with, CircuitProgram, EvalContext};
use crate::data::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::gradient::{argmax, loss_grad};
use crate::head::{cross_entropy, fuse_logits, softmax, AdamState, ModelSpec};
use crate::metrics::{compute_metrics, EvalMetrics};
use crate::noise::{add_pixel_noise, GateNoise, NoiseConfig};
use crate::params::ParameterTable;
use crate::rng::derive_rng;
use crate::state::{amplitude_encode, expectations_all, Statevector};

// Stream-tag namespace for deriving independent RNG streams.
const TAG_PARAM_INIT: u64 = 1;
const TAG_SHUFFLE: u64 = 2;
const TAG_PIXEL: u64 = 3;
const TAG_TRAIN: u64 = 4;
const TAG_EVAL: u64 = 5;

/// All training hyperparameters. Defaults follow the reference
/// configuration: 15 qubits, 20 layers, learning rate 0.1, lambda 0.01,
/// 15 epochs, batch size 8.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub n_qubits: usize,
    pub n_layers: usize,
    pub n_classes: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub noise: NoiseConfig,
    /// Indices into the concatenated expectation vector; when absent the
    /// default alternating selection is used.
    pub logit_selection: Option<Vec<usize>>,
    pub hadamard: HadamardMode,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            n_qubits: 15,
            n_layers: 20,
            n_classes: 3,
            learning_rate: 0.1,
            lambda: 0.01,
            epochs: 15,
            batch_size: 8,
            seed: 42,
            noise: NoiseConfig::default(),
            logit_selection: None,
            hadamard: HadamardMode::default(),
        }
    }
}

impl TrainingConfig {
    /// Same defaults with a different model shape; handy for small runs.
    pub fn with_shape(n_qubits: usize, n_layers: usize, n_classes: usize) -> Self {
        TrainingConfig { n_qubits, n_layers, n_classes, ..TrainingConfig::default() }
    }

    /// Seed for the noise streams; falls back to the training seed.
    pub fn noise_seed(&self) -> u64 {
        self.noise.seed.unwrap_or(self.seed)
    }

    pub fn validate(&self, feature_len: usize) -> Result<()> {
        if self.batch_size < 1 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.epochs < 1 {
            return Err(Error::Config("epoch count must be at least 1".into()));
        }
        if self.n_classes < 2 {
            return Err(Error::Config("need at least two classes".into()));
        }
        if feature_len > 0 && feature_len > 1 << self.n_qubits {
            return Err(Error::Config(format!(
                "{feature_len} features do not fit in 2^{} amplitudes",
                self.n_qubits
            )));
        }
        self.noise.validate()?;
        Ok(())
    }
}

/// Identifies what an RNG stream is for, so parallel evaluations derive
/// reproducible noise regardless of scheduling.
pub struct EvalPurpose;

impl EvalPurpose {
    /// The prediction forward pass of a sample.
    pub const FORWARD: u64 = 0;

    /// One side of a shift-rule pair: occurrence (gate, angle), sign 0 for
    /// +pi/2 and 1 for -pi/2.
    pub fn shift(gate: usize, angle: usize, sign: u64) -> u64 {
        1 + 2 * (gate as u64 * 4 + angle as u64) + sign
    }
}

/// Derives per-evaluation gate-noise streams from the master noise seed and
/// the evaluation's structural coordinates (phase of the run, sample,
/// circuit, purpose).
pub struct NoiseStreams<'a> {
    config: Option<&'a NoiseConfig>,
    seed: u64,
    context: [u64; 3],
}

impl<'a> NoiseStreams<'a> {
    /// No noise anywhere; the noiseless pipeline.
    pub fn disabled() -> NoiseStreams<'static> {
        NoiseStreams { config: None, seed: 0, context: [0; 3] }
    }

    /// Streams for one optimizer step.
    pub fn training(config: &'a NoiseConfig, seed: u64, epoch: u64, step: u64) -> Self {
        NoiseStreams { config: Some(config), seed, context: [TAG_TRAIN, epoch, step] }
    }

    /// Streams for a (pure) evaluation pass.
    pub fn evaluation(config: &'a NoiseConfig, seed: u64) -> Self {
        NoiseStreams { config: Some(config), seed, context: [TAG_EVAL, 0, 0] }
    }

    /// The gate-noise state for one circuit evaluation, or `None` when no
    /// circuit-level noise mode is enabled.
    pub fn gate_noise(&self, sample: u64, circuit: u64, purpose: u64) -> Option<GateNoise> {
        let config = self.config?;
        if !config.circuit_noise_enabled() {
            return None;
        }
        let rng = derive_rng(
            self.seed,
            &[self.context[0], self.context[1], self.context[2], sample, circuit, purpose],
        );
        Some(GateNoise::new(config, rng))
    }
}

/// The assembled classifier: spec plus the two circuit programs. When phase
/// noise is enabled the programs carry the injected RZ placeholders.
#[derive(Clone, Debug)]
pub struct Model {
    pub spec: ModelSpec,
    pub programs: [CircuitProgram; 2],
}

impl Model {
    pub fn build(config: &TrainingConfig) -> Result<Model> {
        config.validate(0)?;
        let mut spec = ModelSpec::new(config.n_qubits, config.n_layers, config.n_classes);
        if let Some(selection) = &config.logit_selection {
            spec = spec.with_selection(selection.clone());
        }
        spec.validate()?;

        let spec1 = AnsatzSpec::new(AnsatzVariant::Pqc1, config.n_qubits, config.n_layers)?
            .with_hadamard(config.hadamard);
        let spec2 = AnsatzSpec::new(AnsatzVariant::Pqc2, config.n_qubits, config.n_layers)?
            .with_hadamard(config.hadamard);
        let mut p1 = ansatz::build(&spec1, 0);
        let mut p2 = ansatz::build(&spec2, spec1.slot_count());
        if config.noise.phase_enabled() {
            p1 = crate::noise::inject_phase_noise(&p1);
            p2 = crate::noise::inject_phase_noise(&p2);
        }
        Ok(Model { spec, programs: [p1, p2] })
    }

    /// Zero-initialized parameter table with the sharing map attached.
    pub fn layout(&self) -> Result<ParameterTable> {
        ParameterTable::layout(&[&self.programs[0], &self.programs[1]], self.spec.n_classes)
    }

    /// Parameter table with theta drawn uniformly from [0, 2*pi) under the
    /// given seed and the bias at zero.
    pub fn initial_params(&self, seed: u64) -> ParameterTable {
        let mut params = self.layout().expect("programs reference a dense slot range");
        params.randomize(&mut derive_rng(seed, &[TAG_PARAM_INIT]));
        params
    }

    /// Run both circuits on independent copies of `input` (concurrently) and
    /// produce class probabilities.
    pub fn probabilities(
        &self,
        params: &ParameterTable,
        input: &Statevector,
        streams: &NoiseStreams<'_>,
        sample_idx: u64,
    ) -> Result<Vec<f64>> {
        let run = |circuit: usize| -> Result<Vec<f64>> {
            let mut noise = streams.gate_noise(sample_idx, circuit as u64, EvalPurpose::FORWARD);
            let mut ctx = EvalContext { shift: None, noise: noise.as_mut() };
            let out = run_circuit_with(&self.programs[circuit], params, input, &mut ctx)?;
            Ok(expectations_all(&out))
        };
        let (e1, e2) = rayon::join(|| run(0), || run(1));
        let logits = fuse_logits(&e1?, &e2?, &self.spec.logit_selection, params.bias())?;
        Ok(softmax(&logits))
    }

    /// Total trainable values (theta plus bias).
    pub fn trainable_count(&self) -> usize {
        2 * self.spec.n_layers * self.spec.n_qubits * 3 + self.spec.n_classes
    }
}

/// Noiseless single-sample forward pass: encode, run both circuits, fuse,
/// softmax.
pub fn forward(sample: &Sample, params: &ParameterTable, model: &Model) -> Result<Vec<f64>> {
    let input = amplitude_encode(&sample.features, model.spec.n_qubits)?;
    model.probabilities(params, &input, &NoiseStreams::disabled(), 0)
}

/// Loss/accuracy snapshot of one epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub seconds: f64,
}

/// Everything a training run produces.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub records: Vec<EpochRecord>,
    pub params: ParameterTable,
    pub model: Model,
    pub optimizer_steps: u64,
}

/// Copy a dataset, adding pixel noise to every sample when the pixel mode is
/// enabled. Applied once at dataset preparation, not per epoch.
pub fn prepare_dataset(dataset: &Dataset, config: &TrainingConfig, phase_tag: u64) -> Dataset {
    if !config.noise.pixel_enabled() {
        return dataset.clone();
    }
    let seed = config.noise_seed();
    let mut noisy = dataset.clone();
    noisy.samples.par_iter_mut().enumerate().for_each(|(i, s)| {
        let mut rng = derive_rng(seed, &[TAG_PIXEL, phase_tag, i as u64]);
        add_pixel_noise(&mut s.features, &config.noise, &mut rng);
    });
    noisy
}

/// Mini-batch training: per epoch, shuffle the training set (seeded),
/// iterate batches, take one Adam step per batch, then evaluate on the
/// validation set. Training loss/accuracy come from the pre-update forward
/// passes inside each batch.
pub fn train(train_set: &Dataset, val_set: &Dataset, config: &TrainingConfig) -> Result<TrainOutcome> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Usage("training and validation sets must be non-empty".into()));
    }
    config.validate(train_set.feature_len())?;
    if train_set.n_classes() != config.n_classes {
        return Err(Error::Config(format!(
            "dataset has {} classes, config expects {}",
            train_set.n_classes(),
            config.n_classes
        )));
    }

    let model = Model::build(config)?;
    let mut params = model.initial_params(config.seed);
    let mut adam = AdamState::new(params.trainable_count(), config.learning_rate);

    let train_data = prepare_dataset(train_set, config, 0);
    let val_data = prepare_dataset(val_set, config, 1);
    let noise_seed = config.noise_seed();

    let mut records = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let started = Instant::now();
        let mut order: Vec<usize> = (0..train_data.len()).collect();
        order.shuffle(&mut derive_rng(config.seed, &[TAG_SHUFFLE, epoch as u64]));

        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for (step, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&Sample> = chunk.iter().map(|&i| &train_data.samples[i]).collect();
            let streams =
                NoiseStreams::training(&config.noise, noise_seed, epoch as u64, step as u64);
            let bg = loss_grad(&batch, &params, &model, config.lambda, &streams)?;
            if !bg.mean_loss.is_finite() {
                return Err(numerical_abort(bg.mean_loss, epoch, step, &params));
            }
            loss_sum += bg.mean_loss * batch.len() as f64;
            correct += bg
                .predictions
                .iter()
                .zip(&batch)
                .filter(|(&p, s)| p == s.label)
                .count();

            let mut flat = params.flatten();
            adam.step(&mut flat, &bg.gradient).map_err(|e| match e {
                Error::Numerical(msg) => numerical_abort_msg(&msg, epoch, step, &params),
                other => other,
            })?;
            params.assign_flat(&flat)?;
        }

        let val = evaluate_with_model(&val_data, &params, &model, config)?;
        records.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train_data.len() as f64,
            train_accuracy: correct as f64 / train_data.len() as f64,
            val_loss: val.loss,
            val_accuracy: val.accuracy,
            seconds: started.elapsed().as_secs_f64(),
        });
    }

    Ok(TrainOutcome { records, params, model, optimizer_steps: adam.t })
}

fn numerical_abort(loss: f64, epoch: usize, step: usize, params: &ParameterTable) -> Error {
    numerical_abort_msg(&format!("loss {loss} is not finite"), epoch, step, params)
}

fn numerical_abort_msg(msg: &str, epoch: usize, step: usize, params: &ParameterTable) -> Error {
    let norm = params.theta().iter().map(|t| t * t).sum::<f64>().sqrt();
    Error::Numerical(format!(
        "{msg} at epoch {epoch}, batch {step}; parameter norm {norm:.6}"
    ))
}

/// Argmax predictions and metrics over a dataset. Pure: repeated calls give
/// identical results. Gate/phase noise applies when enabled in the config;
/// pixel noise is a dataset-preparation concern (see [`prepare_dataset`]).
pub fn evaluate_with_model(
    dataset: &Dataset,
    params: &ParameterTable,
    model: &Model,
    config: &TrainingConfig,
) -> Result<EvalMetrics> {
    if dataset.is_empty() {
        return Err(Error::Usage("cannot evaluate an empty dataset".into()));
    }
    let streams = NoiseStreams::evaluation(&config.noise, config.noise_seed());
    let results: Vec<(usize, f64)> = dataset
        .samples
        .par_iter()
        .enumerate()
        .map(|(i, sample)| {
            let input = amplitude_encode(&sample.features, model.spec.n_qubits)?;
            let probs = model.probabilities(params, &input, &streams, i as u64)?;
            let loss = cross_entropy(&probs, &sample.one_hot, params.theta(), config.lambda);
            Ok((argmax(&probs), loss))
        })
        .collect::<Result<_>>()?;

    let predictions: Vec<usize> = results.iter().map(|(p, _)| *p).collect();
    let truths: Vec<usize> = dataset.samples.iter().map(|s| s.label).collect();
    let mut metrics = compute_metrics(&predictions, &truths, config.n_classes)?;
    metrics.loss = results.iter().map(|(_, l)| l).sum::<f64>() / dataset.len() as f64;
    Ok(metrics)
}

/// [`evaluate_with_model`] with the model rebuilt from the config.
pub fn evaluate(dataset: &Dataset, params: &ParameterTable, config: &TrainingConfig) -> Result<EvalMetrics> {
    let model = Model::build(config)?;
    evaluate_with_model(dataset, params, &model, config)
}

/// Write the per-epoch curve in the CSV layout consumed by plotting tools.
pub fn write_epochs_csv(records: &[EpochRecord], path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "epoch,train_loss,train_acc,val_loss,val_acc,seconds")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.epoch, r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy, r.seconds
        )?;
    }
    w.flush()?;
    Ok(())
}
