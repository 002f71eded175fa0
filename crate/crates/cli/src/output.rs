//! Run artifacts: the per-class metrics report and the dataset manifest.

use std::path::Path;

use serde::Serialize;

use parqc_core::data::Dataset;
use parqc_core::metrics::EvalMetrics;

use crate::config::RunConfig;

#[derive(Serialize)]
pub struct ClassRow {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Serialize)]
pub struct Report {
    pub accuracy: f64,
    pub loss: f64,
    pub per_class: Vec<ClassRow>,
    pub confusion: Vec<Vec<usize>>,
}

pub fn build_report(metrics: &EvalMetrics, class_names: &[String]) -> Report {
    let per_class = class_names
        .iter()
        .enumerate()
        .map(|(c, name)| ClassRow {
            class: name.clone(),
            precision: metrics.precision[c],
            recall: metrics.recall[c],
            f1: metrics.f1[c],
        })
        .collect();
    Report {
        accuracy: metrics.accuracy,
        loss: metrics.loss,
        per_class,
        confusion: metrics.confusion.clone(),
    }
}

pub fn write_report(metrics: &EvalMetrics, class_names: &[String], path: &Path) -> anyhow::Result<()> {
    let report = build_report(metrics, class_names);
    std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
    Ok(())
}

#[derive(Serialize)]
struct Manifest<'a> {
    class_names: &'a [String],
    class_counts: &'a [usize],
    height: usize,
    width: usize,
    channels: usize,
    split_seed: u64,
    train_fraction: f64,
    train_counts: &'a [usize],
    val_counts: &'a [usize],
}

pub fn write_manifest(
    run: &RunConfig,
    train: &Dataset,
    val: &Dataset,
    path: &Path,
) -> anyhow::Result<()> {
    let manifest = Manifest {
        class_names: &train.manifest.class_names,
        class_counts: &train.manifest.class_counts,
        height: train.manifest.height,
        width: train.manifest.width,
        channels: train.manifest.channels,
        split_seed: run.training.seed,
        train_fraction: run.train_fraction(),
        train_counts: &train.manifest.class_counts,
        val_counts: &val.manifest.class_counts,
    };
    std::fs::write(path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}
