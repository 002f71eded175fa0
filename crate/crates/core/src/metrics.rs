//! Classification metrics: confusion matrix, per-class precision/recall/F1,
//! accuracy. Serializes to the JSON report consumed by the CLI.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Evaluation summary over one dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    /// Count matrix; rows are true classes, columns predicted classes.
    pub confusion: Vec<Vec<usize>>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub accuracy: f64,
    /// Mean loss over the evaluated samples; filled by the caller (the
    /// counting below has no access to probabilities).
    pub loss: f64,
}

/// Tally predictions against truths. Precision and recall fall back to 0
/// when their denominators are empty, and F1 is 0 when both are 0.
pub fn compute_metrics(predictions: &[usize], truths: &[usize], n_classes: usize) -> Result<EvalMetrics> {
    if predictions.is_empty() {
        return Err(Error::Usage("cannot compute metrics over zero samples".into()));
    }
    if predictions.len() != truths.len() {
        return Err(Error::Usage(format!(
            "{} predictions for {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    let mut confusion = vec![vec![0usize; n_classes]; n_classes];
    for (&p, &t) in predictions.iter().zip(truths) {
        if p >= n_classes || t >= n_classes {
            return Err(Error::Usage(format!(
                "label out of range: prediction {p}, truth {t}, classes {n_classes}"
            )));
        }
        confusion[t][p] += 1;
    }

    let mut precision = vec![0.0; n_classes];
    let mut recall = vec![0.0; n_classes];
    let mut f1 = vec![0.0; n_classes];
    for c in 0..n_classes {
        let tp = confusion[c][c];
        let predicted: usize = (0..n_classes).map(|t| confusion[t][c]).sum();
        let actual: usize = confusion[c].iter().sum();
        precision[c] = if predicted > 0 { tp as f64 / predicted as f64 } else { 0.0 };
        recall[c] = if actual > 0 { tp as f64 / actual as f64 } else { 0.0 };
        f1[c] = if precision[c] + recall[c] > 0.0 {
            2.0 * precision[c] * recall[c] / (precision[c] + recall[c])
        } else {
            0.0
        };
    }
    let correct: usize = (0..n_classes).map(|c| confusion[c][c]).sum();
    Ok(EvalMetrics {
        confusion,
        precision,
        recall,
        f1,
        accuracy: correct as f64 / predictions.len() as f64,
        loss: 0.0,
    })
}
