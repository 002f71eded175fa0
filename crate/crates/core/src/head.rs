//! Classical post-processing: logit fusion, softmax, cross-entropy with L2
//! regularization, and the Adam optimizer.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the classifier: register/layer sizes plus which components of
/// the concatenated expectation vector become class logits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub n_qubits: usize,
    pub n_layers: usize,
    pub n_classes: usize,
    /// Indices into the length-`2 * n_qubits` concatenation of circuit 1 and
    /// circuit 2 expectations. Must be distinct.
    pub logit_selection: Vec<usize>,
}

impl ModelSpec {
    pub fn new(n_qubits: usize, n_layers: usize, n_classes: usize) -> Self {
        ModelSpec {
            n_qubits,
            n_layers,
            n_classes,
            logit_selection: default_logit_selection(n_qubits, n_classes),
        }
    }

    pub fn with_selection(mut self, selection: Vec<usize>) -> Self {
        self.logit_selection = selection;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.logit_selection.len() != self.n_classes {
            return Err(Error::Structural(format!(
                "logit selection has {} entries for {} classes",
                self.logit_selection.len(),
                self.n_classes
            )));
        }
        for (i, &s) in self.logit_selection.iter().enumerate() {
            if s >= 2 * self.n_qubits {
                return Err(Error::Structural(format!(
                    "logit selection index {s} out of range (2n = {})",
                    2 * self.n_qubits
                )));
            }
            if self.logit_selection[..i].contains(&s) {
                return Err(Error::Structural(format!("duplicate logit selection index {s}")));
            }
        }
        Ok(())
    }

    /// Which circuit (0 or 1) and which of its qubits feed class `c`.
    pub fn class_source(&self, class: usize) -> (usize, usize) {
        let idx = self.logit_selection[class];
        if idx < self.n_qubits {
            (0, idx)
        } else {
            (1, idx - self.n_qubits)
        }
    }
}

/// Default selection alternates between the two circuits so both influence
/// the decision: class 0 reads circuit 1 qubit 0, class 1 reads circuit 2
/// qubit 0, class 2 reads circuit 1 qubit 1, and so on.
pub fn default_logit_selection(n_qubits: usize, n_classes: usize) -> Vec<usize> {
    (0..n_classes)
        .map(|c| if c % 2 == 0 { c / 2 } else { n_qubits + c / 2 })
        .collect()
}

/// Concatenate the two per-qubit expectation vectors, pick the selected
/// components, and add the class bias.
pub fn fuse_logits(
    logits_c1: &[f64],
    logits_c2: &[f64],
    selection: &[usize],
    bias: &[f64],
) -> Result<Vec<f64>> {
    if logits_c1.len() != logits_c2.len() {
        return Err(Error::Structural(
            "circuit logit vectors must have equal length".into(),
        ));
    }
    if selection.len() != bias.len() {
        return Err(Error::Structural(
            "selection and bias lengths must match".into(),
        ));
    }
    let n = logits_c1.len();
    let mut out = Vec::with_capacity(selection.len());
    for (&s, &b) in selection.iter().zip(bias) {
        let v = if s < n {
            logits_c1[s]
        } else if s < 2 * n {
            logits_c2[s - n]
        } else {
            return Err(Error::Structural(format!(
                "selection index {s} out of range (2n = {})",
                2 * n
            )));
        };
        out.push(v + b);
    }
    Ok(out)
}

/// Numerically stable softmax: exponentials are taken after subtracting the
/// maximum, so arbitrarily large logits stay finite.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Floor applied to probabilities inside the log so degenerate predictions
/// cannot produce an infinite loss.
pub const PROB_FLOOR: f64 = 1e-12;

/// Cross-entropy against a one-hot target plus an L2 penalty over the
/// circuit parameters (the bias is excluded from the penalty).
pub fn cross_entropy(probs: &[f64], one_hot: &[f64], theta: &[f64], lambda: f64) -> f64 {
    let ce: f64 = probs
        .iter()
        .zip(one_hot)
        .map(|(&p, &y)| -y * p.max(PROB_FLOOR).ln())
        .sum();
    ce + lambda * theta.iter().map(|t| t * t).sum::<f64>()
}

/// Adam optimizer state over the flattened (theta then bias) parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    /// First-moment estimate.
    pub a: Vec<f64>,
    /// Second-moment estimate.
    pub b: Vec<f64>,
    /// Completed step count.
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub eta: f64,
}

impl AdamState {
    pub fn new(n_params: usize, eta: f64) -> Self {
        AdamState {
            a: vec![0.0; n_params],
            b: vec![0.0; n_params],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            eta,
        }
    }

    /// One update:
    ///   a <- b1*a + (1-b1)*g
    ///   b <- b2*b + (1-b2)*g.^2
    ///   eta_t = eta * sqrt(1 - b2^t) / (1 - b1^t)
    ///   params <- params - eta_t * a / (sqrt(b) + eps)
    /// Rejects non-finite gradient entries before touching any state.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if grad.len() != params.len() || grad.len() != self.a.len() {
            return Err(Error::Usage(format!(
                "gradient length {} does not match parameter length {}",
                grad.len(),
                params.len()
            )));
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite gradient entry at index {i}: {}",
                grad[i]
            )));
        }
        self.t += 1;
        let t = self.t as i32;
        let eta_t = self.eta * (1.0 - self.beta2.powi(t)).sqrt() / (1.0 - self.beta1.powi(t));
        for i in 0..params.len() {
            self.a[i] = self.beta1 * self.a[i] + (1.0 - self.beta1) * grad[i];
            self.b[i] = self.beta2 * self.b[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            params[i] -= eta_t * self.a[i] / (self.b[i].sqrt() + self.epsilon);
        }
        Ok(())
    }
}
