//! Independent end-to-end reference pipeline: amplitude encoding by hand,
//! dense circuit simulation, dense Z expectations, fusion, softmax.

use num_complex::Complex64;

use parqc_core::circuit::CircuitProgram;
use parqc_core::head::ModelSpec;
use parqc_core::params::ParameterTable;
use parqc_core::{Error, Result};

use crate::{dense_expectation_z, embed_gate, resolve_angles, MAX_QUBITS};

/// Encode features into dense amplitudes: normalize by the L2 norm computed
/// by direct summation, zero-pad to the register size.
fn encode(features: &[f64], n_qubits: usize) -> Result<Vec<Complex64>> {
    let dim = 1usize << n_qubits;
    if features.is_empty() || features.len() > dim {
        return Err(Error::Capacity { got: features.len(), n_qubits });
    }
    let norm: f64 = features.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::DegenerateEncoding);
    }
    let mut amps = vec![Complex64::ZERO; dim];
    for (a, &x) in amps.iter_mut().zip(features) {
        *a = Complex64::new(x / norm, 0.0);
    }
    Ok(amps)
}

fn run_dense(program: &CircuitProgram, params: &ParameterTable, amps: Vec<Complex64>) -> Result<Vec<Complex64>> {
    let n = program.n_qubits();
    if n > MAX_QUBITS {
        return Err(Error::Capacity { got: 1 << n, n_qubits: MAX_QUBITS });
    }
    let mut draws = std::iter::empty();
    let mut state = amps;
    for gate in program.gates() {
        let angles = resolve_angles(gate, params, &mut draws)?;
        state = embed_gate(gate.kind, &gate.qubits, &angles, n).apply(&state);
    }
    Ok(state)
}

/// Class probabilities from the dense pipeline.
pub fn reference_forward(
    features: &[f64],
    spec: &ModelSpec,
    programs: &[CircuitProgram; 2],
    params: &ParameterTable,
) -> Result<Vec<f64>> {
    let n = spec.n_qubits;
    let input = encode(features, n)?;
    let s1 = run_dense(&programs[0], params, input.clone())?;
    let s2 = run_dense(&programs[1], params, input)?;
    let e1: Vec<f64> = (0..n).map(|q| dense_expectation_z(&s1, n, q)).collect();
    let e2: Vec<f64> = (0..n).map(|q| dense_expectation_z(&s2, n, q)).collect();
    crate::reference_fuse(&e1, &e2, spec, params.bias())
}

/// Reference loss with the cross-entropy and L2 terms written out locally.
pub fn reference_loss(
    features: &[f64],
    one_hot: &[f64],
    spec: &ModelSpec,
    programs: &[CircuitProgram; 2],
    params: &ParameterTable,
    lambda: f64,
) -> Result<f64> {
    let probs = reference_forward(features, spec, programs, params)?;
    let ce: f64 = probs
        .iter()
        .zip(one_hot)
        .map(|(&p, &y)| -y * p.max(1e-12).ln())
        .sum();
    let l2: f64 = params.theta().iter().map(|t| t * t).sum();
    Ok(ce + lambda * l2)
}
