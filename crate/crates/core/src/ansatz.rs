//! Builders for the two circuit architectures.
//!
//! Both share the same rotation sub-block per layer: H on every qubit, then
//! U3 on every qubit, then RX, then RY (qubit-major within each family).
//! The first angle of each qubit's U3 is shared with that qubit's RX and RY
//! angles, so each (layer, qubit) contributes three trainable slots.
//!
//! They differ in the entanglement block:
//! - variant 1: CX over every ordered pair i<j (all-to-all), CCX over the
//!   triplets (i, i+1, i+2) mod n, then a CX ring (i -> i+1 mod n);
//! - variant 2: CY over every ordered pair i<j, then the same CCX triplets,
//!   with no ring.

use serde::{Deserialize, Serialize};

use crate::circuit::{AngleBinding, CircuitProgram};
use crate::error::{Error, Result};

/// Which of the two circuit architectures to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnsatzVariant {
    Pqc1,
    Pqc2,
}

/// Whether the per-layer Hadamard wall repeats in every layer or appears
/// only at the start of the circuit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HadamardMode {
    #[default]
    PerLayer,
    FirstLayerOnly,
}

/// Ansatz shape parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AnsatzSpec {
    pub variant: AnsatzVariant,
    pub n_qubits: usize,
    pub n_layers: usize,
    pub hadamard: HadamardMode,
}

impl AnsatzSpec {
    pub fn new(variant: AnsatzVariant, n_qubits: usize, n_layers: usize) -> Result<Self> {
        if n_qubits < 3 {
            return Err(Error::Structural(format!(
                "triplet entanglement requires at least 3 qubits, got {n_qubits}"
            )));
        }
        if n_layers < 1 {
            return Err(Error::Structural("need at least one layer".into()));
        }
        Ok(AnsatzSpec { variant, n_qubits, n_layers, hadamard: HadamardMode::PerLayer })
    }

    pub fn with_hadamard(mut self, mode: HadamardMode) -> Self {
        self.hadamard = mode;
        self
    }

    /// Trainable slots this circuit contributes: layers * qubits * 3.
    pub fn slot_count(&self) -> usize {
        self.n_layers * self.n_qubits * 3
    }
}

/// Slot index of parameter (layer, qubit, k) within one circuit's block.
fn slot_index(n_qubits: usize, layer: usize, qubit: usize, k: usize) -> usize {
    (layer * n_qubits + qubit) * 3 + k
}

/// Build the first architecture (CX all-to-all + CCX triplets + CX ring),
/// with parameter slots numbered from 0.
pub fn build_pqc1(n_qubits: usize, n_layers: usize) -> Result<CircuitProgram> {
    let spec = AnsatzSpec::new(AnsatzVariant::Pqc1, n_qubits, n_layers)?;
    Ok(build(&spec, 0))
}

/// Build the second architecture (CY all-to-all + CCX triplets, no ring),
/// with parameter slots numbered from 0.
pub fn build_pqc2(n_qubits: usize, n_layers: usize) -> Result<CircuitProgram> {
    let spec = AnsatzSpec::new(AnsatzVariant::Pqc2, n_qubits, n_layers)?;
    Ok(build(&spec, 0))
}

/// Build a circuit with its slot ids offset by `slot_base`, so a pair of
/// circuits can share one flat parameter table (circuit 1 at base 0,
/// circuit 2 at base `L*n*3`).
pub fn build(spec: &AnsatzSpec, slot_base: usize) -> CircuitProgram {
    let n = spec.n_qubits;
    let mut program = CircuitProgram::new(n);
    for layer in 0..spec.n_layers {
        if spec.hadamard == HadamardMode::PerLayer || layer == 0 {
            for q in 0..n {
                program.h(q);
            }
        }
        let slot = |q: usize, k: usize| AngleBinding::Slot(slot_base + slot_index(n, layer, q, k));
        for q in 0..n {
            program.u3(q, slot(q, 0), slot(q, 1), slot(q, 2));
        }
        for q in 0..n {
            program.rx(q, slot(q, 0));
        }
        for q in 0..n {
            program.ry(q, slot(q, 0));
        }
        match spec.variant {
            AnsatzVariant::Pqc1 => {
                for i in 0..n {
                    for j in (i + 1)..n {
                        program.cx(i, j);
                    }
                }
                for i in 0..n {
                    program.ccx(i, (i + 1) % n, (i + 2) % n);
                }
                for i in 0..n {
                    program.cx(i, (i + 1) % n);
                }
            }
            AnsatzVariant::Pqc2 => {
                for i in 0..n {
                    for j in (i + 1)..n {
                        program.cy(i, j);
                    }
                }
                for i in 0..n {
                    program.ccx(i, (i + 1) % n, (i + 2) % n);
                }
            }
        }
    }
    program
}

/// Expected total gate count for a variant, for structural checks:
/// per layer, 4n rotations/walls plus n(n-1)/2 pair gates plus n CCX, plus
/// n ring CX for variant 1 only.
pub fn expected_gate_count(spec: &AnsatzSpec) -> usize {
    let n = spec.n_qubits;
    let pair = n * (n - 1) / 2;
    let per_layer = match spec.variant {
        AnsatzVariant::Pqc1 => 4 * n + pair + 2 * n,
        AnsatzVariant::Pqc2 => 4 * n + pair + n,
    };
    match spec.hadamard {
        HadamardMode::PerLayer => spec.n_layers * per_layer,
        HadamardMode::FirstLayerOnly => spec.n_layers * per_layer - (spec.n_layers - 1) * n,
    }
}
