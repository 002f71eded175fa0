//! Complex state vector, amplitude encoding, in-place gate kernels, and
//! exact Pauli-Z expectations.
//!
//! Gates are applied directly over the amplitude array using bit-mask index
//! pairing; no dense matrices exist at runtime (the dense form lives only in
//! the test oracles). See the crate docs for the bit-ordering convention.

use num_complex::Complex64;

use crate::circuit::GateKind;
use crate::error::{Error, Result};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Full description of a pure `n`-qubit state: `2^n` complex amplitudes with
/// unit L2 norm.
#[derive(Clone, Debug, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    /// The computational basis state `|00..0>`.
    pub fn zero_state(n_qubits: usize) -> Self {
        assert!(n_qubits >= 1, "register needs at least one qubit");
        let mut amps = vec![Complex64::ZERO; 1 << n_qubits];
        amps[0] = Complex64::ONE;
        Statevector { n_qubits, amps }
    }

    /// Build from raw amplitudes; the length must be exactly `2^n_qubits`.
    pub fn from_amplitudes(n_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        if amps.len() != 1 << n_qubits {
            return Err(Error::Structural(format!(
                "amplitude vector has length {}, expected {}",
                amps.len(),
                1usize << n_qubits
            )));
        }
        Ok(Statevector { n_qubits, amps })
    }

    /// A specific computational basis state. The index follows the crate's
    /// bit-ordering convention (qubit 0 is the most significant bit).
    pub fn basis_state(n_qubits: usize, index: usize) -> Self {
        assert!(index < 1 << n_qubits);
        let mut amps = vec![Complex64::ZERO; 1 << n_qubits];
        amps[index] = Complex64::ONE;
        Statevector { n_qubits, amps }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    /// L2 norm of the amplitude vector.
    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Index-bit mask selecting qubit `q`.
    #[inline]
    pub fn qubit_mask(&self, qubit: usize) -> usize {
        1 << (self.n_qubits - 1 - qubit)
    }

    /// Largest absolute difference between the two amplitude vectors.
    pub fn max_abs_diff(&self, other: &Statevector) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Encode a real feature vector into the amplitudes of an `n`-qubit state.
///
/// `amplitudes[j] = features[j] / ||features||` for `j < features.len()`,
/// zero-padded beyond, so feature order is preserved and the result has unit
/// norm.
pub fn amplitude_encode(features: &[f64], n_qubits: usize) -> Result<Statevector> {
    let dim = 1usize << n_qubits;
    if features.is_empty() || features.len() > dim {
        return Err(Error::Capacity {
            got: features.len(),
            n_qubits,
        });
    }
    let norm_sq: f64 = features.iter().map(|x| x * x).sum();
    if norm_sq == 0.0 {
        return Err(Error::DegenerateEncoding);
    }
    let inv_norm = 1.0 / norm_sq.sqrt();
    let mut amps = vec![Complex64::ZERO; dim];
    for (a, &x) in amps.iter_mut().zip(features) {
        *a = Complex64::new(x * inv_norm, 0.0);
    }
    Ok(Statevector {
        n_qubits,
        amps,
    })
}

/// Exact expectation of Pauli-Z on one qubit: probability-weighted average of
/// +1 (bit clear) and -1 (bit set) over the basis states. Always in [-1, 1].
pub fn expectation_z(state: &Statevector, qubit: usize) -> Result<f64> {
    if qubit >= state.n_qubits {
        return Err(Error::Structural(format!(
            "qubit {qubit} out of range for {}-qubit register",
            state.n_qubits
        )));
    }
    let mask = state.qubit_mask(qubit);
    let mut acc = 0.0;
    for (j, a) in state.amps.iter().enumerate() {
        let p = a.norm_sqr();
        acc += if j & mask == 0 { p } else { -p };
    }
    Ok(acc)
}

/// Pauli-Z expectations of every qubit in a single pass over the amplitudes.
pub fn expectations_all(state: &Statevector) -> Vec<f64> {
    let n = state.n_qubits;
    let mut acc = vec![0.0f64; n];
    for (j, a) in state.amps.iter().enumerate() {
        let p = a.norm_sqr();
        if p == 0.0 {
            continue;
        }
        for (q, slot) in acc.iter_mut().enumerate() {
            // qubit q <-> bit (n-1-q)
            if j >> (n - 1 - q) & 1 == 0 {
                *slot += p;
            } else {
                *slot -= p;
            }
        }
    }
    acc
}

/// Apply a gate in place. `resolved` carries the concrete angles (already
/// resolved from any parameter bindings); its length must match the kind.
pub fn apply_gate(
    state: &mut Statevector,
    kind: GateKind,
    qubits: &[usize],
    resolved: &[f64],
) -> Result<()> {
    if qubits.len() != kind.arity() {
        return Err(Error::Structural(format!(
            "{kind:?} expects {} qubits, got {}",
            kind.arity(),
            qubits.len()
        )));
    }
    if resolved.len() != kind.angle_count() {
        return Err(Error::Structural(format!(
            "{kind:?} expects {} angles, got {}",
            kind.angle_count(),
            resolved.len()
        )));
    }
    for (i, &q) in qubits.iter().enumerate() {
        if q >= state.n_qubits {
            return Err(Error::Structural(format!(
                "qubit {q} out of range for {}-qubit register",
                state.n_qubits
            )));
        }
        if qubits[..i].contains(&q) {
            return Err(Error::Structural(format!("duplicate qubit {q} in gate")));
        }
    }
    apply_gate_unchecked(state, kind, qubits, resolved);
    Ok(())
}

/// Kernel dispatch without validation; callers must have checked the gate
/// (program construction validates once, so the run loop stays branch-light).
pub(crate) fn apply_gate_unchecked(
    state: &mut Statevector,
    kind: GateKind,
    qubits: &[usize],
    resolved: &[f64],
) {
    match kind {
        GateKind::H => {
            let r = Complex64::new(FRAC_1_SQRT_2, 0.0);
            single_qubit(state, qubits[0], r, r, r, -r);
        }
        GateKind::RX => {
            let (s, c) = (resolved[0] / 2.0).sin_cos();
            let cs = Complex64::new(c, 0.0);
            let mis = Complex64::new(0.0, -s);
            single_qubit(state, qubits[0], cs, mis, mis, cs);
        }
        GateKind::RY => {
            let (s, c) = (resolved[0] / 2.0).sin_cos();
            let cs = Complex64::new(c, 0.0);
            let sn = Complex64::new(s, 0.0);
            single_qubit(state, qubits[0], cs, -sn, sn, cs);
        }
        GateKind::RZ => {
            let half = resolved[0] / 2.0;
            let e_neg = Complex64::from_polar(1.0, -half);
            let e_pos = Complex64::from_polar(1.0, half);
            diagonal(state, qubits[0], e_neg, e_pos);
        }
        GateKind::U3 => {
            // Generalized Euler rotation:
            //   [[cos(t0/2),            -e^{i t2} sin(t0/2)      ],
            //    [e^{i t1} sin(t0/2),    e^{i (t1+t2)} cos(t0/2) ]]
            let (s, c) = (resolved[0] / 2.0).sin_cos();
            let u00 = Complex64::new(c, 0.0);
            let u01 = -Complex64::from_polar(s, resolved[2]);
            let u10 = Complex64::from_polar(s, resolved[1]);
            let u11 = Complex64::from_polar(c, resolved[1] + resolved[2]);
            single_qubit(state, qubits[0], u00, u01, u10, u11);
        }
        GateKind::CX => controlled_x(state, &[qubits[0]], qubits[1]),
        GateKind::CY => controlled_y(state, qubits[0], qubits[1]),
        GateKind::CCX => controlled_x(state, &[qubits[0], qubits[1]], qubits[2]),
    }
}

/// Generic 2x2 unitary on one qubit: amplitudes are visited in (bit clear,
/// bit set) pairs enumerated by inserting a zero at the qubit's bit position.
fn single_qubit(
    state: &mut Statevector,
    qubit: usize,
    u00: Complex64,
    u01: Complex64,
    u10: Complex64,
    u11: Complex64,
) {
    let mask = state.qubit_mask(qubit);
    let low = mask - 1;
    let high = !low;
    let half = state.amps.len() / 2;
    let amps = &mut state.amps;
    for base in 0..half {
        let j = (base & high) << 1 | (base & low);
        let k = j | mask;
        let a = amps[j];
        let b = amps[k];
        amps[j] = u00 * a + u01 * b;
        amps[k] = u10 * a + u11 * b;
    }
}

/// Phase-only 2x2 gate (RZ): no pairing needed.
fn diagonal(state: &mut Statevector, qubit: usize, d0: Complex64, d1: Complex64) {
    let mask = state.qubit_mask(qubit);
    for (j, a) in state.amps.iter_mut().enumerate() {
        *a *= if j & mask == 0 { d0 } else { d1 };
    }
}

/// X on the target conditioned on every control bit being set. Covers CX
/// (one control) and CCX (two controls): swap the target pair within the
/// all-controls-set subspace.
fn controlled_x(state: &mut Statevector, controls: &[usize], target: usize) {
    let cmask: usize = controls.iter().map(|&c| state.qubit_mask(c)).sum();
    let tmask = state.qubit_mask(target);
    let dim = state.amps.len();
    let amps = &mut state.amps;
    for j in 0..dim {
        if j & cmask == cmask && j & tmask == 0 {
            amps.swap(j, j | tmask);
        }
    }
}

/// Controlled-Y: within the control-set subspace, |t=0> -> i|t=1> and
/// |t=1> -> -i|t=0>.
fn controlled_y(state: &mut Statevector, control: usize, target: usize) {
    let cmask = state.qubit_mask(control);
    let tmask = state.qubit_mask(target);
    let i = Complex64::I;
    let dim = state.amps.len();
    let amps = &mut state.amps;
    for j in 0..dim {
        if j & cmask == cmask && j & tmask == 0 {
            let k = j | tmask;
            let a = amps[j];
            let b = amps[k];
            amps[j] = -i * b;
            amps[k] = i * a;
        }
    }
}
