//! Brute-force references for testing the fast simulation path.
//!
//! Everything here favors clarity over speed and is compiled into test
//! targets only (this crate is a dev-dependency of the main library). The
//! dense simulator builds each gate's full `2^n x 2^n` matrix by embedding
//! its small unitary over the gate's qubits and multiplies matrices into the
//! state sequentially. It shares no gate-application code with the in-place
//! kernels it checks; gate matrices are written out independently from their
//! definitions.

use num_complex::Complex64;

use parqc_core::circuit::{AngleBinding, CircuitProgram};
use parqc_core::head::{fuse_logits, softmax, ModelSpec};
use parqc_core::params::ParameterTable;
use parqc_core::state::Statevector;
use parqc_core::{Error, Result};

pub mod reference;

pub use reference::{reference_forward, reference_loss};

/// Largest register the dense oracle accepts.
pub const MAX_QUBITS: usize = 3;

/// Dense complex matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseUnitary {
    pub dim: usize,
    pub data: Vec<Complex64>,
}

impl DenseUnitary {
    pub fn identity(dim: usize) -> Self {
        let mut data = vec![Complex64::ZERO; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = Complex64::ONE;
        }
        DenseUnitary { dim, data }
    }

    pub fn at(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.dim + col]
    }

    fn set(&mut self, row: usize, col: usize, v: Complex64) {
        self.data[row * self.dim + col] = v;
    }

    /// Matrix product `self * other`.
    pub fn matmul(&self, other: &DenseUnitary) -> DenseUnitary {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut out = DenseUnitary { dim: n, data: vec![Complex64::ZERO; n * n] };
        for r in 0..n {
            for k in 0..n {
                let a = self.at(r, k);
                if a == Complex64::ZERO {
                    continue;
                }
                for c in 0..n {
                    out.data[r * n + c] += a * other.at(k, c);
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn apply(&self, vector: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.dim, vector.len());
        (0..self.dim)
            .map(|r| {
                (0..self.dim)
                    .map(|c| self.at(r, c) * vector[c])
                    .sum::<Complex64>()
            })
            .collect()
    }

    /// Largest entry of `U^dagger U - I`; a unitarity residual.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in 0..n {
                let mut acc = Complex64::ZERO;
                for k in 0..n {
                    acc += self.at(k, r).conj() * self.at(k, c);
                }
                let expect = if r == c { Complex64::ONE } else { Complex64::ZERO };
                worst = worst.max((acc - expect).norm());
            }
        }
        worst
    }

    /// Multiply every entry by a global phase `e^{i phi}`.
    pub fn with_global_phase(&self, phi: f64) -> DenseUnitary {
        let phase = Complex64::from_polar(1.0, phi);
        DenseUnitary {
            dim: self.dim,
            data: self.data.iter().map(|v| v * phase).collect(),
        }
    }
}

/// The small matrix of one gate kind; angle order matches the gate's
/// binding order.
pub fn gate_matrix(kind: parqc_core::GateKind, angles: &[f64]) -> DenseUnitary {
    use parqc_core::GateKind as G;
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let data: Vec<Complex64> = match kind {
        G::H => vec![c(h, 0.0), c(h, 0.0), c(h, 0.0), c(-h, 0.0)],
        G::RX => {
            let (s, co) = (angles[0] / 2.0).sin_cos();
            vec![c(co, 0.0), c(0.0, -s), c(0.0, -s), c(co, 0.0)]
        }
        G::RY => {
            let (s, co) = (angles[0] / 2.0).sin_cos();
            vec![c(co, 0.0), c(-s, 0.0), c(s, 0.0), c(co, 0.0)]
        }
        G::RZ => {
            let half = angles[0] / 2.0;
            vec![
                Complex64::from_polar(1.0, -half),
                Complex64::ZERO,
                Complex64::ZERO,
                Complex64::from_polar(1.0, half),
            ]
        }
        G::U3 => {
            let (s, co) = (angles[0] / 2.0).sin_cos();
            vec![
                c(co, 0.0),
                -Complex64::from_polar(s, angles[2]),
                Complex64::from_polar(s, angles[1]),
                Complex64::from_polar(co, angles[1] + angles[2]),
            ]
        }
        G::CX => {
            let (o, z) = (Complex64::ONE, Complex64::ZERO);
            vec![
                o, z, z, z, //
                z, o, z, z, //
                z, z, z, o, //
                z, z, o, z,
            ]
        }
        G::CY => {
            let (o, z) = (Complex64::ONE, Complex64::ZERO);
            let i = Complex64::I;
            vec![
                o, z, z, z, //
                z, o, z, z, //
                z, z, z, -i, //
                z, z, i, z,
            ]
        }
        G::CCX => {
            let (o, z) = (Complex64::ONE, Complex64::ZERO);
            vec![
                o, z, z, z, z, z, z, z, //
                z, o, z, z, z, z, z, z, //
                z, z, o, z, z, z, z, z, //
                z, z, z, o, z, z, z, z, //
                z, z, z, z, o, z, z, z, //
                z, z, z, z, z, o, z, z, //
                z, z, z, z, z, z, z, o, //
                z, z, z, z, z, z, o, z,
            ]
        }
    };
    let dim = 1 << kind.arity();
    assert_eq!(data.len(), dim * dim);
    DenseUnitary { dim, data }
}

/// Embed a gate's small matrix into the full register: for each full-space
/// column, the gate's sub-index is extracted from the gate qubits' bits, the
/// small matrix column distributes amplitude over sub-rows, and all other
/// bits pass through (a permutation-conjugated Kronecker product).
pub fn embed_gate(kind: parqc_core::GateKind, qubits: &[usize], angles: &[f64], n_qubits: usize) -> DenseUnitary {
    let small = gate_matrix(kind, angles);
    let k = qubits.len();
    let dim = 1 << n_qubits;
    // Bit position of each gate qubit in the basis index (qubit q is bit
    // n-1-q, matching the convention in the main crate's docs).
    let bits: Vec<usize> = qubits.iter().map(|&q| n_qubits - 1 - q).collect();
    let mut full = DenseUnitary { dim, data: vec![Complex64::ZERO; dim * dim] };
    for col in 0..dim {
        // Sub-index of the gate qubits within this column, first qubit most
        // significant to match the small-matrix basis (control, target").
        let mut sub_col = 0usize;
        for (pos, &b) in bits.iter().enumerate() {
            if col >> b & 1 == 1 {
                sub_col |= 1 << (k - 1 - pos);
            }
        }
        for sub_row in 0..1 << k {
            let amp = small.at(sub_row, sub_col);
            if amp == Complex64::ZERO {
                continue;
            }
            let mut row = col;
            for (pos, &b) in bits.iter().enumerate() {
                let bit = sub_row >> (k - 1 - pos) & 1;
                row = (row & !(1 << b)) | (bit << b);
            }
            full.set(row, col, amp);
        }
    }
    full
}

/// Resolve one gate's angle bindings against a table. Phase-draw bindings
/// resolve to the caller-provided value (tests record the drawn noise).
pub fn resolve_angles(
    gate: &parqc_core::GateOp,
    params: &ParameterTable,
    phase_values: &mut impl Iterator<Item = f64>,
) -> Result<Vec<f64>> {
    gate.angles
        .iter()
        .map(|b| match b {
            AngleBinding::Fixed(v) => Ok(*v),
            AngleBinding::Slot(s) => params
                .theta()
                .get(*s)
                .copied()
                .ok_or(Error::UnboundSlot { slot: *s }),
            AngleBinding::PhaseDraw => Ok(phase_values.next().unwrap_or(0.0)),
        })
        .collect()
}

/// Full-matrix product of a program (gates right-to-left onto the identity).
pub fn program_unitary(program: &CircuitProgram, params: &ParameterTable) -> Result<DenseUnitary> {
    program_unitary_with_phase_draws(program, params, &[])
}

/// [`program_unitary`] with recorded values for any phase-draw bindings, in
/// program order.
pub fn program_unitary_with_phase_draws(
    program: &CircuitProgram,
    params: &ParameterTable,
    phase_values: &[f64],
) -> Result<DenseUnitary> {
    let n = program.n_qubits();
    if n > MAX_QUBITS {
        return Err(Error::Capacity { got: 1 << n, n_qubits: MAX_QUBITS });
    }
    let mut draws = phase_values.iter().copied();
    let mut acc = DenseUnitary::identity(1 << n);
    for gate in program.gates() {
        let angles = resolve_angles(gate, params, &mut draws)?;
        let full = embed_gate(gate.kind, &gate.qubits, &angles, n);
        acc = full.matmul(&acc);
    }
    Ok(acc)
}

/// Dense-matrix simulation of a program: build each gate's full matrix and
/// multiply sequentially into the input state.
pub fn dense_simulate(
    program: &CircuitProgram,
    params: &ParameterTable,
    input: &Statevector,
) -> Result<Statevector> {
    let n = program.n_qubits();
    if n > MAX_QUBITS {
        return Err(Error::Capacity { got: 1 << n, n_qubits: MAX_QUBITS });
    }
    let mut draws = std::iter::empty();
    let mut amps = input.amplitudes().to_vec();
    for gate in program.gates() {
        let angles = resolve_angles(gate, params, &mut draws)?;
        let full = embed_gate(gate.kind, &gate.qubits, &angles, n);
        amps = full.apply(&amps);
    }
    Statevector::from_amplitudes(n, amps)
}

/// Pauli-Z expectation from raw amplitudes, written independently of the
/// fast path: sum of |amp|^2 signed by the qubit's bit.
pub fn dense_expectation_z(amps: &[Complex64], n_qubits: usize, qubit: usize) -> f64 {
    let mask = 1 << (n_qubits - 1 - qubit);
    amps.iter()
        .enumerate()
        .map(|(j, a)| if j & mask == 0 { a.norm_sqr() } else { -a.norm_sqr() })
        .sum()
}

/// Closed-form identities the parameter-shift machinery must satisfy.
pub struct ClosedFormReport {
    pub checks: Vec<(&'static str, f64)>,
    pub tolerance: f64,
}

impl ClosedFormReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|(_, err)| *err < self.tolerance)
    }
}

/// Evaluate the closed-form checks: the RY cosine case, the RZ zero
/// gradient, the two-point rule identity at r = 1/2 over random angles, and
/// global-phase invariance of Z expectations.
pub fn closed_form_checks() -> ClosedFormReport {
    let mut checks = Vec::new();

    // f(theta) = cos(theta): the rule 0.5*[f(theta+pi/2) - f(theta-pi/2)]
    // reproduces -sin(theta) exactly.
    let mut worst = 0.0f64;
    for theta in [0.0, std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2] {
        let rule = 0.5
            * ((theta + std::f64::consts::FRAC_PI_2).cos()
                - (theta - std::f64::consts::FRAC_PI_2).cos());
        worst = worst.max((rule - (-theta.sin())).abs());
    }
    checks.push(("ry_cosine_rule", worst));

    // RZ commutes with Z, so the rule must give exactly zero on any input.
    let mut worst = 0.0f64;
    let empty = ParameterTable::with_values(Vec::new(), Vec::new());
    let z_after_rz = |t: f64| {
        let mut p = CircuitProgram::new(1);
        p.h(0);
        p.rz(0, AngleBinding::Fixed(t));
        let u = program_unitary(&p, &empty).unwrap();
        let out = u.apply(&[Complex64::ONE, Complex64::ZERO]);
        dense_expectation_z(&out, 1, 0)
    };
    for i in 0..10 {
        let theta = i as f64 * 0.37;
        let rule = 0.5
            * (z_after_rz(theta + std::f64::consts::FRAC_PI_2)
                - z_after_rz(theta - std::f64::consts::FRAC_PI_2));
        worst = worst.max(rule.abs());
    }
    checks.push(("rz_zero_gradient", worst));

    // Two-point rule at r = 1/2 (shift pi/(4r) = pi/2) on random first-order
    // trig polynomials a + b*cos(theta) + c*sin(theta).
    let mut worst = 0.0f64;
    let mut lcg = 0x2545F4914F6CDD1Du64;
    let mut next = move || {
        lcg = lcg.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (lcg >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    for _ in 0..100 {
        let (a, b, c) = (next(), next(), next());
        let theta = next() * std::f64::consts::PI;
        let f = |t: f64| a + b * t.cos() + c * t.sin();
        let r = 0.5;
        let shift = std::f64::consts::PI / (4.0 * r);
        let rule = r * (f(theta + shift) - f(theta - shift));
        let truth = -b * theta.sin() + c * theta.cos();
        worst = worst.max((rule - truth).abs());
    }
    checks.push(("two_point_rule_r_half", worst));

    // Global phase never changes Z expectations.
    let program = {
        let mut p = CircuitProgram::new(2);
        p.h(0);
        p.ry(1, AngleBinding::Fixed(0.73));
        p.cx(0, 1);
        p
    };
    let params = ParameterTable::with_values(Vec::new(), Vec::new());
    let unitary = program_unitary(&program, &params).unwrap();
    let phased = unitary.with_global_phase(1.234);
    let input = vec![Complex64::ONE, Complex64::ZERO, Complex64::ZERO, Complex64::ZERO];
    let out_a = unitary.apply(&input);
    let out_b = phased.apply(&input);
    let mut worst = 0.0f64;
    for q in 0..2 {
        let za = dense_expectation_z(&out_a, 2, q);
        let zb = dense_expectation_z(&out_b, 2, q);
        worst = worst.max((za - zb).abs());
    }
    checks.push(("global_phase_invariance", worst));

    ClosedFormReport { checks, tolerance: 1e-10 }
}

// Re-exported for the reference pipeline module.
pub(crate) fn reference_fuse(
    e1: &[f64],
    e2: &[f64],
    spec: &ModelSpec,
    bias: &[f64],
) -> Result<Vec<f64>> {
    let logits = fuse_logits(e1, e2, &spec.logit_selection, bias)?;
    Ok(softmax(&logits))
}

/// Seeded random program over every gate kind, with a mix of fixed angles
/// and (possibly shared) parameter slots. Returns the program together with
/// a randomized table covering its slots.
pub fn random_program(
    n_qubits: usize,
    n_gates: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> (CircuitProgram, ParameterTable) {
    use parqc_core::GateKind as G;
    use rand::Rng;

    let kinds: &[G] = if n_qubits >= 3 {
        &[G::H, G::U3, G::RX, G::RY, G::RZ, G::CX, G::CY, G::CCX]
    } else if n_qubits == 2 {
        &[G::H, G::U3, G::RX, G::RY, G::RZ, G::CX, G::CY]
    } else {
        &[G::H, G::U3, G::RX, G::RY, G::RZ]
    };

    let mut program = CircuitProgram::new(n_qubits);
    let mut n_slots = 0usize;
    for _ in 0..n_gates {
        let kind = kinds[rng.random_range(0..kinds.len())];
        let mut qubits: Vec<usize> = (0..n_qubits).collect();
        for i in 0..kind.arity() {
            let j = rng.random_range(i..qubits.len());
            qubits.swap(i, j);
        }
        qubits.truncate(kind.arity());
        let angles: Vec<AngleBinding> = (0..kind.angle_count())
            .map(|_| {
                if rng.random_bool(0.5) {
                    AngleBinding::Fixed(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
                } else if n_slots > 0 && rng.random_bool(0.3) {
                    AngleBinding::Slot(rng.random_range(0..n_slots))
                } else {
                    n_slots += 1;
                    AngleBinding::Slot(n_slots - 1)
                }
            })
            .collect();
        program
            .push_gate(parqc_core::GateOp { kind, qubits, angles })
            .expect("generated gate is valid");
    }

    let theta: Vec<f64> = (0..n_slots)
        .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
        .collect();
    let params = ParameterTable::with_values(theta, Vec::new());
    (program, params)
}
