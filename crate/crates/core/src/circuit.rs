//! Gate operations, circuit programs, and the program evaluation loop.
//!
//! A [`CircuitProgram`] is an ordered list of gates whose angles either carry
//! fixed values or reference trainable parameter slots. Evaluation resolves
//! bindings against a [`ParameterTable`],
//! optionally applying a single-occurrence shift override (for parameter-shift
//! gradients) and gate-level noise.

use std::fmt;

use crate::error::{Error, Result};
use crate::noise::GateNoise;
use crate::params::ParameterTable;
use crate::state::{apply_gate_unchecked, Statevector};

/// Supported gate kinds. Controls come before the target in the qubit list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GateKind {
    H,
    U3,
    RX,
    RY,
    RZ,
    CX,
    CY,
    CCX,
}

impl GateKind {
    /// Number of qubits the gate acts on.
    pub fn arity(self) -> usize {
        match self {
            GateKind::H | GateKind::U3 | GateKind::RX | GateKind::RY | GateKind::RZ => 1,
            GateKind::CX | GateKind::CY => 2,
            GateKind::CCX => 3,
        }
    }

    /// Number of rotation angles the gate takes.
    pub fn angle_count(self) -> usize {
        match self {
            GateKind::U3 => 3,
            GateKind::RX | GateKind::RY | GateKind::RZ => 1,
            _ => 0,
        }
    }

    /// True for gates with at least one angle.
    pub fn is_parameterized(self) -> bool {
        self.angle_count() > 0
    }

    /// True for the fixed multi-qubit entangling gates.
    pub fn is_entangling(self) -> bool {
        matches!(self, GateKind::CX | GateKind::CY | GateKind::CCX)
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::H => "H",
            GateKind::U3 => "U3",
            GateKind::RX => "RX",
            GateKind::RY => "RY",
            GateKind::RZ => "RZ",
            GateKind::CX => "CX",
            GateKind::CY => "CY",
            GateKind::CCX => "CCX",
        }
    }
}

/// How one gate angle gets its value at evaluation time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AngleBinding {
    /// Constant angle in radians.
    Fixed(f64),
    /// Reference to a trainable parameter slot (may be shared across gates).
    Slot(usize),
    /// Phase-noise placeholder: resolves to a fresh Gaussian draw when phase
    /// noise is active, 0.0 otherwise. Produced by
    /// [`inject_phase_noise`](crate::noise::inject_phase_noise).
    PhaseDraw,
}

/// One gate application: kind, qubit operands (controls first, target last),
/// and one binding per angle.
#[derive(Clone, Debug, PartialEq)]
pub struct GateOp {
    pub kind: GateKind,
    pub qubits: Vec<usize>,
    pub angles: Vec<AngleBinding>,
}

impl GateOp {
    pub fn new(kind: GateKind, qubits: Vec<usize>, angles: Vec<AngleBinding>) -> Result<Self> {
        let op = GateOp { kind, qubits, angles };
        op.check(usize::MAX)?;
        Ok(op)
    }

    fn check(&self, n_qubits: usize) -> Result<()> {
        if self.qubits.len() != self.kind.arity() {
            return Err(Error::Structural(format!(
                "{} expects {} qubits, got {}",
                self.kind.name(),
                self.kind.arity(),
                self.qubits.len()
            )));
        }
        if self.angles.len() != self.kind.angle_count() {
            return Err(Error::Structural(format!(
                "{} expects {} angles, got {}",
                self.kind.name(),
                self.kind.angle_count(),
                self.angles.len()
            )));
        }
        for (i, &q) in self.qubits.iter().enumerate() {
            if q >= n_qubits {
                return Err(Error::Structural(format!(
                    "qubit {q} out of range (register size {n_qubits})"
                )));
            }
            if self.qubits[..i].contains(&q) {
                return Err(Error::Structural(format!("duplicate qubit {q} in gate")));
            }
        }
        Ok(())
    }
}

/// Ordered gate list over a fixed register size. Immutable once built;
/// freely shareable across parallel evaluations.
#[derive(Clone, Debug, PartialEq)]
pub struct CircuitProgram {
    n_qubits: usize,
    gates: Vec<GateOp>,
}

impl CircuitProgram {
    pub fn new(n_qubits: usize) -> Self {
        assert!(n_qubits >= 1);
        CircuitProgram { n_qubits, gates: Vec::new() }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn gates(&self) -> &[GateOp] {
        &self.gates
    }

    /// Validated append for externally constructed gates.
    pub fn push_gate(&mut self, op: GateOp) -> Result<()> {
        op.check(self.n_qubits)?;
        self.gates.push(op);
        Ok(())
    }

    fn push(&mut self, kind: GateKind, qubits: &[usize], angles: &[AngleBinding]) {
        let op = GateOp {
            kind,
            qubits: qubits.to_vec(),
            angles: angles.to_vec(),
        };
        op.check(self.n_qubits).expect("builder produced invalid gate");
        self.gates.push(op);
    }

    pub fn h(&mut self, q: usize) {
        self.push(GateKind::H, &[q], &[]);
    }

    pub fn u3(&mut self, q: usize, a0: AngleBinding, a1: AngleBinding, a2: AngleBinding) {
        self.push(GateKind::U3, &[q], &[a0, a1, a2]);
    }

    pub fn rx(&mut self, q: usize, a: AngleBinding) {
        self.push(GateKind::RX, &[q], &[a]);
    }

    pub fn ry(&mut self, q: usize, a: AngleBinding) {
        self.push(GateKind::RY, &[q], &[a]);
    }

    pub fn rz(&mut self, q: usize, a: AngleBinding) {
        self.push(GateKind::RZ, &[q], &[a]);
    }

    pub fn cx(&mut self, control: usize, target: usize) {
        self.push(GateKind::CX, &[control, target], &[]);
    }

    pub fn cy(&mut self, control: usize, target: usize) {
        self.push(GateKind::CY, &[control, target], &[]);
    }

    pub fn ccx(&mut self, control_a: usize, control_b: usize, target: usize) {
        self.push(GateKind::CCX, &[control_a, control_b, target], &[]);
    }

    /// Highest slot index referenced, if any slot bindings exist.
    pub fn max_slot(&self) -> Option<usize> {
        self.gates
            .iter()
            .flat_map(|g| &g.angles)
            .filter_map(|b| match b {
                AngleBinding::Slot(s) => Some(*s),
                _ => None,
            })
            .max()
    }

    /// Every (gate index, angle position) pair bound to `slot`.
    pub fn occurrences_of(&self, slot: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (gi, gate) in self.gates.iter().enumerate() {
            for (ai, binding) in gate.angles.iter().enumerate() {
                if *binding == AngleBinding::Slot(slot) {
                    out.push((gi, ai));
                }
            }
        }
        out
    }

    fn validate(&self, params: &ParameterTable) -> Result<()> {
        for gate in &self.gates {
            gate.check(self.n_qubits)?;
            for binding in &gate.angles {
                if let AngleBinding::Slot(s) = binding {
                    if *s >= params.theta().len() {
                        return Err(Error::UnboundSlot { slot: *s });
                    }
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for CircuitProgram {
    /// One gate per line: kind, qubits, angle bindings. Used for debugging
    /// and golden-file tests.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for gate in &self.gates {
            write!(f, "{}", gate.kind.name())?;
            for q in &gate.qubits {
                write!(f, " q{q}")?;
            }
            for binding in &gate.angles {
                match binding {
                    AngleBinding::Fixed(v) => write!(f, " fixed:{v}")?,
                    AngleBinding::Slot(s) => write!(f, " slot:{s}")?,
                    AngleBinding::PhaseDraw => write!(f, " phase-draw")?,
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Shift one specific angle occurrence by `delta` during a single evaluation,
/// leaving the parameter table untouched.
#[derive(Clone, Copy, Debug)]
pub struct ShiftOverride {
    pub gate: usize,
    pub angle: usize,
    pub delta: f64,
}

/// Per-evaluation context: at most one shift override plus optional
/// gate-level noise. Each evaluation owns its noise stream.
#[derive(Default)]
pub struct EvalContext<'a> {
    pub shift: Option<ShiftOverride>,
    pub noise: Option<&'a mut GateNoise>,
}

impl<'a> EvalContext<'a> {
    pub fn shifted(gate: usize, angle: usize, delta: f64) -> Self {
        EvalContext {
            shift: Some(ShiftOverride { gate, angle, delta }),
            noise: None,
        }
    }

    pub fn noisy(noise: &'a mut GateNoise) -> Self {
        EvalContext { shift: None, noise: Some(noise) }
    }
}

/// Run `program` on a copy of `input`, resolving parameter bindings from
/// `params`. Gates are applied in program order; the norm is preserved to
/// simulation precision.
pub fn run_circuit(
    program: &CircuitProgram,
    params: &ParameterTable,
    input: &Statevector,
) -> Result<Statevector> {
    run_circuit_with(program, params, input, &mut EvalContext::default())
}

/// [`run_circuit`] with an explicit evaluation context.
pub fn run_circuit_with(
    program: &CircuitProgram,
    params: &ParameterTable,
    input: &Statevector,
    ctx: &mut EvalContext<'_>,
) -> Result<Statevector> {
    if program.n_qubits != input.n_qubits() {
        return Err(Error::Structural(format!(
            "program register size {} does not match state size {}",
            program.n_qubits,
            input.n_qubits()
        )));
    }
    program.validate(params)?;

    let mut state = input.clone();
    let theta = params.theta();
    let mut buf = [0.0f64; 3];
    for (gi, gate) in program.gates.iter().enumerate() {
        let n_angles = gate.angles.len();
        let mut has_phase_draw = false;
        for (ai, binding) in gate.angles.iter().enumerate() {
            buf[ai] = match binding {
                AngleBinding::Fixed(v) => *v,
                AngleBinding::Slot(s) => theta[*s],
                AngleBinding::PhaseDraw => {
                    has_phase_draw = true;
                    match ctx.noise.as_deref_mut() {
                        Some(noise) => noise.draw_phase(),
                        None => 0.0,
                    }
                }
            };
            if let Some(shift) = ctx.shift {
                if shift.gate == gi && shift.angle == ai {
                    buf[ai] += shift.delta;
                }
            }
        }
        // Gate noise perturbs real rotation angles; phase-draw angles already
        // are the noise and are left alone.
        if gate.kind.is_parameterized() && !has_phase_draw {
            if let Some(noise) = ctx.noise.as_deref_mut() {
                noise.perturb_angles(&mut buf[..n_angles]);
            }
        }
        apply_gate_unchecked(&mut state, gate.kind, &gate.qubits, &buf[..n_angles]);
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{amplitude_encode, expectation_z};
    use num_complex::Complex64;

    fn empty_params() -> ParameterTable {
        ParameterTable::with_values(Vec::new(), Vec::new())
    }

    #[test]
    fn empty_program_is_identity() {
        let input = amplitude_encode(&[1.0, 2.0, 3.0, 4.0], 2).unwrap();
        let out = run_circuit(&CircuitProgram::new(2), &empty_params(), &input).unwrap();
        assert_eq!(out, input);
    }

    #[test]
    fn hadamard_pair_gives_uniform_amplitudes() {
        let mut program = CircuitProgram::new(2);
        program.h(0);
        program.h(1);
        let out = run_circuit(&program, &empty_params(), &Statevector::zero_state(2)).unwrap();
        for a in out.amplitudes() {
            assert!((a - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn unresolved_slot_is_a_binding_error() {
        let mut program = CircuitProgram::new(1);
        program.rx(0, AngleBinding::Slot(7));
        let err = run_circuit(&program, &empty_params(), &Statevector::zero_state(1));
        assert!(matches!(err, Err(Error::UnboundSlot { slot: 7 })));
    }

    #[test]
    fn register_size_mismatch_rejected() {
        let program = CircuitProgram::new(3);
        let err = run_circuit(&program, &empty_params(), &Statevector::zero_state(2));
        assert!(matches!(err, Err(Error::Structural(_))));
    }

    #[test]
    fn shift_override_changes_one_occurrence_only() {
        // RX(theta) twice on the same slot; shifting one occurrence must
        // differ from shifting the shared value.
        let mut program = CircuitProgram::new(1);
        program.ry(0, AngleBinding::Slot(0));
        program.ry(0, AngleBinding::Slot(0));
        let params = ParameterTable::with_values(vec![0.3], Vec::new());
        let input = Statevector::zero_state(1);

        let plain = run_circuit(&program, &params, &input).unwrap();
        let z_plain = expectation_z(&plain, 0).unwrap();
        assert!((z_plain - (0.6f64).cos()).abs() < 1e-12);

        let mut ctx = EvalContext::shifted(0, 0, 0.5);
        let shifted = run_circuit_with(&program, &params, &input, &mut ctx).unwrap();
        let z_shifted = expectation_z(&shifted, 0).unwrap();
        assert!((z_shifted - (1.1f64).cos()).abs() < 1e-12);
    }

    #[test]
    fn display_lists_one_gate_per_line() {
        let mut program = CircuitProgram::new(2);
        program.h(0);
        program.u3(
            1,
            AngleBinding::Slot(0),
            AngleBinding::Slot(1),
            AngleBinding::Fixed(0.5),
        );
        program.cx(0, 1);
        let text = program.to_string();
        assert_eq!(text, "H q0\nU3 q1 slot:0 slot:1 fixed:0.5\nCX q0 q1\n");
    }

    #[test]
    fn gate_op_validation() {
        assert!(GateOp::new(GateKind::CX, vec![0, 0], vec![]).is_err());
        assert!(GateOp::new(GateKind::RX, vec![0], vec![]).is_err());
        assert!(GateOp::new(GateKind::H, vec![0], vec![]).is_ok());
    }
}
