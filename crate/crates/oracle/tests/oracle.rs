//! Self-checks of the dense reference machinery.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use parqc_core::circuit::{AngleBinding, CircuitProgram};
use parqc_core::params::ParameterTable;
use parqc_core::GateKind;
use parqc_oracle::{
    closed_form_checks, dense_simulate, embed_gate, gate_matrix, program_unitary, random_program,
    DenseUnitary,
};

#[test]
fn every_gate_matrix_is_unitary() {
    let cases: Vec<(GateKind, Vec<f64>)> = vec![
        (GateKind::H, vec![]),
        (GateKind::RX, vec![0.73]),
        (GateKind::RY, vec![-1.21]),
        (GateKind::RZ, vec![2.5]),
        (GateKind::U3, vec![0.4, -0.9, 1.7]),
        (GateKind::CX, vec![]),
        (GateKind::CY, vec![]),
        (GateKind::CCX, vec![]),
    ];
    for (kind, angles) in cases {
        let m = gate_matrix(kind, &angles);
        assert!(
            m.unitarity_defect() < 1e-10,
            "{kind:?} defect {}",
            m.unitarity_defect()
        );
    }
}

#[test]
fn embedded_gates_stay_unitary() {
    for n in 1..=3usize {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..350 {
            let (program, params) = random_program(n, 6, &mut rng);
            let u = program_unitary(&program, &params).unwrap();
            assert!(u.unitarity_defect() < 1e-10);
        }
    }
}

#[test]
fn cx_full_matrix_for_two_qubits() {
    // control = qubit 0, target = qubit 1: the |10>,|11> block swaps.
    let full = embed_gate(GateKind::CX, &[0, 1], &[], 2);
    let (o, z) = (Complex64::ONE, Complex64::ZERO);
    let expect = [
        [o, z, z, z],
        [z, o, z, z],
        [z, z, z, o],
        [z, z, o, z],
    ];
    for (r, row) in expect.iter().enumerate() {
        for (c, want) in row.iter().enumerate() {
            assert_eq!(full.at(r, c), *want, "entry ({r},{c})");
        }
    }
}

#[test]
fn identity_program_gives_identity_matrix() {
    let program = CircuitProgram::new(2);
    let params = ParameterTable::with_values(Vec::new(), Vec::new());
    let u = program_unitary(&program, &params).unwrap();
    assert_eq!(u, DenseUnitary::identity(4));
}

#[test]
fn dense_simulation_of_bell_pair() {
    let mut program = CircuitProgram::new(2);
    program.h(0);
    program.cx(0, 1);
    let params = ParameterTable::with_values(Vec::new(), Vec::new());
    let input = parqc_core::Statevector::zero_state(2);
    let out = dense_simulate(&program, &params, &input).unwrap();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    assert!((out.amplitudes()[0] - Complex64::new(r, 0.0)).norm() < 1e-12);
    assert!(out.amplitudes()[1].norm() < 1e-12);
    assert!(out.amplitudes()[2].norm() < 1e-12);
    assert!((out.amplitudes()[3] - Complex64::new(r, 0.0)).norm() < 1e-12);
}

#[test]
fn oversized_registers_are_rejected() {
    let program = CircuitProgram::new(4);
    let params = ParameterTable::with_values(Vec::new(), Vec::new());
    let input = parqc_core::Statevector::zero_state(4);
    assert!(dense_simulate(&program, &params, &input).is_err());
}

#[test]
fn closed_form_report_passes() {
    let report = closed_form_checks();
    for (name, err) in &report.checks {
        assert!(*err < report.tolerance, "{name}: residual {err}");
    }
    assert!(report.all_pass());
}

#[test]
fn u3_angle_shift_changes_only_that_angle() {
    // The dense path resolves bindings through the table just like the fast
    // path; sanity-check slot resolution.
    let mut program = CircuitProgram::new(1);
    program.u3(0, AngleBinding::Slot(0), AngleBinding::Slot(1), AngleBinding::Slot(2));
    let params = ParameterTable::with_values(vec![0.2, 0.4, 0.6], Vec::new());
    let base = program_unitary(&program, &params).unwrap();
    let direct = gate_matrix(GateKind::U3, &[0.2, 0.4, 0.6]);
    for r in 0..2 {
        for c in 0..2 {
            assert!((base.at(r, c) - direct.at(r, c)).norm() < 1e-15);
        }
    }
}
