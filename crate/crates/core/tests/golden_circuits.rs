//! Golden-file checks of the circuit text form.

use parqc_core::ansatz::{build_pqc1, build_pqc2};

#[test]
fn pqc1_text_form_matches_golden_file() {
    let program = build_pqc1(3, 1).unwrap();
    let golden = include_str!("golden/pqc1_n3_l1.txt");
    assert_eq!(program.to_string(), golden);
}

#[test]
fn pqc2_text_form_matches_golden_file() {
    let program = build_pqc2(3, 1).unwrap();
    let golden = include_str!("golden/pqc2_n3_l1.txt");
    assert_eq!(program.to_string(), golden);
}
