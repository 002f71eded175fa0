//! Property tests for the simulation and classical-head invariants.

use proptest::prelude::*;

use parqc_core::circuit::run_circuit;
use parqc_core::gradient::argmax;
use parqc_core::head::softmax;
use parqc_core::noise::{add_pixel_noise, NoiseConfig, NoiseMode};
use parqc_core::state::{amplitude_encode, expectation_z, expectations_all};
use parqc_oracle::random_program;

proptest! {
    #[test]
    fn encoding_always_has_unit_norm(
        features in proptest::collection::vec(-100.0f64..100.0, 1..16),
        n_qubits in 1usize..=4,
    ) {
        prop_assume!(features.len() <= 1 << n_qubits);
        prop_assume!(features.iter().any(|&x| x != 0.0));
        let sv = amplitude_encode(&features, n_qubits).unwrap();
        prop_assert!((sv.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn programs_preserve_norm_and_bound_expectations(seed in 0u64..5000) {
        let mut rng = parqc_core::rng::derive_rng(seed, &[]);
        use rand::Rng;
        let n = rng.random_range(1..=4usize);
        let len = rng.random_range(0..30usize);
        let (program, params) = random_program(n, len, &mut rng);
        let features: Vec<f64> = (0..1 << n).map(|_| rng.random_range(-1.0..1.0)).collect();
        prop_assume!(features.iter().any(|&x| x != 0.0));
        let input = amplitude_encode(&features, n).unwrap();
        let out = run_circuit(&program, &params, &input).unwrap();
        prop_assert!((out.norm() - 1.0).abs() < 1e-10);
        for q in 0..n {
            let z = expectation_z(&out, q).unwrap();
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&z));
        }
        let all = expectations_all(&out);
        for (q, z) in all.iter().enumerate() {
            prop_assert!((z - expectation_z(&out, q).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_is_a_distribution_preserving_argmax(
        logits in proptest::collection::vec(-50.0f64..50.0, 2..8),
    ) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&x| x > 0.0));
        prop_assert_eq!(argmax(&p), argmax(&logits));
    }

    #[test]
    fn pixel_noise_keeps_the_unit_interval(
        pixels in proptest::collection::vec(0.0f64..=1.0, 1..64),
        seed in 0u64..1000,
        factor in 0.0f64..2.0,
    ) {
        let cfg = NoiseConfig {
            pixel_factor: factor,
            pixel_sigma: 0.3,
            modes: vec![NoiseMode::Pixel],
            ..NoiseConfig::default()
        };
        let mut noisy = pixels.clone();
        add_pixel_noise(&mut noisy, &cfg, &mut parqc_core::rng::derive_rng(seed, &[]));
        prop_assert!(noisy.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn encoding_is_idempotent_on_unit_vectors(
        raw in proptest::collection::vec(-1.0f64..1.0, 4),
    ) {
        prop_assume!(raw.iter().any(|&x| x.abs() > 1e-3));
        let norm: f64 = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
        let unit: Vec<f64> = raw.iter().map(|x| x / norm).collect();
        let sv = amplitude_encode(&unit, 2).unwrap();
        for (a, &x) in sv.amplitudes().iter().zip(&unit) {
            prop_assert!((a.re - x).abs() < 1e-12);
            prop_assert_eq!(a.im, 0.0);
        }
    }
}
