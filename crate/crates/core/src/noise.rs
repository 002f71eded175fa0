//! Seeded Gaussian pixel noise and gate-level noise injection.
//!
//! Three independent modes, all off by default:
//! - `pixel`: adds `pixel_factor * N(0, pixel_sigma^2)` to every pixel once
//!   at dataset preparation, clamped back to [0, 1];
//! - `gate`: adds `N(0, gate_sigma^2)` to every rotation angle, freshly drawn
//!   per gate application per circuit evaluation;
//! - `phase`: inserts an RZ on the target qubit after every CX/CY/CCX, with
//!   an angle drawn from `N(0, phase_sigma^2)` at evaluation time.
//!
//! With every mode disabled the pipeline is bit-identical to the noiseless
//! one: no draw is made and no program is rewritten.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::circuit::{AngleBinding, CircuitProgram, GateOp};

/// Which noise injections are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    Pixel,
    Gate,
    Phase,
}

/// Noise settings; part of the run configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub pixel_sigma: f64,
    pub pixel_factor: f64,
    pub gate_sigma: f64,
    pub phase_sigma: f64,
    pub modes: Vec<NoiseMode>,
    pub seed: Option<u64>,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            pixel_sigma: 0.01,
            pixel_factor: 0.5,
            gate_sigma: 0.01,
            phase_sigma: 0.01,
            modes: Vec::new(),
            seed: None,
        }
    }
}

impl NoiseConfig {
    pub fn pixel_enabled(&self) -> bool {
        self.modes.contains(&NoiseMode::Pixel)
    }

    pub fn gate_enabled(&self) -> bool {
        self.modes.contains(&NoiseMode::Gate)
    }

    pub fn phase_enabled(&self) -> bool {
        self.modes.contains(&NoiseMode::Phase)
    }

    /// True when any mode affects circuit evaluation.
    pub fn circuit_noise_enabled(&self) -> bool {
        self.gate_enabled() || self.phase_enabled()
    }

    pub fn validate(&self) -> crate::Result<()> {
        if self.pixel_sigma < 0.0
            || self.pixel_factor < 0.0
            || self.gate_sigma < 0.0
            || self.phase_sigma < 0.0
        {
            return Err(crate::Error::Config(
                "noise sigmas and factor must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// One Gaussian draw with standard deviation `sigma`. A non-positive sigma
/// returns 0.0 without consuming the generator, so disabled modes stay
/// bit-identical to the noiseless path.
pub fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma).expect("sigma validated").sample(rng)
}

/// Per-evaluation gate-noise state. Owned by exactly one circuit evaluation;
/// parallel evaluations derive independent streams (see [`crate::rng`]).
pub struct GateNoise {
    gate_sigma: f64,
    phase_sigma: f64,
    rng: ChaCha8Rng,
}

impl GateNoise {
    pub fn new(config: &NoiseConfig, rng: ChaCha8Rng) -> Self {
        GateNoise {
            gate_sigma: if config.gate_enabled() { config.gate_sigma } else { 0.0 },
            phase_sigma: if config.phase_enabled() { config.phase_sigma } else { 0.0 },
            rng,
        }
    }

    /// Perturb a resolved rotation-angle slice in place.
    pub fn perturb_angles(&mut self, angles: &mut [f64]) {
        if self.gate_sigma <= 0.0 {
            return;
        }
        for a in angles {
            *a += gaussian(&mut self.rng, self.gate_sigma);
        }
    }

    /// Angle for one injected phase-noise RZ.
    pub fn draw_phase(&mut self) -> f64 {
        gaussian(&mut self.rng, self.phase_sigma)
    }
}

/// Add scaled Gaussian noise to a flattened image in place, clamping the
/// result to [0, 1]: `pixel <- clamp(pixel + pixel_factor * g, 0, 1)` with
/// `g ~ N(0, pixel_sigma^2)`. Deterministic for a fixed generator state.
pub fn add_pixel_noise(image: &mut [f64], config: &NoiseConfig, rng: &mut ChaCha8Rng) {
    if config.pixel_factor == 0.0 || config.pixel_sigma == 0.0 {
        return;
    }
    for v in image {
        *v = (*v + config.pixel_factor * gaussian(rng, config.pixel_sigma)).clamp(0.0, 1.0);
    }
}

/// Add `N(0, gate_sigma^2)` to each resolved angle of a parameterized gate.
/// The run loop uses [`GateNoise::perturb_angles`]; this standalone form
/// mirrors it for direct use in tests and tools.
pub fn perturb_gate_angles(
    angles: &mut [f64],
    kind: crate::circuit::GateKind,
    config: &NoiseConfig,
    rng: &mut ChaCha8Rng,
) {
    debug_assert!(kind.is_parameterized());
    if !config.gate_enabled() || config.gate_sigma <= 0.0 {
        return;
    }
    for a in angles.iter_mut().take(kind.angle_count()) {
        *a += gaussian(rng, config.gate_sigma);
    }
}

/// Rewrite a program so that every CX/CY/CCX is followed by an RZ on its
/// target qubit whose angle is drawn at evaluation time. With phase noise
/// disabled the inserted gates resolve to RZ(0), leaving the state exactly
/// unchanged.
pub fn inject_phase_noise(program: &CircuitProgram) -> CircuitProgram {
    let mut out = CircuitProgram::new(program.n_qubits());
    for gate in program.gates() {
        let target = gate.qubits.last().copied();
        let entangling = gate.kind.is_entangling();
        out.push_gate(gate.clone()).expect("source program is valid");
        if entangling {
            let rz = GateOp {
                kind: crate::circuit::GateKind::RZ,
                qubits: vec![target.expect("entangling gate has a target")],
                angles: vec![AngleBinding::PhaseDraw],
            };
            out.push_gate(rz).expect("rz on existing qubit is valid");
        }
    }
    out
}
