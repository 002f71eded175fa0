//! Parameter-shift-rule differentiation with shared-parameter accumulation,
//! plus a central finite-difference reference.
//!
//! A shared slot feeds several gate angles; its derivative is the sum over
//! occurrences of the two-point shift rule applied to that occurrence alone
//! (the product rule). Occurrence shifting happens through evaluation-time
//! angle overrides, never by rewriting programs or mutating the nominal
//! parameter table. All shift evaluations for a batch are read-only over the
//! program and table, own private state vectors, and reduce in a fixed
//! order, so results are identical across thread counts.

use rayon::prelude::*;

use crate::circuit::{run_circuit_with, CircuitProgram, EvalContext, ShiftOverride};
use crate::data::Sample;
use crate::error::{Error, Result};
use crate::head::cross_entropy;
use crate::params::ParameterTable;
use crate::state::{amplitude_encode, expectation_z, Statevector};
use crate::trainer::{EvalPurpose, Model, NoiseStreams};

/// Shift distance for generators with eigenvalues +-1/2 (phase constant
/// r = 1/2): pi / (4r) = pi/2.
pub const SHIFT: f64 = std::f64::consts::FRAC_PI_2;

/// Inputs for differentiating one circuit's expectations.
pub struct GradientRequest<'a> {
    pub program: &'a CircuitProgram,
    pub params: &'a ParameterTable,
    pub input: &'a Statevector,
    pub observable_qubits: Vec<usize>,
}

impl GradientRequest<'_> {
    fn validate(&self) -> Result<()> {
        for &q in &self.observable_qubits {
            if q >= self.program.n_qubits() {
                return Err(Error::Structural(format!(
                    "observable qubit {q} out of range for {}-qubit program",
                    self.program.n_qubits()
                )));
            }
        }
        Ok(())
    }
}

fn expectations_with(
    program: &CircuitProgram,
    params: &ParameterTable,
    input: &Statevector,
    qubits: &[usize],
    ctx: &mut EvalContext<'_>,
) -> Result<Vec<f64>> {
    let out = run_circuit_with(program, params, input, ctx)?;
    qubits.iter().map(|&q| expectation_z(&out, q)).collect()
}

/// d<Z_k>/d theta_slot via the parameter-shift rule, one entry per
/// observable qubit. For each occurrence of the slot, the expectations are
/// evaluated with that single occurrence shifted by +-pi/2 and combined as
/// (f(+) - f(-)) / 2; occurrence terms are summed.
pub fn shift_rule_grad(request: &GradientRequest<'_>, slot: usize) -> Result<Vec<f64>> {
    request.validate()?;
    if slot >= request.params.n_slots() {
        return Err(Error::UnboundSlot { slot });
    }
    let occurrences = request.program.occurrences_of(slot);
    let jobs: Vec<ShiftOverride> = occurrences
        .iter()
        .flat_map(|&(gate, angle)| {
            [
                ShiftOverride { gate, angle, delta: SHIFT },
                ShiftOverride { gate, angle, delta: -SHIFT },
            ]
        })
        .collect();
    // Independent evaluations in parallel; the ordered collect fixes the
    // reduction order.
    let evals: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&shift| {
            let mut ctx = EvalContext { shift: Some(shift), noise: None };
            expectations_with(
                request.program,
                request.params,
                request.input,
                &request.observable_qubits,
                &mut ctx,
            )
        })
        .collect::<Result<_>>()?;

    let mut grad = vec![0.0; request.observable_qubits.len()];
    for pair in evals.chunks_exact(2) {
        for (g, (plus, minus)) in grad.iter_mut().zip(pair[0].iter().zip(&pair[1])) {
            *g += 0.5 * (plus - minus);
        }
    }
    Ok(grad)
}

/// Central finite difference on the slot's shared value:
/// (f(theta + h) - f(theta - h)) / (2h).
pub fn finite_diff_grad(request: &GradientRequest<'_>, slot: usize, h: f64) -> Result<Vec<f64>> {
    request.validate()?;
    if slot >= request.params.n_slots() {
        return Err(Error::UnboundSlot { slot });
    }
    if h <= 0.0 {
        return Err(Error::Usage("finite-difference step must be positive".into()));
    }
    let mut plus = request.params.clone();
    plus.theta_mut()[slot] += h;
    let mut minus = request.params.clone();
    minus.theta_mut()[slot] -= h;
    let f_plus = expectations_with(
        request.program,
        &plus,
        request.input,
        &request.observable_qubits,
        &mut EvalContext::default(),
    )?;
    let f_minus = expectations_with(
        request.program,
        &minus,
        request.input,
        &request.observable_qubits,
        &mut EvalContext::default(),
    )?;
    Ok(f_plus
        .iter()
        .zip(&f_minus)
        .map(|(p, m)| (p - m) / (2.0 * h))
        .collect())
}

/// Gradient of the batch loss plus bookkeeping from the same forward passes.
#[derive(Clone, Debug)]
pub struct BatchGradient {
    /// d loss / d (theta ++ bias), averaged over the batch, including the
    /// 2*lambda*theta regularization term.
    pub gradient: Vec<f64>,
    /// Mean per-sample loss (cross-entropy plus L2 penalty).
    pub mean_loss: f64,
    /// Argmax class per sample, from the pre-update forward passes.
    pub predictions: Vec<usize>,
}

/// Batch loss gradient by the chain rule: the analytic softmax/cross-entropy
/// identity d C / d logit_c = p_c - y_c multiplies shift-rule derivatives of
/// each selected logit with respect to the slots of its owning circuit; the
/// bias gradient is p - y; the L2 term contributes 2*lambda*theta.
pub fn loss_grad(
    batch: &[&Sample],
    params: &ParameterTable,
    model: &Model,
    lambda: f64,
    streams: &NoiseStreams<'_>,
) -> Result<BatchGradient> {
    if batch.is_empty() {
        return Err(Error::Usage("cannot take a gradient over an empty batch".into()));
    }
    let spec = &model.spec;
    let n_slots = params.n_slots();
    let n_classes = spec.n_classes;

    // Selected (class, qubit) pairs per circuit.
    let mut selected: [Vec<(usize, usize)>; 2] = [Vec::new(), Vec::new()];
    for class in 0..n_classes {
        let (circuit, qubit) = spec.class_source(class);
        selected[circuit].push((class, qubit));
    }

    let per_sample: Vec<(Vec<f64>, f64, usize)> = batch
        .par_iter()
        .enumerate()
        .map(|(si, sample)| sample_grad(si as u64, sample, params, model, &selected, lambda, streams))
        .collect::<Result<_>>()?;

    // Deterministic reduction in sample order.
    let mut gradient = vec![0.0; n_slots + n_classes];
    let mut loss_sum = 0.0;
    let mut predictions = Vec::with_capacity(batch.len());
    for (g, loss, pred) in per_sample {
        for (acc, v) in gradient.iter_mut().zip(&g) {
            *acc += v;
        }
        loss_sum += loss;
        predictions.push(pred);
    }
    let scale = 1.0 / batch.len() as f64;
    gradient.iter_mut().for_each(|g| *g *= scale);
    // L2 term over circuit parameters only; the bias is exempt.
    for (g, t) in gradient.iter_mut().zip(params.theta()) {
        *g += 2.0 * lambda * t;
    }
    Ok(BatchGradient {
        gradient,
        mean_loss: loss_sum * scale,
        predictions,
    })
}

/// One sample's (un-averaged) gradient, loss, and prediction.
fn sample_grad(
    sample_idx: u64,
    sample: &Sample,
    params: &ParameterTable,
    model: &Model,
    selected: &[Vec<(usize, usize)>; 2],
    lambda: f64,
    streams: &NoiseStreams<'_>,
) -> Result<(Vec<f64>, f64, usize)> {
    let spec = &model.spec;
    let input = amplitude_encode(&sample.features, spec.n_qubits)?;
    let probs = model.probabilities(params, &input, streams, sample_idx)?;
    let residual: Vec<f64> = probs
        .iter()
        .zip(&sample.one_hot)
        .map(|(p, y)| p - y)
        .collect();

    let n_slots = params.n_slots();
    let mut grad = vec![0.0; n_slots + spec.n_classes];
    for (circuit, selected_here) in selected.iter().enumerate() {
        if selected_here.is_empty() {
            continue;
        }
        let qubits: Vec<usize> = selected_here.iter().map(|&(_, q)| q).collect();
        let program = &model.programs[circuit];

        // Every occurrence of every slot of this circuit, in slot order.
        let jobs: Vec<(usize, usize, usize)> = (0..n_slots)
            .flat_map(|slot| {
                params
                    .occurrences(slot)
                    .expect("slot in range")
                    .iter()
                    .filter(|o| o.circuit == circuit)
                    .map(move |o| (slot, o.gate, o.angle))
                    .collect::<Vec<_>>()
            })
            .collect();

        let evals: Vec<(usize, Vec<f64>, Vec<f64>)> = jobs
            .par_iter()
            .map(|&(slot, gate, angle)| {
                let run = |delta: f64, sign: u64| -> Result<Vec<f64>> {
                    let mut noise = streams.gate_noise(
                        sample_idx,
                        circuit as u64,
                        EvalPurpose::shift(gate, angle, sign),
                    );
                    let mut ctx = EvalContext {
                        shift: Some(ShiftOverride { gate, angle, delta }),
                        noise: noise.as_mut(),
                    };
                    expectations_with(program, params, &input, &qubits, &mut ctx)
                };
                Ok((slot, run(SHIFT, 0)?, run(-SHIFT, 1)?))
            })
            .collect::<Result<_>>()?;

        for (slot, plus, minus) in evals {
            for (k, &(class, _)) in selected_here.iter().enumerate() {
                grad[slot] += residual[class] * 0.5 * (plus[k] - minus[k]);
            }
        }
    }
    for (c, &r) in residual.iter().enumerate() {
        grad[n_slots + c] = r;
    }

    let loss = cross_entropy(&probs, &sample.one_hot, params.theta(), lambda);
    let prediction = argmax(&probs);
    Ok((grad, loss, prediction))
}

/// Index of the largest value; ties break toward the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// End-to-end finite difference of the mean batch loss with respect to one
/// flattened parameter (theta then bias). Test oracle for [`loss_grad`].
pub fn finite_diff_loss(
    batch: &[&Sample],
    params: &ParameterTable,
    model: &Model,
    lambda: f64,
    flat_index: usize,
    h: f64,
) -> Result<f64> {
    let eval = |table: &ParameterTable| -> Result<f64> {
        let mut total = 0.0;
        for sample in batch {
            let input = amplitude_encode(&sample.features, model.spec.n_qubits)?;
            let probs = model.probabilities(table, &input, &NoiseStreams::disabled(), 0)?;
            total += cross_entropy(&probs, &sample.one_hot, table.theta(), lambda);
        }
        Ok(total / batch.len() as f64)
    };
    let mut plus = params.clone();
    let mut minus = params.clone();
    {
        let mut flat = plus.flatten();
        flat[flat_index] += h;
        plus.assign_flat(&flat)?;
        let mut flat = minus.flatten();
        flat[flat_index] -= h;
        minus.assign_flat(&flat)?;
    }
    Ok((eval(&plus)? - eval(&minus)?) / (2.0 * h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::AngleBinding;
    use crate::params::ParameterTable;
    use crate::rng::derive_rng;
    use crate::state::Statevector;
    use crate::trainer::TrainingConfig;

    #[test]
    fn ry_gradient_matches_analytic_form() {
        // <Z> of RY(theta)|0> is cos(theta); the rule must give -sin(theta).
        let mut program = CircuitProgram::new(1);
        program.ry(0, AngleBinding::Slot(0));
        let params = ParameterTable::with_values(vec![std::f64::consts::FRAC_PI_2], Vec::new());
        let input = Statevector::zero_state(1);
        let request = GradientRequest {
            program: &program,
            params: &params,
            input: &input,
            observable_qubits: vec![0],
        };
        let g = shift_rule_grad(&request, 0).unwrap();
        assert!((g[0] + 1.0).abs() < 1e-12, "got {}", g[0]);
        let fd = finite_diff_grad(&request, 0, 1e-5).unwrap();
        assert!((fd[0] + 1.0).abs() < 1e-9, "got {}", fd[0]);
    }

    #[test]
    fn rz_gradient_vanishes_on_z_observable() {
        let mut program = CircuitProgram::new(1);
        program.rz(0, AngleBinding::Slot(0));
        for theta in [0.0, 0.3, 1.2, 2.9] {
            let params = ParameterTable::with_values(vec![theta], Vec::new());
            let input = Statevector::zero_state(1);
            let request = GradientRequest {
                program: &program,
                params: &params,
                input: &input,
                observable_qubits: vec![0],
            };
            let g = shift_rule_grad(&request, 0).unwrap();
            assert!(g[0].abs() < 1e-12);
        }
    }

    #[test]
    fn shared_slot_sums_over_occurrences() {
        // One slot feeding U3 angle 0, RX, and RY on the same qubit.
        let mut program = CircuitProgram::new(1);
        program.u3(0, AngleBinding::Slot(0), AngleBinding::Fixed(0.2), AngleBinding::Fixed(-0.4));
        program.rx(0, AngleBinding::Slot(0));
        program.ry(0, AngleBinding::Slot(0));
        let params = ParameterTable::with_values(vec![0.7], Vec::new());
        let input = Statevector::zero_state(1);
        let request = GradientRequest {
            program: &program,
            params: &params,
            input: &input,
            observable_qubits: vec![0],
        };
        let shift = shift_rule_grad(&request, 0).unwrap();
        let fd = finite_diff_grad(&request, 0, 1e-5).unwrap();
        assert!((shift[0] - fd[0]).abs() < 1e-6, "shift {} fd {}", shift[0], fd[0]);
    }

    #[test]
    fn shared_slot_equals_sum_of_unshared_clones() {
        // Rebuild the shared program with one fresh slot per occurrence; the
        // shared gradient must equal the sum of the unshared ones.
        let mut shared = CircuitProgram::new(2);
        shared.ry(0, AngleBinding::Slot(0));
        shared.rx(1, AngleBinding::Slot(0));
        shared.ry(1, AngleBinding::Slot(0));
        shared.cx(0, 1);
        let theta = 0.9;
        let params = ParameterTable::with_values(vec![theta], Vec::new());
        let input = Statevector::zero_state(2);
        let request = GradientRequest {
            program: &shared,
            params: &params,
            input: &input,
            observable_qubits: vec![0, 1],
        };
        let g_shared = shift_rule_grad(&request, 0).unwrap();

        let mut unshared = CircuitProgram::new(2);
        unshared.ry(0, AngleBinding::Slot(0));
        unshared.rx(1, AngleBinding::Slot(1));
        unshared.ry(1, AngleBinding::Slot(2));
        unshared.cx(0, 1);
        let params_u = ParameterTable::with_values(vec![theta; 3], Vec::new());
        let mut sum = vec![0.0; 2];
        for slot in 0..3 {
            let req = GradientRequest {
                program: &unshared,
                params: &params_u,
                input: &input,
                observable_qubits: vec![0, 1],
            };
            let g = shift_rule_grad(&req, slot).unwrap();
            for (s, v) in sum.iter_mut().zip(&g) {
                *s += v;
            }
        }
        for (a, b) in g_shared.iter().zip(&sum) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn shift_rule_matches_finite_difference_on_ansatz() {
        // Random draws over both architectures at small sizes.
        for (variant, n, layers) in [(1, 2, 1), (1, 3, 2), (2, 2, 2), (2, 3, 1)] {
            // n = 2 needs the triplet-free check relaxed; build by hand via
            // the public builders only where valid.
            if n < 3 {
                continue;
            }
            let program = if variant == 1 {
                crate::ansatz::build_pqc1(n, layers).unwrap()
            } else {
                crate::ansatz::build_pqc2(n, layers).unwrap()
            };
            let mut params = ParameterTable::layout(&[&program], 1).unwrap();
            params.randomize(&mut derive_rng(31 + variant as u64, &[n as u64, layers as u64]));
            let input = Statevector::zero_state(n);
            for slot in 0..params.n_slots() {
                let request = GradientRequest {
                    program: &program,
                    params: &params,
                    input: &input,
                    observable_qubits: (0..n).collect(),
                };
                let shift = shift_rule_grad(&request, slot).unwrap();
                let fd = finite_diff_grad(&request, slot, 1e-5).unwrap();
                for (s, f) in shift.iter().zip(&fd) {
                    assert!(
                        (s - f).abs() < 1e-6,
                        "variant {variant} n {n} L {layers} slot {slot}: shift {s} fd {f}"
                    );
                }
            }
        }
    }

    #[test]
    fn shift_rule_does_not_mutate_the_table() {
        let program = crate::ansatz::build_pqc1(3, 1).unwrap();
        let mut params = ParameterTable::layout(&[&program], 1).unwrap();
        params.randomize(&mut derive_rng(5, &[]));
        let before = params.clone();
        let input = Statevector::zero_state(3);
        let request = GradientRequest {
            program: &program,
            params: &params,
            input: &input,
            observable_qubits: vec![0],
        };
        shift_rule_grad(&request, 0).unwrap();
        finite_diff_grad(&request, 0, 1e-4).unwrap();
        assert_eq!(params, before);
    }

    #[test]
    fn slot_without_occurrences_has_zero_gradient() {
        // A program that never references the slot: the expectations cannot
        // depend on it, so both routes return zero.
        let mut program = CircuitProgram::new(1);
        program.h(0);
        let params = ParameterTable::with_values(vec![0.4], Vec::new());
        let input = Statevector::zero_state(1);
        let request = GradientRequest {
            program: &program,
            params: &params,
            input: &input,
            observable_qubits: vec![0],
        };
        assert_eq!(shift_rule_grad(&request, 0).unwrap(), vec![0.0]);
        assert_eq!(finite_diff_grad(&request, 0, 1e-5).unwrap(), vec![0.0]);
    }

    #[test]
    fn unknown_slot_is_a_binding_error() {
        let program = CircuitProgram::new(1);
        let params = ParameterTable::with_values(Vec::new(), Vec::new());
        let input = Statevector::zero_state(1);
        let request = GradientRequest {
            program: &program,
            params: &params,
            input: &input,
            observable_qubits: vec![0],
        };
        assert!(matches!(
            shift_rule_grad(&request, 3),
            Err(Error::UnboundSlot { slot: 3 })
        ));
    }

    #[test]
    fn empty_batch_is_a_usage_error() {
        let config = TrainingConfig::with_shape(3, 1, 3);
        let model = Model::build(&config).unwrap();
        let params = model.initial_params(7);
        let streams = NoiseStreams::disabled();
        assert!(loss_grad(&[], &params, &model, 0.01, &streams).is_err());
    }

    #[test]
    fn perfect_prediction_leaves_only_the_l2_term() {
        // With residuals forced to zero the circuit gradient is exactly
        // 2*lambda*theta and the bias gradient is zero. Residuals cannot hit
        // zero exactly through softmax, so check the analytic identity the
        // other way: gradient minus 2*lambda*theta must equal the lambda=0
        // gradient.
        let config = TrainingConfig::with_shape(3, 1, 3);
        let model = Model::build(&config).unwrap();
        let mut params = model.initial_params(3);
        params.randomize(&mut derive_rng(12, &[]));
        let sample = Sample::new(vec![0.9, 0.1, 0.3, 0.2, 0.05, 0.4, 0.8, 0.15], 1, 3);
        let streams = NoiseStreams::disabled();
        let with_l2 = loss_grad(&[&sample], &params, &model, 0.01, &streams).unwrap();
        let without = loss_grad(&[&sample], &params, &model, 0.0, &streams).unwrap();
        for (i, (a, b)) in with_l2.gradient.iter().zip(&without.gradient).enumerate() {
            let expect = if i < params.n_slots() { 0.02 * params.theta()[i] } else { 0.0 };
            assert!((a - b - expect).abs() < 1e-12, "index {i}");
        }
    }

    #[test]
    fn bias_gradient_is_mean_residual() {
        let config = TrainingConfig::with_shape(3, 1, 3);
        let model = Model::build(&config).unwrap();
        let mut params = model.initial_params(3);
        params.randomize(&mut derive_rng(2, &[]));
        let samples = [
            Sample::new(vec![0.9, 0.1, 0.3, 0.2, 0.05, 0.4, 0.8, 0.15], 0, 3),
            Sample::new(vec![0.2, 0.7, 0.1, 0.6, 0.3, 0.9, 0.1, 0.5], 2, 3),
        ];
        let batch: Vec<&Sample> = samples.iter().collect();
        let streams = NoiseStreams::disabled();
        let bg = loss_grad(&batch, &params, &model, 0.0, &streams).unwrap();

        // Recompute mean(p - y) from plain forward passes.
        let mut expect = [0.0; 3];
        for s in &samples {
            let input = amplitude_encode(&s.features, 3).unwrap();
            let probs = model.probabilities(&params, &input, &streams, 0).unwrap();
            for (e, (&p, &y)) in expect.iter_mut().zip(probs.iter().zip(&s.one_hot)) {
                *e += (p - y) / samples.len() as f64;
            }
        }
        let n_slots = params.n_slots();
        for (c, e) in expect.iter().enumerate() {
            assert!((bg.gradient[n_slots + c] - e).abs() < 1e-12);
        }
    }

    #[test]
    fn full_loss_gradient_matches_end_to_end_finite_difference() {
        let config = TrainingConfig::with_shape(3, 1, 3);
        let model = Model::build(&config).unwrap();
        let mut params = model.initial_params(21);
        params.randomize(&mut derive_rng(21, &[]));
        let samples = [
            Sample::new(vec![0.9, 0.1, 0.3, 0.2, 0.05, 0.4, 0.8, 0.15], 0, 3),
            Sample::new(vec![0.2, 0.7, 0.1, 0.6, 0.3, 0.9, 0.1, 0.5], 1, 3),
        ];
        let batch: Vec<&Sample> = samples.iter().collect();
        let streams = NoiseStreams::disabled();
        let bg = loss_grad(&batch, &params, &model, 0.01, &streams).unwrap();
        for i in 0..params.trainable_count() {
            let fd = finite_diff_loss(&batch, &params, &model, 0.01, i, 1e-5).unwrap();
            assert!(
                (bg.gradient[i] - fd).abs() < 1e-5,
                "flat index {i}: analytic {} fd {fd}",
                bg.gradient[i]
            );
        }
    }

    #[test]
    fn circuit_one_slots_ignore_circuit_two_parameters() {
        // The expectation derivative of a circuit-1 slot involves only the
        // circuit-1 program, so perturbing circuit-2 theta leaves it fixed.
        let config = TrainingConfig::with_shape(3, 1, 3);
        let model = Model::build(&config).unwrap();
        let mut params = model.initial_params(9);
        params.randomize(&mut derive_rng(9, &[]));
        let input = Statevector::zero_state(3);
        let slot = 2; // owned by circuit 1
        let request = GradientRequest {
            program: &model.programs[0],
            params: &params,
            input: &input,
            observable_qubits: vec![0, 1],
        };
        let before = shift_rule_grad(&request, slot).unwrap();

        let mut perturbed = params.clone();
        let half = perturbed.n_slots() / 2;
        for t in perturbed.theta_mut()[half..].iter_mut() {
            *t += 0.37;
        }
        let request = GradientRequest {
            program: &model.programs[0],
            params: &perturbed,
            input: &input,
            observable_qubits: vec![0, 1],
        };
        let after = shift_rule_grad(&request, slot).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[0.2, 0.5, 0.5]), 1);
        assert_eq!(argmax(&[0.7, 0.7]), 0);
    }
}
