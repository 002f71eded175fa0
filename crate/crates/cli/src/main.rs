//! `parqc` command line: train and evaluate the parallel-circuit classifier,
//! inspect circuit structure, and sweep noise settings.
//!
//! Exit codes: 0 success, 1 configuration error, 2 data error, 3 numerical
//! failure.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use parqc_core::ansatz::{self, AnsatzSpec, AnsatzVariant, HadamardMode};
use parqc_core::data::Dataset;
use parqc_core::noise::{inject_phase_noise, NoiseMode};
use parqc_core::params::ParameterTable;
use parqc_core::trainer::{self, prepare_dataset};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "parqc", version, about = "Parallel parameterized-quantum-circuit classifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write epochs.csv, report.json, params.bin, and
    /// manifest.json to the output directory.
    Train(TrainArgs),
    /// Evaluate saved parameters on a dataset and write/print the report.
    Evaluate(EvaluateArgs),
    /// Dump a circuit's gate list and parameter count.
    InspectCircuit(InspectArgs),
    /// Train/evaluate over a grid of noise sigmas and write sweep.csv.
    NoiseSweep(SweepArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// JSON run-configuration file; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Image dataset root (one subdirectory per class).
    #[arg(long)]
    data_root: Option<PathBuf>,

    /// Raw float32 feature-matrix file (see README for the layout).
    #[arg(long, requires = "raw_labels")]
    raw_features: Option<PathBuf>,

    /// Newline-delimited integer labels for --raw-features.
    #[arg(long, requires = "raw_features")]
    raw_labels: Option<PathBuf>,

    /// Use the built-in synthetic separable task instead of files.
    #[arg(long)]
    synthetic: bool,

    /// Output directory for run artifacts.
    #[arg(long)]
    output_dir: Option<PathBuf>,

    #[arg(long)]
    seed: Option<u64>,

    #[arg(long)]
    epochs: Option<usize>,

    #[arg(long)]
    batch_size: Option<usize>,

    #[arg(long)]
    n_qubits: Option<usize>,

    #[arg(long)]
    n_layers: Option<usize>,

    #[arg(long)]
    learning_rate: Option<f64>,

    #[arg(long)]
    lambda: Option<f64>,

    /// Noise modes to enable (pixel, gate, phase); comma separated.
    #[arg(long, value_delimiter = ',')]
    noise_modes: Option<Vec<String>>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Parameter file produced by `train`.
    #[arg(long)]
    params: PathBuf,

    /// Evaluate the training split instead of the validation split.
    #[arg(long)]
    train_split: bool,
}

#[derive(Args)]
struct InspectArgs {
    /// Which architecture to inspect.
    #[arg(long, value_parser = parse_variant, default_value = "pqc1")]
    variant: AnsatzVariant,

    #[arg(long, default_value_t = 15)]
    n_qubits: usize,

    #[arg(long, default_value_t = 20)]
    n_layers: usize,

    /// Hadamard placement: per-layer or first-layer-only.
    #[arg(long, value_parser = parse_hadamard, default_value = "per-layer")]
    hadamard: HadamardMode,

    /// Show the program after phase-noise injection.
    #[arg(long)]
    phase_noise: bool,

    /// Print only the summary line, not the full gate list.
    #[arg(long)]
    summary: bool,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Gate-noise sigmas to sweep.
    #[arg(long, value_delimiter = ',', default_value = "0.0,0.01,0.05")]
    gate_sigmas: Vec<f64>,

    /// Phase-noise sigmas to sweep.
    #[arg(long, value_delimiter = ',', default_value = "0.0,0.01,0.05")]
    phase_sigmas: Vec<f64>,

    /// Pixel-noise sigmas to sweep (pixel factor comes from the config).
    #[arg(long, value_delimiter = ',', default_value = "0.0")]
    pixel_sigmas: Vec<f64>,
}

fn parse_variant(s: &str) -> Result<AnsatzVariant, String> {
    match s.to_ascii_lowercase().as_str() {
        "pqc1" | "1" => Ok(AnsatzVariant::Pqc1),
        "pqc2" | "2" => Ok(AnsatzVariant::Pqc2),
        other => Err(format!("unknown variant {other:?} (expected pqc1 or pqc2)")),
    }
}

fn parse_hadamard(s: &str) -> Result<HadamardMode, String> {
    match s.to_ascii_lowercase().replace('-', "_").as_str() {
        "per_layer" => Ok(HadamardMode::PerLayer),
        "first_layer_only" => Ok(HadamardMode::FirstLayerOnly),
        other => Err(format!(
            "unknown hadamard mode {other:?} (expected per-layer or first-layer-only)"
        )),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help/version requests are successes; everything else is a
            // configuration error.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::InspectCircuit(args) => cmd_inspect(args),
        Command::NoiseSweep(args) => cmd_sweep(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let code = err
                .downcast_ref::<parqc_core::Error>()
                .map(|e| e.exit_code())
                .unwrap_or(1);
            ExitCode::from(code as u8)
        }
    }
}

fn cmd_train(args: TrainArgs) -> anyhow::Result<()> {
    let run = RunConfig::resolve(&args.common)?;
    let (train_set, val_set) = run.load_data()?;
    report_load(&train_set, &val_set);

    let outcome = trainer::train(&train_set, &val_set, &run.training)?;
    for r in &outcome.records {
        println!(
            "epoch {:>3}  train loss {:.4} acc {:.4}  val loss {:.4} acc {:.4}  ({:.1}s)",
            r.epoch, r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy, r.seconds
        );
    }

    let out_dir = run.output_dir();
    std::fs::create_dir_all(&out_dir)?;
    trainer::write_epochs_csv(&outcome.records, &out_dir.join("epochs.csv"))?;
    outcome.params.save(&out_dir.join("params.bin"))?;

    let val_prepared = prepare_dataset(&val_set, &run.training, 1);
    let metrics = trainer::evaluate_with_model(
        &val_prepared,
        &outcome.params,
        &outcome.model,
        &run.training,
    )?;
    output::write_report(&metrics, &val_set.manifest.class_names, &out_dir.join("report.json"))?;
    output::write_manifest(&run, &train_set, &val_set, &out_dir.join("manifest.json"))?;
    println!(
        "final validation accuracy {:.4}, loss {:.4}; artifacts in {}",
        metrics.accuracy,
        metrics.loss,
        out_dir.display()
    );
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> anyhow::Result<()> {
    let run = RunConfig::resolve(&args.common)?;
    let (train_set, val_set) = run.load_data()?;
    let dataset = if args.train_split { train_set } else { val_set };
    let params = ParameterTable::load(&args.params)?;

    let prepared = prepare_dataset(&dataset, &run.training, 1);
    let metrics = trainer::evaluate(&prepared, &params, &run.training)?;
    let report = output::build_report(&metrics, &dataset.manifest.class_names);
    let json = serde_json::to_string_pretty(&report)?;
    println!("{json}");
    if let Some(dir) = &run.output_dir_if_set() {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), json)?;
    }
    Ok(())
}

fn cmd_inspect(args: InspectArgs) -> anyhow::Result<()> {
    let spec = AnsatzSpec::new(args.variant, args.n_qubits, args.n_layers)?
        .with_hadamard(args.hadamard);
    let mut program = ansatz::build(&spec, 0);
    if args.phase_noise {
        program = inject_phase_noise(&program);
    }
    let pair_trainable = 2 * spec.slot_count();
    println!(
        "# variant {:?}, n_qubits {}, n_layers {}, gates {}, slots {}, pair trainable with bias {} (3 classes)",
        args.variant,
        args.n_qubits,
        args.n_layers,
        program.len(),
        spec.slot_count(),
        pair_trainable + 3,
    );
    if !args.summary {
        print!("{program}");
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> anyhow::Result<()> {
    let run = RunConfig::resolve(&args.common)?;
    let (train_set, val_set) = run.load_data()?;
    report_load(&train_set, &val_set);
    let out_dir = run.output_dir();
    std::fs::create_dir_all(&out_dir)?;

    let mut rows = Vec::new();
    for &pixel_sigma in &args.pixel_sigmas {
        for &gate_sigma in &args.gate_sigmas {
            for &phase_sigma in &args.phase_sigmas {
                let mut cfg = run.training.clone();
                cfg.noise.pixel_sigma = pixel_sigma;
                cfg.noise.gate_sigma = gate_sigma;
                cfg.noise.phase_sigma = phase_sigma;
                cfg.noise.modes.clear();
                if pixel_sigma > 0.0 {
                    cfg.noise.modes.push(NoiseMode::Pixel);
                }
                if gate_sigma > 0.0 {
                    cfg.noise.modes.push(NoiseMode::Gate);
                }
                if phase_sigma > 0.0 {
                    cfg.noise.modes.push(NoiseMode::Phase);
                }
                let outcome = trainer::train(&train_set, &val_set, &cfg)?;
                let last = outcome.records.last().expect("at least one epoch");
                println!(
                    "pixel {pixel_sigma} gate {gate_sigma} phase {phase_sigma}: val acc {:.4} loss {:.4}",
                    last.val_accuracy, last.val_loss
                );
                rows.push((
                    pixel_sigma,
                    gate_sigma,
                    phase_sigma,
                    last.train_loss,
                    last.train_accuracy,
                    last.val_loss,
                    last.val_accuracy,
                ));
            }
        }
    }

    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(out_dir.join("sweep.csv"))?);
    writeln!(w, "pixel_sigma,gate_sigma,phase_sigma,train_loss,train_acc,val_loss,val_acc")?;
    for (ps, gs, hs, tl, ta, vl, va) in rows {
        writeln!(w, "{ps},{gs},{hs},{tl},{ta},{vl},{va}")?;
    }
    println!("wrote {}", out_dir.join("sweep.csv").display());
    Ok(())
}

fn report_load(train_set: &Dataset, val_set: &Dataset) {
    println!(
        "loaded {} training / {} validation samples over {} classes ({} features)",
        train_set.len(),
        val_set.len(),
        train_set.n_classes(),
        train_set.feature_len()
    );
}
