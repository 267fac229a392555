//! Thin CLI over the library: dataset generation, training, evaluation,
//! scenario runs, and metric replay.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hoi::dataset::DatasetConfig;
use hoi::harness::{
    cmd_eval, cmd_gen_data, cmd_replay, cmd_run_scenario, cmd_train, resolve_scenario, HarnessError,
};
use hoi::mpm::TrainingConfig;

#[derive(Parser)]
#[command(
    name = "hoi",
    about = "Gesture-driven hand-object-interaction control stack",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic gesture dataset directory.
    GenData {
        #[arg(long)]
        out: PathBuf,
        /// Base seed; per-class trajectories use seed + class code.
        #[arg(long)]
        seed: Option<u64>,
        /// Dataset config JSON (frames_per_class, samples_per_class, ...).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train the window classifier on a dataset directory.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Training report JSON destination.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Training config JSON (epochs, learning_rate, batch_size, ...).
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on a dataset directory.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Confusion matrix CSV destination.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a scenario; exits non-zero unless every threshold is met.
    RunScenario {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Builtin name (`ring`, `disturbance`) or a scenario JSON path.
        #[arg(long, default_value = "ring")]
        scenario: String,
        #[arg(long)]
        out: PathBuf,
        /// Seed for builtin scenarios.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recompute metrics from a saved trace directory.
    Replay {
        /// Directory written by run-scenario.
        #[arg(long)]
        traces: PathBuf,
    },
}

fn load_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T, HarnessError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn run(cli: Cli) -> Result<bool, HarnessError> {
    match cli.command {
        Command::GenData { out, seed, config } => {
            let mut cfg: DatasetConfig = config
                .as_ref()
                .map(load_json)
                .transpose()?
                .unwrap_or_default();
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let manifest = cmd_gen_data(&cfg, &out)?;
            println!(
                "wrote {} ({} windows of shape (10, 63), stride {}, seed {})",
                out.display(),
                manifest.total_windows,
                manifest.window_stride,
                manifest.seed
            );
            Ok(true)
        }
        Command::Train {
            data,
            checkpoint,
            report,
            seed,
            config,
        } => {
            let mut cfg: TrainingConfig = config
                .as_ref()
                .map(load_json)
                .transpose()?
                .unwrap_or_default();
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let (_, report_out) = cmd_train(&data, &cfg, &checkpoint, report.as_deref())?;
            println!(
                "trained {} epochs: final validation accuracy {:.4} ({} train / {} val)",
                report_out.config.epochs,
                report_out.final_val_accuracy,
                report_out.train_samples,
                report_out.val_samples
            );
            println!("checkpoint: {}", checkpoint.display());
            Ok(true)
        }
        Command::Eval {
            checkpoint,
            data,
            out,
        } => {
            let report = cmd_eval(&checkpoint, &data, out.as_deref())?;
            println!("accuracy {:.4}", report.accuracy);
            for (i, acc) in report.per_class_accuracy.iter().enumerate() {
                let name = hoi::dataset::MotionClass::from_code(i as u8)
                    .map(|c| c.name().to_string())
                    .unwrap_or_else(|| format!("class-{i}"));
                println!("  {name}: {acc:.4}");
            }
            Ok(true)
        }
        Command::RunScenario {
            checkpoint,
            scenario,
            out,
            seed,
        } => {
            let script = resolve_scenario(&scenario, seed.unwrap_or(42))?;
            let outcome = cmd_run_scenario(&checkpoint, &script, &out)?;
            print!("{}", hoi::harness::metrics::summarize(&outcome.report));
            println!("traces: {}", out.display());
            Ok(outcome.report.passed)
        }
        Command::Replay { traces } => {
            let report = cmd_replay(&traces)?;
            print!("{}", hoi::harness::metrics::summarize(&report));
            Ok(report.passed)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("thresholds not met");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
