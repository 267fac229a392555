//! Orchestration: dataset generation, training, evaluation, scenario runs,
//! and metric replay from saved traces.

pub mod metrics;
pub mod scenario;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{self, DatasetConfig, DatasetError, DatasetManifest};
use crate::mpm::{
    evaluate, load_checkpoint, save_checkpoint, train_mpm, EvalReport, MpmError, MpmNetwork,
    TrainingConfig, TrainingTrace,
};
use crate::pose::PoseError;
use metrics::{summarize, MetricsReport};
use scenario::{run_scenario, ScenarioOutcome, ScenarioScript};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("trace: {0}")]
    Trace(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Mpm(#[from] MpmError),
    #[error(transparent)]
    Pose(#[from] PoseError),
    #[error(transparent)]
    Fsm(#[from] crate::fsm::FsmError),
    #[error(transparent)]
    Wire(#[from] crate::wire::WireError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Generate the synthetic dataset directory.
pub fn cmd_gen_data(
    config: &DatasetConfig,
    out_dir: &Path,
) -> Result<DatasetManifest, HarnessError> {
    Ok(dataset::save_dataset(out_dir, config)?)
}

/// Training outcome persisted next to the checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub final_val_accuracy: f64,
    pub train_samples: usize,
    pub val_samples: usize,
    pub config: TrainingConfig,
    pub trace: TrainingTrace,
}

/// Train fraction of the stratified split.
pub const TRAIN_FRACTION: f64 = 0.8;

/// Train on a dataset directory, write the checkpoint, and return the report.
/// The split and all training randomness derive from `config.seed`.
pub fn cmd_train(
    data_dir: &Path,
    config: &TrainingConfig,
    checkpoint_path: &Path,
    report_path: Option<&Path>,
) -> Result<(MpmNetwork, TrainReport), HarnessError> {
    config.validate()?;
    let (_, windows) = dataset::load_windows(data_dir)?;
    let (train, val) = dataset::stratified_split(&windows, TRAIN_FRACTION, config.seed)?;
    let (network, trace) = train_mpm(&train, &val, config)?;
    save_checkpoint(&network, checkpoint_path)?;
    let report = TrainReport {
        final_val_accuracy: trace.final_val_accuracy,
        train_samples: train.len(),
        val_samples: val.len(),
        config: config.clone(),
        trace,
    };
    if let Some(path) = report_path {
        std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
    }
    Ok((network, report))
}

/// Evaluate a checkpoint against a dataset directory; optionally write the
/// confusion matrix as CSV (rows: truth, columns: prediction).
pub fn cmd_eval(
    checkpoint_path: &Path,
    data_dir: &Path,
    confusion_csv: Option<&Path>,
) -> Result<EvalReport, HarnessError> {
    let network = load_checkpoint(checkpoint_path)?;
    let (_, windows) = dataset::load_windows(data_dir)?;
    let report = evaluate(&network, &windows)?;
    if let Some(path) = confusion_csv {
        let mut out = String::from("truth\\prediction");
        for class in dataset::MotionClass::ALL {
            out.push(',');
            out.push_str(class.name());
        }
        out.push('\n');
        for (truth, row) in report.confusion.iter().enumerate() {
            let name = dataset::MotionClass::from_code(truth as u8)
                .map(|c| c.name().to_string())
                .unwrap_or_else(|| format!("class-{truth}"));
            out.push_str(&name);
            for v in row {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        std::fs::write(path, out)?;
    }
    Ok(report)
}

pub const SCENARIO_FILE: &str = "scenario.json";
pub const HAND_TRACE_FILE: &str = "hand_trace.csv";
pub const COMMANDS_FILE: &str = "commands.csv";
pub const TCP_TRACE_FILE: &str = "tcp_trace.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const SUMMARY_FILE: &str = "summary.txt";

/// Run a scenario against a trained checkpoint and persist every trace plus
/// the metrics report into `out_dir`.
pub fn cmd_run_scenario(
    checkpoint_path: &Path,
    script: &ScenarioScript,
    out_dir: &Path,
) -> Result<ScenarioOutcome, HarnessError> {
    let network = load_checkpoint(checkpoint_path)?;
    let outcome = run_scenario(script, &network)?;
    write_outcome(script, &outcome, out_dir)?;
    Ok(outcome)
}

pub fn write_outcome(
    script: &ScenarioScript,
    outcome: &ScenarioOutcome,
    out_dir: &Path,
) -> Result<(), HarnessError> {
    std::fs::create_dir_all(out_dir)?;
    script.save(&out_dir.join(SCENARIO_FILE))?;
    let mut buf = Vec::new();
    metrics::write_hand_trace(&mut buf, &outcome.hand_rows)?;
    std::fs::write(out_dir.join(HAND_TRACE_FILE), &buf)?;
    buf.clear();
    metrics::write_commands(&mut buf, &outcome.commands)?;
    std::fs::write(out_dir.join(COMMANDS_FILE), &buf)?;
    buf.clear();
    metrics::write_tcp_trace(&mut buf, &outcome.tcp_rows)?;
    std::fs::write(out_dir.join(TCP_TRACE_FILE), &buf)?;
    std::fs::write(
        out_dir.join(METRICS_FILE),
        serde_json::to_string_pretty(&outcome.report)?,
    )?;
    metrics::save_text(&out_dir.join(SUMMARY_FILE), &summarize(&outcome.report))?;
    Ok(())
}

/// Recompute the metrics report from traces saved by a previous run.
pub fn cmd_replay(traces_dir: &Path) -> Result<MetricsReport, HarnessError> {
    let script = ScenarioScript::load(&traces_dir.join(SCENARIO_FILE))?;
    let hand_rows =
        metrics::read_hand_trace(std::fs::File::open(traces_dir.join(HAND_TRACE_FILE))?)?;
    let commands = metrics::read_commands(std::fs::File::open(traces_dir.join(COMMANDS_FILE))?)?;
    let tcp_rows = metrics::read_tcp_trace(std::fs::File::open(traces_dir.join(TCP_TRACE_FILE))?)?;
    Ok(metrics::compute_metrics(
        &script.name,
        &script.thresholds,
        script.gate_len,
        script.pose_rate_hz,
        &hand_rows,
        &commands,
        &tcp_rows,
    ))
}

/// Resolve a scenario argument: a builtin name or a JSON file path.
pub fn resolve_scenario(selector: &str, seed: u64) -> Result<ScenarioScript, HarnessError> {
    match selector {
        "ring" => Ok(ScenarioScript::ring_default(seed)),
        "disturbance" => Ok(ScenarioScript::disturbance_default(seed)),
        path => ScenarioScript::load(Path::new(path)),
    }
}
