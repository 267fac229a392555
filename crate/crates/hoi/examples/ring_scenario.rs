//! The full pipeline end to end: generate data, train the classifier, then
//! run the scripted ring-wearing scenario on the simulated clock and print
//! the metrics report.
//!
//! Training runs a shortened schedule so the example finishes in about a
//! minute; use the `hoi` binary for the full recipe.
//!
//! ```bash
//! cargo run --release -p hoi --example ring_scenario
//! ```

use hoi::dataset::{build_dataset, generate_default_trajectories, stratified_split};
use hoi::harness::metrics::summarize;
use hoi::harness::scenario::{run_scenario, ScenarioScript};
use hoi::mpm::{train_mpm, TrainingConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("generating synthetic gesture data...");
    let trajectories = generate_default_trajectories(7, 1200, 0.002)?;
    let dataset = build_dataset(&trajectories, 10, 200)?;
    let (train, val) = stratified_split(&dataset, 0.8, 7)?;

    println!("training ({} train windows)...", train.len());
    let config = TrainingConfig {
        epochs: 40,
        learning_rate: 1.5e-3,
        batch_size: 256,
        seed: 7,
        ..Default::default()
    };
    let started = std::time::Instant::now();
    let (network, trace) = train_mpm(&train, &val, &config)?;
    println!(
        "trained in {:.1?}, validation accuracy {:.3}",
        started.elapsed(),
        trace.final_val_accuracy
    );

    let script = ScenarioScript::ring_default(42);
    println!(
        "running scenario '{}' ({:.1} s scripted)...",
        script.name,
        script.total_seconds()
    );
    let started = std::time::Instant::now();
    let outcome = run_scenario(&script, &network)?;
    println!("simulated in {:.1?}\n", started.elapsed());
    print!("{}", summarize(&outcome.report));
    Ok(())
}
