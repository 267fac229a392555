//! Train the window classifier on a reduced dataset and evaluate it,
//! including against trajectories generated with a fresh seed.
//!
//! Uses a shortened run (more learning rate, fewer epochs) so the example
//! finishes in seconds; the full recipe is 100 epochs at 2.5e-4 with
//! batch 512 over 1000 windows.
//!
//! ```bash
//! cargo run -p hoi --example train_and_eval
//! ```

use hoi::dataset::{build_dataset, generate_default_trajectories, stratified_split};
use hoi::mpm::{evaluate, train_mpm, TrainingConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let trajectories = generate_default_trajectories(7, 600, 0.002)?;
    let dataset = build_dataset(&trajectories, 10, 120)?;
    let (train, val) = stratified_split(&dataset, 0.8, 7)?;

    let config = TrainingConfig {
        epochs: 30,
        learning_rate: 2e-3,
        batch_size: 128,
        seed: 7,
        ..Default::default()
    };
    let started = std::time::Instant::now();
    let (network, trace) = train_mpm(&train, &val, &config)?;
    println!(
        "trained {} epochs in {:.1?}: loss {:.3} -> {:.3}, final val accuracy {:.3}",
        config.epochs,
        started.elapsed(),
        trace.epoch_loss.first().unwrap(),
        trace.epoch_loss.last().unwrap(),
        trace.final_val_accuracy,
    );

    // Generalization: evaluate on trajectories from a different seed.
    let fresh = generate_default_trajectories(1234, 600, 0.002)?;
    let fresh_data = build_dataset(&fresh, 10, 120)?;
    let report = evaluate(&network, &fresh_data)?;
    println!("cross-seed accuracy {:.3}", report.accuracy);
    println!("confusion (rows: truth, columns: prediction):");
    for (i, row) in report.confusion.iter().enumerate() {
        println!("  class {i}: {row:?}");
    }
    Ok(())
}
