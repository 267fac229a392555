//! Generate the synthetic gesture dataset, split it, and print statistics.
//!
//! ```bash
//! cargo run -p hoi --example gen_dataset
//! ```

use hoi::dataset::{
    build_dataset, generate_default_trajectories, save_dataset, stratified_split, DatasetConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = DatasetConfig::default();
    let trajectories =
        generate_default_trajectories(config.seed, config.frames_per_class, config.jitter)?;
    let dataset = build_dataset(
        &trajectories,
        config.window_stride,
        config.samples_per_class,
    )?;
    println!("built {} windows:", dataset.len());
    for (class, count) in dataset.class_counts() {
        println!("  {class}: {count}");
    }

    let (train, val) = stratified_split(&dataset, 0.8, config.seed)?;
    println!("split: {} train / {} validation", train.len(), val.len());

    let dir = std::env::temp_dir().join("hoi-dataset-example");
    let manifest = save_dataset(&dir, &config)?;
    println!(
        "persisted to {} ({} windows, files {:?})",
        dir.display(),
        manifest.total_windows,
        manifest.files
    );
    Ok(())
}
