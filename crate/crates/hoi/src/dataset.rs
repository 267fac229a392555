//! Synthetic gesture trajectories, windowed dataset construction, and
//! stratified train/validation splitting.
//!
//! Each motion class has a distinct kinematic signature layered on a shared
//! neutral hand template:
//!
//! * `Keep`: the template plus Gaussian jitter.
//! * `Come`: the index-finger chain oscillates along −y, never returning to
//!   neutral (a sustained beckoning displacement).
//! * `Back`: the mirror image along +y.
//! * `Ring`: index extended, the other fingers curled toward the palm, with
//!   a slow whole-hand drift.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec3;
use crate::pose::{
    self, make_window, window_span, FeatureWindow, HandPose, PoseError, JOINT_COUNT,
};

/// Sampling rate of generated trajectories (camera-like).
pub const FRAME_RATE_HZ: f64 = 30.0;

/// Default frames per recorded class trajectory.
pub const DEFAULT_FRAMES_PER_CLASS: usize = 2000;
/// Default windows per class (4 classes x 250 = 1000 samples).
pub const DEFAULT_SAMPLES_PER_CLASS: usize = 250;
/// Default in-window sampling stride.
pub const DEFAULT_WINDOW_STRIDE: usize = 10;
/// Default jitter sigma in meters.
pub const DEFAULT_JITTER: f64 = 0.002;

/// Dataset directory manifest schema version.
pub const MANIFEST_SCHEMA: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("unknown motion class {0:?}")]
    UnknownClass(String),
    #[error("trajectory needs at least 100 frames, got {0}")]
    TooFewFrames(usize),
    #[error("jitter must be >= 0")]
    NegativeJitter,
    #[error(
        "insufficient data for class {class}: {available} windows available, {requested} requested"
    )]
    InsufficientData {
        class: &'static str,
        available: usize,
        requested: usize,
    },
    #[error("train fraction must be in (0, 1), got {0}")]
    BadFraction(f64),
    #[error("class {class} has {count} samples; stratified split needs at least 2")]
    ClassTooSmall { class: &'static str, count: usize },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    Pose(#[from] PoseError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// The default motion vocabulary, with stable codes 0..=3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MotionClass {
    Keep,
    Come,
    Back,
    Ring,
}

impl MotionClass {
    pub const ALL: [MotionClass; 4] = [
        MotionClass::Keep,
        MotionClass::Come,
        MotionClass::Back,
        MotionClass::Ring,
    ];

    pub fn code(self) -> u8 {
        match self {
            MotionClass::Keep => 0,
            MotionClass::Come => 1,
            MotionClass::Back => 2,
            MotionClass::Ring => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<MotionClass> {
        MotionClass::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            MotionClass::Keep => "keep",
            MotionClass::Come => "come",
            MotionClass::Back => "back",
            MotionClass::Ring => "ring",
        }
    }

    pub fn from_name(name: &str) -> Result<MotionClass, DatasetError> {
        MotionClass::ALL
            .iter()
            .copied()
            .find(|c| c.name() == name)
            .ok_or_else(|| DatasetError::UnknownClass(name.to_string()))
    }
}

impl std::fmt::Display for MotionClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

// Neutral template: wrist at the origin, fingers extended toward -y, palm
// facing -z. Meters. The index chain carries a mild natural flexion so the
// fingertip frame is well defined.
const TEMPLATE: [[f64; 3]; JOINT_COUNT] = [
    [0.000, 0.000, 0.000],    // wrist
    [0.025, -0.020, -0.005],  // thumb CMC
    [0.045, -0.035, -0.010],  // thumb MCP
    [0.060, -0.050, -0.012],  // thumb IP
    [0.070, -0.062, -0.014],  // thumb tip
    [0.030, -0.080, 0.000],   // index MCP
    [0.032, -0.115, -0.004],  // index PIP
    [0.033, -0.138, -0.010],  // index DIP
    [0.034, -0.157, -0.017],  // index tip
    [0.010, -0.085, 0.000],   // middle MCP
    [0.011, -0.125, -0.004],  // middle PIP
    [0.012, -0.150, -0.010],  // middle DIP
    [0.013, -0.172, -0.017],  // middle tip
    [-0.010, -0.082, 0.000],  // ring MCP
    [-0.011, -0.118, -0.004], // ring PIP
    [-0.012, -0.142, -0.010], // ring DIP
    [-0.013, -0.162, -0.017], // ring tip
    [-0.030, -0.075, 0.000],  // pinky MCP
    [-0.031, -0.105, -0.004], // pinky PIP
    [-0.032, -0.125, -0.009], // pinky DIP
    [-0.033, -0.141, -0.015], // pinky tip
];

// Curled positions for the middle/ring/pinky chains in the Ring pose:
// tips pulled back toward the palm and down.
const RING_CURL: [(usize, [f64; 3]); 9] = [
    (10, [0.011, -0.100, -0.030]),
    (11, [0.012, -0.085, -0.048]),
    (12, [0.013, -0.072, -0.055]),
    (14, [-0.011, -0.095, -0.030]),
    (15, [-0.012, -0.080, -0.046]),
    (16, [-0.013, -0.068, -0.052]),
    (18, [-0.031, -0.085, -0.028]),
    (19, [-0.032, -0.072, -0.042]),
    (20, [-0.033, -0.062, -0.048]),
];

/// Index-chain joints displaced by the Come/Back waveforms.
const INDEX_CHAIN: [usize; 4] = [5, 6, 7, 8];

// Come/Back waveform: a sustained offset plus a slow oscillation, so every
// frame of the gesture is displaced away from neutral.
const SWING_BASE: f64 = 0.040;
const SWING_AMP: f64 = 0.012;
const SWING_PERIOD: f64 = 2.5;

// Ring drift.
const DRIFT_AMP: f64 = 0.003;
const DRIFT_PERIOD: f64 = 8.0;

/// Noise-free joint positions for a class at trajectory time `t` (seconds).
pub fn gesture_joints(class: MotionClass, t: f64) -> [Vec3; JOINT_COUNT] {
    let mut joints = [Vec3::ZERO; JOINT_COUNT];
    for (i, j) in TEMPLATE.iter().enumerate() {
        joints[i] = Vec3::new(j[0], j[1], j[2]);
    }
    match class {
        MotionClass::Keep => {}
        MotionClass::Come | MotionClass::Back => {
            let swing = SWING_BASE + SWING_AMP * (std::f64::consts::TAU * t / SWING_PERIOD).sin();
            let dy = if class == MotionClass::Come {
                -swing
            } else {
                swing
            };
            for idx in INDEX_CHAIN {
                joints[idx].y += dy;
            }
        }
        MotionClass::Ring => {
            for (idx, p) in RING_CURL {
                joints[idx] = Vec3::new(p[0], p[1], p[2]);
            }
            let phase = std::f64::consts::TAU * t / DRIFT_PERIOD;
            let drift = Vec3::new(
                DRIFT_AMP * phase.sin(),
                0.0,
                DRIFT_AMP * 0.6 * (phase * 0.7).cos() - DRIFT_AMP * 0.6,
            );
            for j in joints.iter_mut() {
                *j = *j + drift;
            }
        }
    }
    joints
}

/// Generate a deterministic class trajectory: `frames` samples at 30 Hz with
/// per-coordinate Gaussian jitter of the given sigma.
pub fn generate_motion_trajectory(
    class: MotionClass,
    frames: usize,
    seed: u64,
    jitter: f64,
) -> Result<Vec<HandPose>, DatasetError> {
    if frames < 100 {
        return Err(DatasetError::TooFewFrames(frames));
    }
    if jitter < 0.0 {
        return Err(DatasetError::NegativeJitter);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = if jitter > 0.0 {
        Some(Normal::new(0.0, jitter).expect("valid sigma"))
    } else {
        None
    };
    let mut out = Vec::with_capacity(frames);
    for i in 0..frames {
        let t = i as f64 / FRAME_RATE_HZ;
        let mut joints = gesture_joints(class, t);
        if let Some(n) = &noise {
            for j in joints.iter_mut() {
                *j = *j + Vec3::new(n.sample(&mut rng), n.sample(&mut rng), n.sample(&mut rng));
            }
        }
        out.push(HandPose::new(t, joints)?);
    }
    Ok(out)
}

/// Per-class trajectories with per-class seeds `seed + code`.
pub fn generate_default_trajectories(
    seed: u64,
    frames: usize,
    jitter: f64,
) -> Result<ClassTrajectories, DatasetError> {
    MotionClass::ALL
        .iter()
        .map(|&c| {
            Ok((
                c,
                generate_motion_trajectory(c, frames, seed + c.code() as u64, jitter)?,
            ))
        })
        .collect()
}

/// Labeled window collection; balanced per class after construction.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub samples: Vec<(FeatureWindow, MotionClass)>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_counts(&self) -> BTreeMap<MotionClass, usize> {
        let mut counts = BTreeMap::new();
        for (_, c) in &self.samples {
            *counts.entry(*c).or_insert(0) += 1;
        }
        counts
    }
}

/// Cut `samples_per_class` windows per class using start offsets 0, 1, 2, ...
/// and the given in-window stride.
pub fn build_dataset(
    trajectories: &[(MotionClass, Vec<HandPose>)],
    window_stride: usize,
    samples_per_class: usize,
) -> Result<LabeledDataset, DatasetError> {
    let span = window_span(window_stride);
    let mut samples = Vec::new();
    for (class, traj) in trajectories {
        let available = traj.len().saturating_sub(span - 1);
        if available < samples_per_class {
            return Err(DatasetError::InsufficientData {
                class: class.name(),
                available,
                requested: samples_per_class,
            });
        }
        for offset in 0..samples_per_class {
            let window =
                make_window(&traj[offset..], window_stride).expect("capacity checked above");
            samples.push((window, *class));
        }
    }
    Ok(LabeledDataset { samples })
}

/// Split preserving per-class proportions exactly: each class contributes
/// `floor(fraction * count)` samples to train and the rest to validation.
/// Deterministic under `seed`.
pub fn stratified_split(
    data: &LabeledDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset), DatasetError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DatasetError::BadFraction(train_fraction));
    }
    let mut by_class: BTreeMap<MotionClass, Vec<usize>> = BTreeMap::new();
    for (i, (_, c)) in data.samples.iter().enumerate() {
        by_class.entry(*c).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_idx = Vec::new();
    let mut val_idx = Vec::new();
    for (class, mut indices) in by_class {
        if indices.len() < 2 {
            return Err(DatasetError::ClassTooSmall {
                class: class.name(),
                count: indices.len(),
            });
        }
        // Fisher-Yates with the shared stream; class iteration order is fixed.
        for i in (1..indices.len()).rev() {
            let j = rng.random_range(0..=i);
            indices.swap(i, j);
        }
        let n_train = (train_fraction * indices.len() as f64).floor() as usize;
        train_idx.extend_from_slice(&indices[..n_train]);
        val_idx.extend_from_slice(&indices[n_train..]);
    }
    let collect = |idx: &[usize]| LabeledDataset {
        samples: idx.iter().map(|&i| data.samples[i].clone()).collect(),
    };
    Ok((collect(&train_idx), collect(&val_idx)))
}

/// Dataset directory manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub seed: u64,
    pub frames_per_class: usize,
    pub samples_per_class: usize,
    pub window_stride: usize,
    pub jitter: f64,
    pub classes: Vec<String>,
    pub files: Vec<String>,
    pub total_windows: usize,
}

/// Generation parameters for a dataset directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub seed: u64,
    pub frames_per_class: usize,
    pub samples_per_class: usize,
    pub window_stride: usize,
    pub jitter: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            seed: 7,
            frames_per_class: DEFAULT_FRAMES_PER_CLASS,
            samples_per_class: DEFAULT_SAMPLES_PER_CLASS,
            window_stride: DEFAULT_WINDOW_STRIDE,
            jitter: DEFAULT_JITTER,
        }
    }
}

/// Generate trajectories and persist them as one file per class plus a
/// manifest. Returns the manifest.
pub fn save_dataset(dir: &Path, config: &DatasetConfig) -> Result<DatasetManifest, DatasetError> {
    let trajectories =
        generate_default_trajectories(config.seed, config.frames_per_class, config.jitter)?;
    // Validate the windowing parameters up front so the manifest never lies.
    let dataset = build_dataset(
        &trajectories,
        config.window_stride,
        config.samples_per_class,
    )?;

    std::fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    for (class, traj) in &trajectories {
        let file = format!("{}.traj", class.name());
        pose::save_trajectory(&dir.join(&file), traj)?;
        files.push(file);
    }
    let manifest = DatasetManifest {
        schema_version: MANIFEST_SCHEMA,
        seed: config.seed,
        frames_per_class: config.frames_per_class,
        samples_per_class: config.samples_per_class,
        window_stride: config.window_stride,
        jitter: config.jitter,
        classes: MotionClass::ALL
            .iter()
            .map(|c| c.name().to_string())
            .collect(),
        files,
        total_windows: dataset.len(),
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(dir.join(MANIFEST_FILE), json)?;
    Ok(manifest)
}

/// Per-class trajectory collection.
pub type ClassTrajectories = Vec<(MotionClass, Vec<HandPose>)>;

/// Load a dataset directory back into per-class trajectories.
pub fn load_dataset(dir: &Path) -> Result<(DatasetManifest, ClassTrajectories), DatasetError> {
    let manifest: DatasetManifest =
        serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    if manifest.schema_version != MANIFEST_SCHEMA {
        return Err(DatasetError::Manifest(format!(
            "unsupported schema version {}",
            manifest.schema_version
        )));
    }
    if manifest.classes.len() != manifest.files.len() {
        return Err(DatasetError::Manifest(
            "classes/files length mismatch".into(),
        ));
    }
    let mut trajectories = Vec::new();
    for (name, file) in manifest.classes.iter().zip(manifest.files.iter()) {
        let class = MotionClass::from_name(name)?;
        let traj = pose::load_trajectory(&dir.join(file))?;
        trajectories.push((class, traj));
    }
    Ok((manifest, trajectories))
}

/// Load a dataset directory and rebuild its windows per the manifest.
pub fn load_windows(dir: &Path) -> Result<(DatasetManifest, LabeledDataset), DatasetError> {
    let (manifest, trajectories) = load_dataset(dir)?;
    let dataset = build_dataset(
        &trajectories,
        manifest.window_stride,
        manifest.samples_per_class,
    )?;
    Ok((manifest, dataset))
}
