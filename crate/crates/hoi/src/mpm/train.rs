//! Training loop, optimizers, and evaluation for the window classifier.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::mpm::{argmax, MpmError, MpmNetwork, NetworkShape};

/// Parameter-update rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    /// Adaptive moments (beta1 0.9, beta2 0.999, eps 1e-8).
    #[default]
    Adam,
    /// Plain gradient descent.
    Sgd,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    /// Contiguous gradient shards summed in shard order; fixed count keeps
    /// training bit-reproducible across machines.
    pub shards: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            epochs: 100,
            learning_rate: 2.5e-4,
            batch_size: 512,
            seed: 0,
            optimizer: OptimizerKind::Adam,
            shards: 4,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), MpmError> {
        if self.epochs == 0 {
            return Err(MpmError::BadConfig("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(MpmError::BadConfig("batch_size must be >= 1".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(MpmError::BadConfig(
                "learning_rate must be finite and >= 0".into(),
            ));
        }
        if self.shards == 0 {
            return Err(MpmError::BadConfig("shards must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-epoch record of the run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub epoch_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    pub final_val_accuracy: f64,
}

enum Optimizer {
    Adam {
        m: Vec<f64>,
        v: Vec<f64>,
        t: u64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
    Sgd,
}

impl Optimizer {
    fn new(kind: OptimizerKind, n: usize) -> Optimizer {
        match kind {
            OptimizerKind::Adam => Optimizer::Adam {
                m: vec![0.0; n],
                v: vec![0.0; n],
                t: 0,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
            },
            OptimizerKind::Sgd => Optimizer::Sgd,
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        match self {
            Optimizer::Sgd => {
                for (p, g) in params.iter_mut().zip(grads.iter()) {
                    *p -= lr * g;
                }
            }
            Optimizer::Adam {
                m,
                v,
                t,
                beta1,
                beta2,
                eps,
            } => {
                *t += 1;
                let b1t = 1.0 - beta1.powi(*t as i32);
                let b2t = 1.0 - beta2.powi(*t as i32);
                for i in 0..params.len() {
                    m[i] = *beta1 * m[i] + (1.0 - *beta1) * grads[i];
                    v[i] = *beta2 * v[i] + (1.0 - *beta2) * grads[i] * grads[i];
                    let m_hat = m[i] / b1t;
                    let v_hat = v[i] / b2t;
                    params[i] -= lr * m_hat / (v_hat.sqrt() + *eps);
                }
            }
        }
    }
}

fn to_examples(data: &LabeledDataset) -> Vec<(Vec<Vec<f64>>, usize)> {
    data.samples
        .iter()
        .map(|(w, c)| (w.row_vecs(), c.code() as usize))
        .collect()
}

/// Train the default-shape classifier on a train/validation split.
///
/// Deterministic under `config.seed`: initialization, the per-epoch shuffle
/// schedule, and the shard count are all derived from the config.
pub fn train_mpm(
    train: &LabeledDataset,
    validation: &LabeledDataset,
    config: &TrainingConfig,
) -> Result<(MpmNetwork, TrainingTrace), MpmError> {
    config.validate()?;
    if train.is_empty() {
        return Err(MpmError::Empty("training set"));
    }
    if validation.is_empty() {
        return Err(MpmError::Empty("validation set"));
    }

    let mut net = MpmNetwork::new(NetworkShape::default_mpm(), config.seed);
    let train_examples = to_examples(train);
    let val_examples = to_examples(validation);

    let mut optimizer = Optimizer::new(config.optimizer, net.param_count());
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5417));
    let mut order: Vec<usize> = (0..train_examples.len()).collect();

    let mut trace = TrainingTrace {
        epoch_loss: Vec::with_capacity(config.epochs),
        val_accuracy: Vec::with_capacity(config.epochs),
        final_val_accuracy: 0.0,
    };

    for _epoch in 0..config.epochs {
        for i in (1..order.len()).rev() {
            let j = shuffle_rng.random_range(0..=i);
            order.swap(i, j);
        }
        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<(Vec<Vec<f64>>, usize)> =
                chunk.iter().map(|&i| train_examples[i].clone()).collect();
            let (loss, grads) = net.gradient_sharded(&batch, config.shards)?;
            optimizer.step(net.params_mut(), &grads, config.learning_rate);
            loss_sum += loss * batch.len() as f64;
            seen += batch.len();
        }
        trace.epoch_loss.push(loss_sum / seen as f64);
        trace.val_accuracy.push(accuracy(&net, &val_examples)?);
    }
    trace.final_val_accuracy = *trace.val_accuracy.last().unwrap();
    Ok((net, trace))
}

fn accuracy(net: &MpmNetwork, examples: &[(Vec<Vec<f64>>, usize)]) -> Result<f64, MpmError> {
    let mut correct = 0usize;
    for (rows, label) in examples {
        let probs = net.classify_rows(rows)?;
        if argmax(&probs) == *label {
            correct += 1;
        }
    }
    Ok(correct as f64 / examples.len() as f64)
}

/// Accuracy plus a KxK confusion matrix (rows: truth, columns: prediction).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub accuracy: f64,
    pub per_class_accuracy: Vec<f64>,
    pub confusion: Vec<Vec<usize>>,
}

pub fn evaluate(net: &MpmNetwork, data: &LabeledDataset) -> Result<EvalReport, MpmError> {
    if data.is_empty() {
        return Err(MpmError::Empty("evaluation set"));
    }
    let k = net.shape().classes;
    let mut confusion = vec![vec![0usize; k]; k];
    for (window, class) in &data.samples {
        let truth = class.code() as usize;
        if truth >= k {
            return Err(MpmError::ShapeMismatch {
                expected: format!("class code < {k}"),
                got: format!("{truth}"),
            });
        }
        let probs = net.classify(window)?;
        confusion[truth][argmax(&probs)] += 1;
    }
    let mut correct = 0usize;
    let mut per_class = Vec::with_capacity(k);
    for (truth, row) in confusion.iter().enumerate() {
        let total: usize = row.iter().sum();
        correct += row[truth];
        per_class.push(if total == 0 {
            0.0
        } else {
            row[truth] as f64 / total as f64
        });
    }
    Ok(EvalReport {
        accuracy: correct as f64 / data.len() as f64,
        per_class_accuracy: per_class,
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_dataset, generate_default_trajectories, stratified_split};

    fn small_split() -> (LabeledDataset, LabeledDataset) {
        let trajs = generate_default_trajectories(7, 200, 0.002).unwrap();
        let data = build_dataset(&trajs, 10, 30).unwrap();
        stratified_split(&data, 0.8, 3).unwrap()
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_unchanged() {
        let (train, val) = small_split();
        let config = TrainingConfig {
            epochs: 3,
            learning_rate: 0.0,
            batch_size: 64,
            ..Default::default()
        };
        let (net, trace) = train_mpm(&train, &val, &config).unwrap();
        let fresh = MpmNetwork::new(NetworkShape::default_mpm(), config.seed);
        assert_eq!(net.params(), fresh.params());
        let first = trace.epoch_loss[0];
        for l in &trace.epoch_loss {
            assert!((l - first).abs() < 1e-12);
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let (train, val) = small_split();
        let config = TrainingConfig {
            epochs: 2,
            batch_size: 64,
            ..Default::default()
        };
        let (a, _) = train_mpm(&train, &val, &config).unwrap();
        let (b, _) = train_mpm(&train, &val, &config).unwrap();
        for (x, y) in a.params().iter().zip(b.params().iter()) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn loss_decreases_on_small_run() {
        let (train, val) = small_split();
        let config = TrainingConfig {
            epochs: 12,
            learning_rate: 2e-3,
            batch_size: 96,
            ..Default::default()
        };
        let (_, trace) = train_mpm(&train, &val, &config).unwrap();
        assert!(
            trace.epoch_loss.last().unwrap() < trace.epoch_loss.first().unwrap(),
            "loss did not decrease: {:?}",
            trace.epoch_loss
        );
    }

    #[test]
    fn config_validation() {
        let bad = TrainingConfig {
            epochs: 0,
            ..Default::default()
        };
        assert!(matches!(bad.validate(), Err(MpmError::BadConfig(_))));
        let bad = TrainingConfig {
            batch_size: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainingConfig {
            learning_rate: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn empty_dataset_errors() {
        let (train, val) = small_split();
        let empty = LabeledDataset { samples: vec![] };
        let config = TrainingConfig {
            epochs: 1,
            ..Default::default()
        };
        assert!(matches!(
            train_mpm(&empty, &val, &config),
            Err(MpmError::Empty(_))
        ));
        assert!(matches!(
            train_mpm(&train, &empty, &config),
            Err(MpmError::Empty(_))
        ));
    }

    #[test]
    fn confusion_rows_sum_to_class_counts() {
        let (train, val) = small_split();
        let config = TrainingConfig {
            epochs: 2,
            batch_size: 64,
            ..Default::default()
        };
        let (net, _) = train_mpm(&train, &val, &config).unwrap();
        let report = evaluate(&net, &val).unwrap();
        let counts = val.class_counts();
        for (class, count) in counts {
            let row_sum: usize = report.confusion[class.code() as usize].iter().sum();
            assert_eq!(row_sum, count);
        }
    }
}
