//! Motion primitive model: a two-layer bidirectional LSTM classifier over
//! joint-coordinate windows, its cross-entropy loss, full-network gradients,
//! training, the confirmation gate, and checkpoint persistence.

mod checkpoint;
mod gate;
mod lstm;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use gate::{StabilityGate, DEFAULT_GATE_LEN};
pub use train::{evaluate, train_mpm, EvalReport, OptimizerKind, TrainingConfig, TrainingTrace};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::pose::{FeatureWindow, FEATURES_PER_FRAME, WINDOW_LEN};
use lstm::{backprop_cell, run_cell, CellParams, CellTrace};

/// Probability floor inside logarithms.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MpmError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("label at step {step} is not one-hot")]
    LabelNotOneHot { step: usize },
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("invalid training config: {0}")]
    BadConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Network dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkShape {
    pub input: usize,
    pub hidden: usize,
    pub classes: usize,
    pub layers: usize,
}

impl NetworkShape {
    /// The window classifier: 63 features, 2 layers, 64 hidden units per
    /// direction, 4 classes.
    pub fn default_mpm() -> NetworkShape {
        NetworkShape {
            input: FEATURES_PER_FRAME,
            hidden: 64,
            classes: 4,
            layers: 2,
        }
    }

    fn layer_input(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input
        } else {
            2 * self.hidden
        }
    }
}

/// One named parameter tensor inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamEntry {
    pub name: String,
    pub offset: usize,
    pub dims: Vec<usize>,
}

impl ParamEntry {
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub(crate) fn build_layout(shape: &NetworkShape) -> (Vec<ParamEntry>, usize) {
    let h = shape.hidden;
    let mut entries = Vec::new();
    let mut offset = 0;
    let mut push = |name: String, dims: Vec<usize>, offset: &mut usize| {
        let len: usize = dims.iter().product();
        entries.push(ParamEntry {
            name,
            offset: *offset,
            dims,
        });
        *offset += len;
    };
    for layer in 0..shape.layers {
        let input = shape.layer_input(layer);
        for dir in ["fwd", "bwd"] {
            push(
                format!("l{layer}.{dir}.w_ih"),
                vec![4 * h, input],
                &mut offset,
            );
            push(format!("l{layer}.{dir}.w_hh"), vec![4 * h, h], &mut offset);
            push(format!("l{layer}.{dir}.bias"), vec![4 * h], &mut offset);
        }
    }
    push("head.w".into(), vec![shape.classes, 2 * h], &mut offset);
    push("head.b".into(), vec![shape.classes], &mut offset);
    (entries, offset)
}

/// The classifier. Parameters live in one flat `f64` vector addressed through
/// a fixed layout; an immutable network is safe to share across threads.
#[derive(Debug, Clone)]
pub struct MpmNetwork {
    shape: NetworkShape,
    layout: Vec<ParamEntry>,
    params: Vec<f64>,
}

/// Direction selector inside a bidirectional layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl MpmNetwork {
    /// Initialize with uniform `±1/sqrt(fan_in)` weights, zero biases, and a
    /// +1 forget-gate bias. Deterministic under `seed`.
    pub fn new(shape: NetworkShape, seed: u64) -> MpmNetwork {
        let (layout, total) = build_layout(&shape);
        let mut params = vec![0.0; total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for entry in &layout {
            if entry.dims.len() == 2 {
                let fan_in = entry.dims[1] as f64;
                let bound = 1.0 / fan_in.sqrt();
                for v in params[entry.offset..entry.offset + entry.len()].iter_mut() {
                    *v = rng.random_range(-bound..bound);
                }
            } else if entry.name.ends_with(".bias") {
                let h = shape.hidden;
                for k in 0..h {
                    params[entry.offset + h + k] = 1.0;
                }
            }
        }
        MpmNetwork {
            shape,
            layout,
            params,
        }
    }

    pub fn from_params(shape: NetworkShape, params: Vec<f64>) -> Result<MpmNetwork, MpmError> {
        let (layout, total) = build_layout(&shape);
        if params.len() != total {
            return Err(MpmError::ShapeMismatch {
                expected: format!("{total} parameters"),
                got: format!("{}", params.len()),
            });
        }
        Ok(MpmNetwork {
            shape,
            layout,
            params,
        })
    }

    pub fn shape(&self) -> NetworkShape {
        self.shape
    }

    pub fn layout(&self) -> &[ParamEntry] {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn entry(&self, name: &str) -> &ParamEntry {
        self.layout
            .iter()
            .find(|e| e.name == name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
    }

    pub fn param_slice(&self, name: &str) -> &[f64] {
        let e = self.entry(name);
        &self.params[e.offset..e.offset + e.len()]
    }

    fn cell_params(&self, layer: usize, dir: Direction) -> CellParams<'_> {
        let d = match dir {
            Direction::Forward => "fwd",
            Direction::Backward => "bwd",
        };
        let w_ih = self.entry(&format!("l{layer}.{d}.w_ih"));
        let w_hh = self.entry(&format!("l{layer}.{d}.w_hh"));
        let bias = self.entry(&format!("l{layer}.{d}.bias"));
        CellParams {
            w_ih: &self.params[w_ih.offset..w_ih.offset + w_ih.len()],
            w_hh: &self.params[w_hh.offset..w_hh.offset + w_hh.len()],
            bias: &self.params[bias.offset..bias.offset + bias.len()],
            input: self.shape.layer_input(layer),
            hidden: self.shape.hidden,
        }
    }

    fn check_rows(&self, rows: &[Vec<f64>]) -> Result<(), MpmError> {
        if rows.is_empty() {
            return Err(MpmError::Empty("input sequence"));
        }
        for row in rows {
            if row.len() != self.shape.input {
                return Err(MpmError::ShapeMismatch {
                    expected: format!("rows of width {}", self.shape.input),
                    got: format!("{}", row.len()),
                });
            }
        }
        Ok(())
    }

    /// Class probabilities for a feature window (strictly `(10, 63)` input).
    pub fn classify(&self, window: &FeatureWindow) -> Result<Vec<f64>, MpmError> {
        if self.shape.input != FEATURES_PER_FRAME {
            return Err(MpmError::ShapeMismatch {
                expected: format!("network input {}", self.shape.input),
                got: format!("{FEATURES_PER_FRAME}"),
            });
        }
        let rows: Vec<Vec<f64>> = window.rows.iter().map(|r| r.to_vec()).collect();
        debug_assert_eq!(rows.len(), WINDOW_LEN);
        self.classify_rows(&rows)
    }

    /// Class probabilities for an arbitrary-length sequence of feature rows.
    pub fn classify_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>, MpmError> {
        self.check_rows(rows)?;
        let trace = self.forward_trace(rows);
        Ok(trace.probs)
    }

    /// Argmax decision over [`MpmNetwork::classify`] output.
    pub fn decide(&self, window: &FeatureWindow) -> Result<u8, MpmError> {
        let probs = self.classify(window)?;
        Ok(argmax(&probs) as u8)
    }

    fn forward_trace(&self, rows: &[Vec<f64>]) -> ForwardTrace {
        let steps = rows.len();
        let h = self.shape.hidden;
        let mut layer_inputs: Vec<Vec<Vec<f64>>> = Vec::with_capacity(self.shape.layers);
        let mut cells: Vec<(CellTrace, CellTrace)> = Vec::with_capacity(self.shape.layers);

        let mut current: Vec<Vec<f64>> = rows.to_vec();
        for layer in 0..self.shape.layers {
            let fwd_in = current.clone();
            let mut bwd_in = current.clone();
            bwd_in.reverse();
            let fwd = run_cell(&self.cell_params(layer, Direction::Forward), &fwd_in);
            let bwd = run_cell(&self.cell_params(layer, Direction::Backward), &bwd_in);
            let mut next = Vec::with_capacity(steps);
            for t in 0..steps {
                let mut row = Vec::with_capacity(2 * h);
                row.extend_from_slice(&fwd.h[t]);
                row.extend_from_slice(&bwd.h[steps - 1 - t]);
                next.push(row);
            }
            layer_inputs.push(current);
            cells.push((fwd, bwd));
            current = next;
        }

        // Head consumes each direction's terminal summary of the top layer.
        let (top_fwd, top_bwd) = cells.last().expect("at least one layer");
        let mut summary = Vec::with_capacity(2 * h);
        summary.extend_from_slice(&top_fwd.terminal_h(h));
        summary.extend_from_slice(&top_bwd.terminal_h(h));

        let w = self.param_slice("head.w");
        let b = self.param_slice("head.b");
        let classes = self.shape.classes;
        let mut logits = vec![0.0; classes];
        for (k, logit) in logits.iter_mut().enumerate() {
            let mut acc = b[k];
            for (wv, sv) in w[k * 2 * h..(k + 1) * 2 * h].iter().zip(summary.iter()) {
                acc += wv * sv;
            }
            *logit = acc;
        }
        let probs = softmax(&logits);
        ForwardTrace {
            layer_inputs,
            cells,
            summary,
            logits,
            probs,
        }
    }

    /// Raw logits, exposed for symmetry checks.
    pub fn logits_rows(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>, MpmError> {
        self.check_rows(rows)?;
        Ok(self.forward_trace(rows).logits)
    }

    /// Mean cross-entropy loss and its gradient over a batch of labeled row
    /// sequences. Gradient layout mirrors the parameter layout.
    pub fn gradient(&self, batch: &[(Vec<Vec<f64>>, usize)]) -> Result<(f64, Vec<f64>), MpmError> {
        if batch.is_empty() {
            return Err(MpmError::Empty("batch"));
        }
        let mut grads = vec![0.0; self.params.len()];
        let mut loss_sum = 0.0;
        let scale = 1.0 / batch.len() as f64;
        for (rows, label) in batch {
            loss_sum += self.accumulate_sample(rows, *label, scale, &mut grads)?;
        }
        Ok((loss_sum * scale, grads))
    }

    /// Like [`MpmNetwork::gradient`] but with the batch split into `shards`
    /// contiguous chunks evaluated in parallel and summed in shard order, so
    /// the result is deterministic for a fixed shard count.
    pub fn gradient_sharded(
        &self,
        batch: &[(Vec<Vec<f64>>, usize)],
        shards: usize,
    ) -> Result<(f64, Vec<f64>), MpmError> {
        if batch.is_empty() {
            return Err(MpmError::Empty("batch"));
        }
        let shards = shards.max(1).min(batch.len());
        if shards == 1 {
            return self.gradient(batch);
        }
        let scale = 1.0 / batch.len() as f64;
        let chunk = batch.len().div_ceil(shards);
        let mut partials: Vec<Result<(f64, Vec<f64>), MpmError>> = Vec::new();
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for part in batch.chunks(chunk) {
                handles.push(scope.spawn(move || {
                    let mut grads = vec![0.0; self.params.len()];
                    let mut loss = 0.0;
                    for (rows, label) in part {
                        loss += self.accumulate_sample(rows, *label, scale, &mut grads)?;
                    }
                    Ok((loss, grads))
                }));
            }
            for handle in handles {
                partials.push(handle.join().expect("shard panicked"));
            }
        });
        let mut grads = vec![0.0; self.params.len()];
        let mut loss_sum = 0.0;
        for partial in partials {
            let (loss, part) = partial?;
            loss_sum += loss;
            for (acc, v) in grads.iter_mut().zip(part.iter()) {
                *acc += v;
            }
        }
        Ok((loss_sum * scale, grads))
    }

    /// Forward + BPTT for one sample; gradient contributions are pre-scaled
    /// by `scale`. Returns the sample's (unscaled) loss.
    fn accumulate_sample(
        &self,
        rows: &[Vec<f64>],
        label: usize,
        scale: f64,
        grads: &mut [f64],
    ) -> Result<f64, MpmError> {
        self.check_rows(rows)?;
        if label >= self.shape.classes {
            return Err(MpmError::ShapeMismatch {
                expected: format!("label < {}", self.shape.classes),
                got: format!("{label}"),
            });
        }
        let h = self.shape.hidden;
        let steps = rows.len();
        let trace = self.forward_trace(rows);
        let loss = -(trace.probs[label].max(LOG_FLOOR)).ln();

        // Softmax + cross-entropy collapse to (p - onehot).
        let mut dlogits = trace.probs.clone();
        dlogits[label] -= 1.0;
        for d in dlogits.iter_mut() {
            *d *= scale;
        }

        let head_w = self.entry("head.w");
        let head_b = self.entry("head.b");
        let w = &self.params[head_w.offset..head_w.offset + head_w.len()];
        let mut d_summary = vec![0.0; 2 * h];
        for (k, d) in dlogits.iter().enumerate() {
            grads[head_b.offset + k] += d;
            for j in 0..2 * h {
                grads[head_w.offset + k * 2 * h + j] += d * trace.summary[j];
            }
            for (slot, wv) in d_summary
                .iter_mut()
                .zip(w[k * 2 * h..(k + 1) * 2 * h].iter())
            {
                *slot += d * wv;
            }
        }

        // Incoming per-step hidden gradients for the top layer: only the
        // terminal summaries receive head gradient.
        let mut d_fwd: Vec<Vec<f64>> = (0..steps).map(|_| vec![0.0; h]).collect();
        let mut d_bwd: Vec<Vec<f64>> = (0..steps).map(|_| vec![0.0; h]).collect();
        d_fwd[steps - 1].copy_from_slice(&d_summary[..h]);
        d_bwd[steps - 1].copy_from_slice(&d_summary[h..]);

        for layer in (0..self.shape.layers).rev() {
            let (fwd_trace, bwd_trace) = &trace.cells[layer];
            let layer_input = &trace.layer_inputs[layer];
            let mut bwd_input = layer_input.clone();
            bwd_input.reverse();

            let fwd_params = self.cell_params(layer, Direction::Forward);
            let bwd_params = self.cell_params(layer, Direction::Backward);
            let fwd_grads = backprop_cell(&fwd_params, layer_input, fwd_trace, &d_fwd);
            let bwd_grads = backprop_cell(&bwd_params, &bwd_input, bwd_trace, &d_bwd);

            for (dir, cell_grads) in [("fwd", &fwd_grads), ("bwd", &bwd_grads)] {
                for (suffix, data) in [
                    ("w_ih", &cell_grads.w_ih),
                    ("w_hh", &cell_grads.w_hh),
                    ("bias", &cell_grads.bias),
                ] {
                    let entry = self.entry(&format!("l{layer}.{dir}.{suffix}"));
                    for (slot, v) in grads[entry.offset..entry.offset + entry.len()]
                        .iter_mut()
                        .zip(data.iter())
                    {
                        *slot += v;
                    }
                }
            }

            if layer > 0 {
                // Input gradients split back into the lower layer's per-step
                // forward/backward hidden outputs.
                for t in 0..steps {
                    for k in 0..h {
                        d_fwd[t][k] = fwd_grads.x[t][k] + bwd_grads.x[steps - 1 - t][k];
                        d_bwd[steps - 1 - t][k] =
                            fwd_grads.x[t][h + k] + bwd_grads.x[steps - 1 - t][h + k];
                    }
                }
            }
        }
        Ok(loss)
    }
}

struct ForwardTrace {
    /// Input sequence of each layer, in original time order.
    layer_inputs: Vec<Vec<Vec<f64>>>,
    /// (forward, backward) cell traces per layer; backward is in reversed
    /// processing order.
    cells: Vec<(CellTrace, CellTrace)>,
    summary: Vec<f64>,
    logits: Vec<f64>,
    probs: Vec<f64>,
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Sequence cross-entropy: `-Σ_t Σ_k target[t][k] · ln(pred[t][k])` with the
/// probability floored at [`LOG_FLOOR`].
pub fn cross_entropy(predictions: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64, MpmError> {
    if predictions.len() != targets.len() {
        return Err(MpmError::ShapeMismatch {
            expected: format!("{} target steps", predictions.len()),
            got: format!("{}", targets.len()),
        });
    }
    let mut loss = 0.0;
    for (step, (pred, target)) in predictions.iter().zip(targets.iter()).enumerate() {
        if pred.len() != target.len() {
            return Err(MpmError::ShapeMismatch {
                expected: format!("{} classes", pred.len()),
                got: format!("{}", target.len()),
            });
        }
        let mut ones = 0;
        for v in target {
            if *v == 1.0 {
                ones += 1;
            } else if *v != 0.0 {
                return Err(MpmError::LabelNotOneHot { step });
            }
        }
        if ones != 1 {
            return Err(MpmError::LabelNotOneHot { step });
        }
        for (p, t) in pred.iter().zip(target.iter()) {
            if *t == 1.0 {
                loss -= p.max(LOG_FLOOR).ln();
            }
        }
    }
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn window_of(value: f64) -> FeatureWindow {
        FeatureWindow {
            rows: [[value; FEATURES_PER_FRAME]; WINDOW_LEN],
            start_timestamp: 0.0,
        }
    }

    #[test]
    fn zero_network_is_uniform() {
        let shape = NetworkShape::default_mpm();
        let mut net = MpmNetwork::new(shape, 1);
        for p in net.params_mut() {
            *p = 0.0;
        }
        let probs = net.classify(&window_of(0.3)).unwrap();
        for p in probs {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn classify_is_deterministic_and_normalized() {
        let net = MpmNetwork::new(NetworkShape::default_mpm(), 42);
        let w = window_of(0.1);
        let a = net.classify(&w).unwrap();
        let b = net.classify(&w).unwrap();
        assert_eq!(a, b);
        let sum: f64 = a.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn classify_rejects_shape_mismatch() {
        let net = MpmNetwork::new(
            NetworkShape {
                input: 5,
                hidden: 3,
                classes: 2,
                layers: 2,
            },
            0,
        );
        let rows = vec![vec![0.0; 4]; 3];
        assert!(matches!(
            net.classify_rows(&rows),
            Err(MpmError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn cross_entropy_analytic_values() {
        // Perfect prediction.
        let loss = cross_entropy(&[vec![1.0, 0.0, 0.0, 0.0]], &[vec![1.0, 0.0, 0.0, 0.0]]).unwrap();
        assert!(loss.abs() < 1e-9);

        // Uniform prediction over 4 classes: ln 4 per step.
        let uniform = vec![0.25; 4];
        let loss =
            cross_entropy(std::slice::from_ref(&uniform), &[vec![0.0, 1.0, 0.0, 0.0]]).unwrap();
        assert!((loss - 4.0f64.ln()).abs() < 1e-9);

        let loss2 = cross_entropy(
            &[uniform.clone(), uniform],
            &[vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0, 1.0]],
        )
        .unwrap();
        assert!((loss2 - 2.0 * 4.0f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn cross_entropy_rejects_bad_labels() {
        let pred = vec![vec![0.5, 0.5]];
        assert!(matches!(
            cross_entropy(&pred, &[vec![0.5, 0.5]]),
            Err(MpmError::LabelNotOneHot { step: 0 })
        ));
        assert!(matches!(
            cross_entropy(&pred, &[vec![1.0, 1.0]]),
            Err(MpmError::LabelNotOneHot { step: 0 })
        ));
    }

    #[test]
    fn zero_network_head_bias_gradient_closed_form() {
        let shape = NetworkShape {
            input: 6,
            hidden: 4,
            classes: 4,
            layers: 2,
        };
        let mut net = MpmNetwork::new(shape, 3);
        for p in net.params_mut() {
            *p = 0.0;
        }
        // Balanced batch: mean prediction (uniform) equals mean one-hot, so
        // the head bias gradient vanishes.
        let rows = vec![vec![0.5; 6]; 5];
        let balanced: Vec<(Vec<Vec<f64>>, usize)> =
            (0..4).map(|label| (rows.clone(), label)).collect();
        let (_, grads) = net.gradient(&balanced).unwrap();
        let head_b = net.entry("head.b");
        for k in 0..4 {
            assert!(grads[head_b.offset + k].abs() < 1e-12);
        }

        // Unbalanced batch: gradient = mean prediction − class frequency.
        let unbalanced: Vec<(Vec<Vec<f64>>, usize)> = vec![
            (rows.clone(), 0),
            (rows.clone(), 0),
            (rows.clone(), 1),
            (rows, 2),
        ];
        let (_, grads) = net.gradient(&unbalanced).unwrap();
        let freq = [0.5, 0.25, 0.25, 0.0];
        for k in 0..4 {
            let expected = 0.25 - freq[k];
            assert!((grads[head_b.offset + k] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicated_batch_matches_single_sample_gradient() {
        let shape = NetworkShape {
            input: 4,
            hidden: 3,
            classes: 3,
            layers: 2,
        };
        let net = MpmNetwork::new(shape, 9);
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|t| vec![0.1 * t as f64, -0.2, 0.3, 0.05])
            .collect();
        let single = vec![(rows.clone(), 1usize)];
        let tripled = vec![(rows.clone(), 1), (rows.clone(), 1), (rows, 1)];
        let (l1, g1) = net.gradient(&single).unwrap();
        let (l3, g3) = net.gradient(&tripled).unwrap();
        assert!((l1 - l3).abs() < 1e-12);
        for (a, b) in g1.iter().zip(g3.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sharded_gradient_matches_serial_closely() {
        let shape = NetworkShape {
            input: 5,
            hidden: 4,
            classes: 3,
            layers: 2,
        };
        let net = MpmNetwork::new(shape, 17);
        let batch: Vec<(Vec<Vec<f64>>, usize)> = (0..13)
            .map(|i| {
                let rows: Vec<Vec<f64>> = (0..6)
                    .map(|t| vec![0.05 * (i + t) as f64, 0.1, -0.1, 0.2, -0.3])
                    .collect();
                (rows, i % 3)
            })
            .collect();
        let (l_serial, g_serial) = net.gradient(&batch).unwrap();
        let (l_sharded, g_sharded) = net.gradient_sharded(&batch, 4).unwrap();
        assert!((l_serial - l_sharded).abs() < 1e-12);
        for (a, b) in g_serial.iter().zip(g_sharded.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
        // And sharded evaluation is reproducible for a fixed shard count.
        let (l2, g2) = net.gradient_sharded(&batch, 4).unwrap();
        assert_eq!(l_sharded.to_bits(), l2.to_bits());
        for (a, b) in g_sharded.iter().zip(g2.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    /// Central finite differences over every parameter of a small network.
    #[allow(clippy::needless_range_loop)]
    fn finite_difference_check(shape: NetworkShape, seed: u64, steps: usize) -> f64 {
        let mut net = MpmNetwork::new(shape, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
        let batch: Vec<(Vec<Vec<f64>>, usize)> = (0..3)
            .map(|_| {
                let rows: Vec<Vec<f64>> = (0..steps)
                    .map(|_| {
                        (0..shape.input)
                            .map(|_| rng.random_range(-1.0..1.0))
                            .collect()
                    })
                    .collect();
                (rows, rng.random_range(0..shape.classes))
            })
            .collect();
        let (_, analytic) = net.gradient(&batch).unwrap();
        let eps = 1e-5;
        let mut worst = 0.0f64;
        for idx in 0..net.param_count() {
            let original = net.params()[idx];
            net.params_mut()[idx] = original + eps;
            let (loss_plus, _) = net.gradient(&batch).unwrap();
            net.params_mut()[idx] = original - eps;
            let (loss_minus, _) = net.gradient(&batch).unwrap();
            net.params_mut()[idx] = original;
            let numeric = (loss_plus - loss_minus) / (2.0 * eps);
            let denom = analytic[idx].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic[idx] - numeric).abs() / denom);
        }
        worst
    }

    #[test]
    fn gradient_matches_finite_differences_small_net() {
        let shape = NetworkShape {
            input: 4,
            hidden: 3,
            classes: 2,
            layers: 2,
        };
        let worst = finite_difference_check(shape, 5, 4);
        assert!(worst < 1e-4, "max relative error {worst}");
    }

    #[test]
    fn bidirectional_symmetry_under_time_reversal() {
        let shape = NetworkShape {
            input: 5,
            hidden: 4,
            classes: 3,
            layers: 2,
        };
        let net = MpmNetwork::new(shape, 21);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let rows: Vec<Vec<f64>> = (0..9)
            .map(|_| (0..5).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();

        // Swap fwd/bwd parameter blocks and the head's column halves.
        let mut swapped = net.clone();
        for layer in 0..shape.layers {
            for suffix in ["w_ih", "w_hh", "bias"] {
                let f = net.entry(&format!("l{layer}.fwd.{suffix}")).clone();
                let b = net.entry(&format!("l{layer}.bwd.{suffix}")).clone();
                let fwd_data: Vec<f64> = net.params[f.offset..f.offset + f.len()].to_vec();
                let bwd_data: Vec<f64> = net.params[b.offset..b.offset + b.len()].to_vec();
                swapped.params[f.offset..f.offset + f.len()].copy_from_slice(&bwd_data);
                swapped.params[b.offset..b.offset + b.len()].copy_from_slice(&fwd_data);
            }
        }
        // A layer above layer 0 consumes [fwd | bwd] halves of each input
        // row; swapping directions also swaps those halves.
        let h = shape.hidden;
        for layer in 1..shape.layers {
            for dir in ["fwd", "bwd"] {
                let e = net.entry(&format!("l{layer}.{dir}.w_ih")).clone();
                let rows_n = e.dims[0];
                for r in 0..rows_n {
                    for k in 0..h {
                        swapped
                            .params
                            .swap(e.offset + r * 2 * h + k, e.offset + r * 2 * h + h + k);
                    }
                }
            }
        }
        let head = net.entry("head.w").clone();
        for k in 0..shape.classes {
            for j in 0..h {
                swapped
                    .params
                    .swap(head.offset + k * 2 * h + j, head.offset + k * 2 * h + h + j);
            }
        }

        let mut reversed = rows.clone();
        reversed.reverse();
        let original = net.logits_rows(&rows).unwrap();
        let mirrored = swapped.logits_rows(&reversed).unwrap();
        for (a, b) in original.iter().zip(mirrored.iter()) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn classify_output_is_distribution(seed in 0u64..500, value in -2.0f64..2.0) {
            let net = MpmNetwork::new(
                NetworkShape { input: 7, hidden: 5, classes: 4, layers: 2 },
                seed,
            );
            let rows = vec![vec![value; 7]; 6];
            let probs = net.classify_rows(&rows).unwrap();
            let sum: f64 = probs.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            for p in probs {
                prop_assert!(p > 0.0 && p < 1.0);
            }
        }
    }
}
