//! Masked multilayer perceptron with hand-derived backpropagation, Adam + L2
//! training, bitwise accuracy, and loss-sensitivity unit scores.
//!
//! Pruning is expressed through binary edge masks and per-unit alive flags.
//! The representation keeps a hard invariant: a masked weight is exactly 0.0
//! at all times, and a dead unit has zero bias and all incident masks 0.

use serde::{Deserialize, Serialize};

use crate::dataset::{noisy_epoch, validation_view, Batch, NoiseConfig, TruthTable};
use crate::error::{Error, Result};
use crate::rng::{stream, TAG_INIT};
use rand_distr::{Distribution, Normal};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// How Eq.-style unit scores aggregate the per-sample gradient-activation
/// products over the validation set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum ScoreMode {
    /// Average the signed per-sample products, then take the absolute value.
    #[default]
    MeanThenAbs,
    /// Average the absolute per-sample products.
    AbsThenMean,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpConfig {
    pub layer_widths: Vec<usize>,
    pub seed: u64,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub l2: f64,
    pub accuracy_threshold: f64,
    pub score_mode: ScoreMode,
}

impl MlpConfig {
    pub fn new(layer_widths: Vec<usize>, seed: u64) -> Self {
        MlpConfig {
            layer_widths,
            seed,
            lr: 0.05,
            batch_size: 16,
            epochs: 120,
            l2: 1e-4,
            accuracy_threshold: 1.0,
            score_mode: ScoreMode::MeanThenAbs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 || self.layer_widths.iter().any(|&w| w == 0) {
            return Err(Error::Precondition("layer widths must be >= 1 with input and output layers".into()));
        }
        if self.batch_size == 0 || self.lr <= 0.0 || self.l2 < 0.0 {
            return Err(Error::Precondition("invalid training hyperparameters".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct AdamState {
    pub step: u64,
    pub m_w: Vec<Vec<f64>>,
    pub v_w: Vec<Vec<f64>>,
    pub m_b: Vec<Vec<f64>>,
    pub v_b: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaskedMlp {
    widths: Vec<usize>,
    /// weights[l]: widths[l+1] x widths[l], row-major
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    masks: Vec<Vec<u8>>,
    /// one flag vector per hidden layer
    unit_alive: Vec<Vec<bool>>,
    adam: AdamState,
}

/// Per-epoch training loss and validation bitwise accuracy.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    pub loss: Vec<f64>,
    pub accuracy: Vec<f64>,
}

pub struct Forward {
    /// pre-activations per layer, rows x widths[l+1]
    pub zs: Vec<Vec<f64>>,
    /// activations, index 0 is the input batch; last entry holds logits
    pub activations: Vec<Vec<f64>>,
    pub rows: usize,
}

pub struct Gradients {
    pub dw: Vec<Vec<f64>>,
    pub db: Vec<Vec<f64>>,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Numerically stable `-y ln s(z) - (1-y) ln(1-s(z))`.
fn bce_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

impl MaskedMlp {
    /// Kaiming-initialized dense network: `W ~ N(0, 2/fan_in)`, zero biases,
    /// all masks 1.
    pub fn init(cfg: &MlpConfig) -> Self {
        let widths = cfg.layer_widths.clone();
        let layers = widths.len() - 1;
        let mut rng = stream(cfg.seed, TAG_INIT, 0);
        let mut weights: Vec<Vec<f64>> = Vec::with_capacity(layers);
        let mut biases = Vec::with_capacity(layers);
        let mut masks = Vec::with_capacity(layers);
        for l in 0..layers {
            let fan_in = widths[l];
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).unwrap();
            let count = widths[l + 1] * widths[l];
            weights.push((0..count).map(|_| normal.sample(&mut rng)).collect());
            biases.push(vec![0.0; widths[l + 1]]);
            masks.push(vec![1u8; count]);
        }
        let unit_alive = widths[1..widths.len() - 1].iter().map(|&w| vec![true; w]).collect();
        let adam = AdamState {
            step: 0,
            m_w: weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            v_w: weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            m_b: biases.iter().map(|b| vec![0.0; b.len()]).collect(),
            v_b: biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        };
        MaskedMlp { widths, weights, biases, masks, unit_alive, adam }
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn n_hidden_layers(&self) -> usize {
        self.widths.len() - 2
    }

    pub fn weight(&self, layer: usize, out: usize, inp: usize) -> f64 {
        self.weights[layer][out * self.widths[layer] + inp]
    }

    pub fn weights_of(&self, layer: usize) -> &[f64] {
        &self.weights[layer]
    }

    pub fn mask_of(&self, layer: usize) -> &[u8] {
        &self.masks[layer]
    }

    pub fn unit_alive(&self, hidden_layer: usize) -> &[bool] {
        &self.unit_alive[hidden_layer]
    }

    pub fn adam_step_count(&self) -> u64 {
        self.adam.step
    }

    /// Fraction of originally present weights that remain unmasked.
    pub fn density(&self) -> f64 {
        let total: usize = self.masks.iter().map(|m| m.len()).sum();
        let alive: usize = self.masks.iter().map(|m| m.iter().filter(|&&b| b == 1).count()).sum();
        alive as f64 / total as f64
    }

    pub fn total_edges(&self) -> usize {
        self.masks.iter().map(|m| m.len()).sum()
    }

    pub fn total_hidden_units(&self) -> usize {
        self.unit_alive.iter().map(|v| v.len()).sum()
    }

    pub fn alive_hidden_units(&self) -> usize {
        self.unit_alive.iter().map(|v| v.iter().filter(|&&a| a).count()).sum()
    }

    /// Mask a single edge, zeroing weight and Adam moments.
    pub fn prune_edge(&mut self, layer: usize, out: usize, inp: usize) {
        let idx = out * self.widths[layer] + inp;
        self.masks[layer][idx] = 0;
        self.weights[layer][idx] = 0.0;
        self.adam.m_w[layer][idx] = 0.0;
        self.adam.v_w[layer][idx] = 0.0;
    }

    /// Kill a hidden unit: zero its bias, incoming and outgoing edges.
    pub fn prune_unit(&mut self, hidden_layer: usize, unit: usize) {
        self.unit_alive[hidden_layer][unit] = false;
        let l_in = hidden_layer; // weights into widths[hidden_layer + 1]
        let in_w = self.widths[l_in];
        for i in 0..in_w {
            self.prune_edge(l_in, unit, i);
        }
        let l_out = hidden_layer + 1;
        let out_w = self.widths[l_out + 1];
        for o in 0..out_w {
            self.prune_edge(l_out, o, unit);
        }
        self.biases[l_in][unit] = 0.0;
        self.adam.m_b[l_in][unit] = 0.0;
        self.adam.v_b[l_in][unit] = 0.0;
    }

    pub fn forward(&self, inputs: &[f64], rows: usize) -> Result<Forward> {
        let n = self.widths[0];
        if inputs.len() != rows * n {
            return Err(Error::Dimension { expected: rows * n, got: inputs.len() });
        }
        let layers = self.n_layers();
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(layers + 1);
        activations.push(inputs.to_vec());
        let mut zs = Vec::with_capacity(layers);
        for l in 0..layers {
            let (w_in, w_out) = (self.widths[l], self.widths[l + 1]);
            let a_prev = &activations[l];
            let mut z = vec![0.0; rows * w_out];
            for r in 0..rows {
                let ar = &a_prev[r * w_in..(r + 1) * w_in];
                let zr = &mut z[r * w_out..(r + 1) * w_out];
                for o in 0..w_out {
                    let wrow = &self.weights[l][o * w_in..(o + 1) * w_in];
                    let mut acc = self.biases[l][o];
                    for i in 0..w_in {
                        acc += wrow[i] * ar[i];
                    }
                    zr[o] = acc;
                }
            }
            let a = if l + 1 < layers {
                z.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect()
            } else {
                z.clone() // logits
            };
            zs.push(z);
            activations.push(a);
        }
        Ok(Forward { zs, activations, rows })
    }

    /// Mean over rows of the per-sample bitwise cross-entropy (summed over
    /// output bits).
    pub fn loss(&self, batch: &Batch) -> Result<f64> {
        let fwd = self.forward(&batch.inputs, batch.rows)?;
        let logits = fwd.activations.last().unwrap();
        let mut total = 0.0;
        for (z, y) in logits.iter().zip(batch.targets.iter()) {
            total += bce_logit(*z, *y);
        }
        Ok(total / batch.rows as f64)
    }

    /// Loss gradients w.r.t. every weight and bias, with masked-weight
    /// gradients forced to zero and L2 (`l2 * w`) applied to unmasked
    /// weights only.
    pub fn gradients(&self, batch: &Batch, l2: f64) -> Result<(f64, Gradients)> {
        let fwd = self.forward(&batch.inputs, batch.rows)?;
        let rows = batch.rows;
        let layers = self.n_layers();
        let logits = fwd.activations.last().unwrap();
        let mut loss = 0.0;
        let out_w = *self.widths.last().unwrap();
        let mut delta = vec![0.0; rows * out_w];
        for (i, (&z, &y)) in logits.iter().zip(batch.targets.iter()).enumerate() {
            loss += bce_logit(z, y);
            delta[i] = (sigmoid(z) - y) / rows as f64;
        }
        loss /= rows as f64;

        let mut dw: Vec<Vec<f64>> = self.weights.iter().map(|w| vec![0.0; w.len()]).collect();
        let mut db: Vec<Vec<f64>> = self.biases.iter().map(|b| vec![0.0; b.len()]).collect();
        for l in (0..layers).rev() {
            let (w_in, w_out) = (self.widths[l], self.widths[l + 1]);
            let a_prev = &fwd.activations[l];
            // dW = delta^T . a_prev, db = column sums of delta
            for r in 0..rows {
                let dr = &delta[r * w_out..(r + 1) * w_out];
                let ar = &a_prev[r * w_in..(r + 1) * w_in];
                for o in 0..w_out {
                    let d = dr[o];
                    if d != 0.0 {
                        let wrow = &mut dw[l][o * w_in..(o + 1) * w_in];
                        for i in 0..w_in {
                            wrow[i] += d * ar[i];
                        }
                    }
                    db[l][o] += d;
                }
            }
            for (idx, g) in dw[l].iter_mut().enumerate() {
                if self.masks[l][idx] == 0 {
                    *g = 0.0;
                } else {
                    *g += l2 * self.weights[l][idx];
                }
            }
            if l > 0 {
                // propagate: delta_prev = (delta . W) * relu'(z_prev)
                let z_prev = &fwd.zs[l - 1];
                let mut nd = vec![0.0; rows * w_in];
                for r in 0..rows {
                    let dr = &delta[r * w_out..(r + 1) * w_out];
                    let ndr = &mut nd[r * w_in..(r + 1) * w_in];
                    for o in 0..w_out {
                        let d = dr[o];
                        if d != 0.0 {
                            let wrow = &self.weights[l][o * w_in..(o + 1) * w_in];
                            for i in 0..w_in {
                                ndr[i] += d * wrow[i];
                            }
                        }
                    }
                    let zr = &z_prev[r * w_in..(r + 1) * w_in];
                    for i in 0..w_in {
                        if zr[i] <= 0.0 {
                            ndr[i] = 0.0;
                        }
                    }
                }
                delta = nd;
            }
        }
        Ok((loss, Gradients { dw, db }))
    }

    fn adam_update(&mut self, grads: &Gradients, lr: f64) {
        self.adam.step += 1;
        let t = self.adam.step as i32;
        let bc1 = 1.0 - ADAM_BETA1.powi(t);
        let bc2 = 1.0 - ADAM_BETA2.powi(t);
        for l in 0..self.n_layers() {
            for idx in 0..self.weights[l].len() {
                if self.masks[l][idx] == 0 {
                    continue;
                }
                let g = grads.dw[l][idx];
                let m = &mut self.adam.m_w[l][idx];
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                let v = &mut self.adam.v_w[l][idx];
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                self.weights[l][idx] -= lr * (*m / bc1) / ((*v / bc2).sqrt() + ADAM_EPS);
            }
            let dead = |o: usize| l < self.unit_alive.len() && !self.unit_alive[l][o];
            for o in 0..self.biases[l].len() {
                if dead(o) {
                    continue;
                }
                let g = grads.db[l][o];
                let m = &mut self.adam.m_b[l][o];
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                let v = &mut self.adam.v_b[l][o];
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                self.biases[l][o] -= lr * (*m / bc1) / ((*v / bc2).sqrt() + ADAM_EPS);
            }
        }
    }

    /// Train in place. Each epoch draws a freshly noised, shuffled view of
    /// the table keyed by `(noise.seed, epoch_offset + epoch)` and consumes
    /// it in minibatches of `cfg.batch_size`.
    pub fn train_offset(
        &mut self,
        table: &TruthTable,
        noise: &NoiseConfig,
        cfg: &MlpConfig,
        epoch_offset: u64,
    ) -> Result<TrainHistory> {
        self.fit(table, noise, cfg, epoch_offset, true)
    }

    /// Same schedule as [`train_offset`] but without the per-epoch
    /// validation pass; used for the many retrains inside pruning loops
    /// where only the final model matters.
    pub fn retrain(
        &mut self,
        table: &TruthTable,
        noise: &NoiseConfig,
        cfg: &MlpConfig,
        epoch_offset: u64,
    ) -> Result<()> {
        self.fit(table, noise, cfg, epoch_offset, false)?;
        Ok(())
    }

    fn fit(
        &mut self,
        table: &TruthTable,
        noise: &NoiseConfig,
        cfg: &MlpConfig,
        epoch_offset: u64,
        with_history: bool,
    ) -> Result<TrainHistory> {
        cfg.validate()?;
        if self.widths[0] != table.n_inputs() || *self.widths.last().unwrap() != table.n_outputs() {
            return Err(Error::Dimension { expected: table.n_inputs(), got: self.widths[0] });
        }
        let val = if with_history { Some(validation_view(table)) } else { None };
        let mut history = TrainHistory::default();
        for epoch in 0..cfg.epochs {
            let ep = noisy_epoch(table, noise, epoch_offset + epoch as u64);
            let mut epoch_loss = 0.0;
            let mut seen = 0usize;
            let mut start = 0usize;
            while start < ep.rows {
                let end = (start + cfg.batch_size).min(ep.rows);
                let rows = end - start;
                let chunk = Batch {
                    rows,
                    n_inputs: ep.n_inputs,
                    n_outputs: ep.n_outputs,
                    inputs: ep.inputs[start * ep.n_inputs..end * ep.n_inputs].to_vec(),
                    targets: ep.targets[start * ep.n_outputs..end * ep.n_outputs].to_vec(),
                };
                let (loss, grads) = self.gradients(&chunk, cfg.l2)?;
                if !loss.is_finite() {
                    return Err(Error::Diverged { epoch });
                }
                self.adam_update(&grads, cfg.lr);
                epoch_loss += loss * rows as f64;
                seen += rows;
                start = end;
            }
            if let Some(val) = &val {
                history.loss.push(epoch_loss / seen as f64);
                history.accuracy.push(self.bitwise_accuracy(val)?);
            }
        }
        Ok(history)
    }

    pub fn train(&mut self, table: &TruthTable, noise: &NoiseConfig, cfg: &MlpConfig) -> Result<TrainHistory> {
        self.train_offset(table, noise, cfg, 0)
    }

    /// Fraction of output bits where the thresholded sigmoid prediction
    /// matches the target. Exactly 0.5 predicts 0.
    pub fn bitwise_accuracy(&self, batch: &Batch) -> Result<f64> {
        let fwd = self.forward(&batch.inputs, batch.rows)?;
        let logits = fwd.activations.last().unwrap();
        let correct = logits
            .iter()
            .zip(batch.targets.iter())
            .filter(|(&z, &y)| u8::from(z > 0.0) == y as u8)
            .count();
        Ok(correct as f64 / logits.len() as f64)
    }

    /// Loss-sensitivity score per hidden unit: the absolute (averaged)
    /// per-sample product of the loss gradient w.r.t. the unit's activation
    /// and the activation itself. Dead units score 0.
    pub fn loss_sensitivity_scores(&self, batch: &Batch, mode: ScoreMode) -> Result<Vec<Vec<f64>>> {
        let fwd = self.forward(&batch.inputs, batch.rows)?;
        let rows = batch.rows;
        let layers = self.n_layers();
        let logits = fwd.activations.last().unwrap();
        let out_w = *self.widths.last().unwrap();
        // per-sample gradient of the per-sample loss (no 1/rows here)
        let mut delta: Vec<f64> = logits
            .iter()
            .zip(batch.targets.iter())
            .map(|(&z, &y)| sigmoid(z) - y)
            .collect();
        let mut cur_w = out_w;
        let mut scores: Vec<Vec<f64>> = self.unit_alive.iter().map(|v| vec![0.0; v.len()]).collect();
        for l in (1..layers).rev() {
            let w_in = self.widths[l];
            // dL/da_{l} per sample
            let mut dlda = vec![0.0; rows * w_in];
            for r in 0..rows {
                let dr = &delta[r * cur_w..(r + 1) * cur_w];
                let gr = &mut dlda[r * w_in..(r + 1) * w_in];
                for o in 0..cur_w {
                    let d = dr[o];
                    if d != 0.0 {
                        let wrow = &self.weights[l][o * w_in..(o + 1) * w_in];
                        for i in 0..w_in {
                            gr[i] += d * wrow[i];
                        }
                    }
                }
            }
            let a = &fwd.activations[l];
            let hidden = l - 1;
            for i in 0..w_in {
                if !self.unit_alive[hidden][i] {
                    continue;
                }
                let mut acc = 0.0;
                for r in 0..rows {
                    let prod = dlda[r * w_in + i] * a[r * w_in + i];
                    acc += match mode {
                        ScoreMode::MeanThenAbs => prod,
                        ScoreMode::AbsThenMean => prod.abs(),
                    };
                }
                let mean = acc / rows as f64;
                scores[hidden][i] = match mode {
                    ScoreMode::MeanThenAbs => mean.abs(),
                    ScoreMode::AbsThenMean => mean,
                };
            }
            // propagate for the next hidden layer down
            if l > 1 {
                let z = &fwd.zs[l - 1];
                for r in 0..rows {
                    for i in 0..w_in {
                        let idx = r * w_in + i;
                        dlda[idx] = if z[idx] > 0.0 { dlda[idx] } else { 0.0 };
                    }
                }
                delta = dlda;
                cur_w = w_in;
            }
        }
        Ok(scores)
    }

    /// Dataset loss with one hidden unit's post-activation multiplied by
    /// `scale` (finite-difference probe for the sensitivity scores).
    pub fn loss_with_unit_scale(
        &self,
        batch: &Batch,
        hidden_layer: usize,
        unit: usize,
        scale: f64,
    ) -> Result<f64> {
        let rows = batch.rows;
        let layers = self.n_layers();
        let mut a = batch.inputs.to_vec();
        for l in 0..layers {
            let (w_in, w_out) = (self.widths[l], self.widths[l + 1]);
            let mut z = vec![0.0; rows * w_out];
            for r in 0..rows {
                let ar = &a[r * w_in..(r + 1) * w_in];
                for o in 0..w_out {
                    let wrow = &self.weights[l][o * w_in..(o + 1) * w_in];
                    let mut acc = self.biases[l][o];
                    for i in 0..w_in {
                        acc += wrow[i] * ar[i];
                    }
                    z[r * w_out + o] = acc;
                }
            }
            if l + 1 < layers {
                a = z.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
                if l == hidden_layer {
                    for r in 0..rows {
                        a[r * w_out + unit] *= scale;
                    }
                }
            } else {
                a = z;
            }
        }
        let mut total = 0.0;
        for (z, y) in a.iter().zip(batch.targets.iter()) {
            total += bce_logit(*z, *y);
        }
        Ok(total / rows as f64)
    }

    /// Test/analysis hook: overwrite one weight (respects the mask).
    pub fn set_weight(&mut self, layer: usize, out: usize, inp: usize, value: f64) {
        let idx = out * self.widths[layer] + inp;
        if self.masks[layer][idx] == 1 {
            self.weights[layer][idx] = value;
        }
    }

    pub fn set_bias(&mut self, layer: usize, out: usize, value: f64) {
        self.biases[layer][out] = value;
    }

    /// Checks the masked-weight invariant; used by tests and after
    /// checkpoint loads.
    pub fn check_invariants(&self) -> Result<()> {
        for l in 0..self.n_layers() {
            for (idx, &m) in self.masks[l].iter().enumerate() {
                if m == 0 && self.weights[l][idx] != 0.0 {
                    return Err(Error::Precondition(format!("masked weight nonzero at layer {l} idx {idx}")));
                }
            }
        }
        for (h, alive) in self.unit_alive.iter().enumerate() {
            for (u, &ok) in alive.iter().enumerate() {
                if !ok && self.biases[h][u] != 0.0 {
                    return Err(Error::Precondition(format!("dead unit ({h},{u}) has nonzero bias")));
                }
            }
        }
        Ok(())
    }
}
