//! Truth tables and the noise-augmented training view derived from them.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, TAG_NOISE};

/// Exhaustive input/output bit rows of a Boolean function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthTable {
    n_inputs: usize,
    n_outputs: usize,
    inputs: Vec<u8>,
    outputs: Vec<u8>,
}

impl TruthTable {
    pub fn new(n_inputs: usize, n_outputs: usize, inputs: Vec<u8>, outputs: Vec<u8>) -> Result<Self> {
        let rows = 1usize << n_inputs;
        if inputs.len() != rows * n_inputs || outputs.len() != rows * n_outputs {
            return Err(Error::Dimension { expected: rows * n_inputs, got: inputs.len() });
        }
        if inputs.iter().chain(outputs.iter()).any(|&b| b > 1) {
            return Err(Error::Other("truth table entries must be bits".into()));
        }
        Ok(TruthTable { n_inputs, n_outputs, inputs, outputs })
    }

    pub fn rows(&self) -> usize {
        1 << self.n_inputs
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    pub fn input_bit(&self, row: usize, col: usize) -> u8 {
        self.inputs[row * self.n_inputs + col]
    }

    pub fn output_bit(&self, row: usize, col: usize) -> u8 {
        self.outputs[row * self.n_outputs + col]
    }

    pub fn input_row(&self, row: usize) -> &[u8] {
        &self.inputs[row * self.n_inputs..(row + 1) * self.n_inputs]
    }

    pub fn output_row(&self, row: usize) -> &[u8] {
        &self.outputs[row * self.n_outputs..(row + 1) * self.n_outputs]
    }
}

/// Additive Gaussian input noise, `N(0, sigma^2)` per entry.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub sigma: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { sigma: 0.1, seed: 0 }
    }
}

/// A real-valued input batch paired with bit targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub rows: usize,
    pub n_inputs: usize,
    pub n_outputs: usize,
    /// row-major, rows x n_inputs
    pub inputs: Vec<f64>,
    /// row-major, rows x n_outputs
    pub targets: Vec<f64>,
}

/// One epoch's training view: clean rows plus fresh Gaussian noise, row
/// order shuffled. The sample stream is keyed by `(seed, epoch_index)` so
/// the full trajectory replays exactly.
pub fn noisy_epoch(table: &TruthTable, cfg: &NoiseConfig, epoch_index: u64) -> Batch {
    assert!(cfg.sigma >= 0.0, "sigma must be non-negative");
    let rows = table.rows();
    let mut rng = stream(cfg.seed, TAG_NOISE, epoch_index);
    let mut order: Vec<usize> = (0..rows).collect();
    order.shuffle(&mut rng);
    let normal = Normal::new(0.0, cfg.sigma.max(f64::MIN_POSITIVE)).unwrap();
    let mut inputs = Vec::with_capacity(rows * table.n_inputs());
    let mut targets = Vec::with_capacity(rows * table.n_outputs());
    for &r in &order {
        for &b in table.input_row(r) {
            let noise = if cfg.sigma > 0.0 { normal.sample(&mut rng) } else { 0.0 };
            inputs.push(f64::from(b) + noise);
        }
        targets.extend(table.output_row(r).iter().map(|&b| f64::from(b)));
    }
    Batch { rows, n_inputs: table.n_inputs(), n_outputs: table.n_outputs(), inputs, targets }
}

/// Clean, unshuffled rows of the table.
pub fn validation_view(table: &TruthTable) -> Batch {
    let rows = table.rows();
    Batch {
        rows,
        n_inputs: table.n_inputs(),
        n_outputs: table.n_outputs(),
        inputs: table.inputs.iter().map(|&b| f64::from(b)).collect(),
        targets: table.outputs.iter().map(|&b| f64::from(b)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, ModularitySpec};

    fn table() -> TruthTable {
        generate(&ModularitySpec::dense(), 1).unwrap().truth_table().unwrap()
    }

    #[test]
    fn sigma_zero_equals_clean_rows_up_to_shuffle() {
        let t = table();
        let batch = noisy_epoch(&t, &NoiseConfig { sigma: 0.0, seed: 3 }, 0);
        let clean = validation_view(&t);
        let mut got: Vec<Vec<u64>> = (0..batch.rows)
            .map(|r| {
                batch.inputs[r * batch.n_inputs..(r + 1) * batch.n_inputs]
                    .iter()
                    .map(|x| x.to_bits())
                    .collect()
            })
            .collect();
        let mut want: Vec<Vec<u64>> = (0..clean.rows)
            .map(|r| {
                clean.inputs[r * clean.n_inputs..(r + 1) * clean.n_inputs]
                    .iter()
                    .map(|x| x.to_bits())
                    .collect()
            })
            .collect();
        got.sort();
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn noise_stream_is_deterministic() {
        let t = table();
        let cfg = NoiseConfig { sigma: 0.1, seed: 42 };
        assert_eq!(noisy_epoch(&t, &cfg, 7), noisy_epoch(&t, &cfg, 7));
        assert_ne!(noisy_epoch(&t, &cfg, 7).inputs, noisy_epoch(&t, &cfg, 8).inputs);
    }

    #[test]
    fn noise_statistics_match_law_of_large_numbers() {
        // Sample mean within +-0.02 of the clean bit and std within +-0.01
        // of sigma over 1000 epochs, per entry of a 16x4 table.
        let t = table();
        let cfg = NoiseConfig { sigma: 0.1, seed: 9 };
        let rows = t.rows();
        let n = t.n_inputs();
        let epochs = 1000;
        // accumulate per clean (row, col) cell; undo the shuffle by keying on targets
        let mut sums = vec![0.0f64; rows * n];
        let mut sq = vec![0.0f64; rows * n];
        for e in 0..epochs {
            let b = noisy_epoch(&t, &cfg, e);
            for r in 0..rows {
                // identify the clean row by rounding inputs
                let xs = &b.inputs[r * n..(r + 1) * n];
                let mut key = 0usize;
                for &x in xs {
                    key = (key << 1) | usize::from(x > 0.5);
                }
                for (c, &x) in xs.iter().enumerate() {
                    sums[key * n + c] += x;
                    sq[key * n + c] += x * x;
                }
            }
        }
        let m = epochs as f64;
        for r in 0..rows {
            for c in 0..n {
                let mean = sums[r * n + c] / m;
                let var = sq[r * n + c] / m - mean * mean;
                let clean = f64::from(t.input_bit(r, c));
                assert!((mean - clean).abs() < 0.02, "mean {mean} vs {clean}");
                assert!((var.sqrt() - 0.1).abs() < 0.01, "std {}", var.sqrt());
            }
        }
    }

    #[test]
    fn validation_view_is_idempotent() {
        let t = table();
        assert_eq!(validation_view(&t), validation_view(&t));
        assert_eq!(validation_view(&t).inputs[0..4], [0.0, 0.0, 0.0, 0.0]);
    }
}
