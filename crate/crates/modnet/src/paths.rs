//! Structural probes on a (possibly sparse) MLP: summed edge-weight-magnitude
//! products over input-output paths, input-separability hypothesis tests, and
//! the per-layer coverage count of units needed to carry a given share of the
//! total path mass.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::MaskedMlp;
use crate::stats::{welch_one_sided, WelchResult};

/// `pi[j * n_inputs + i]` is the sum over all paths from input `i` to output
/// `j` of the product of absolute weights along the path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathProductMatrix {
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub pi: Vec<f64>,
}

impl PathProductMatrix {
    pub fn get(&self, input: usize, output: usize) -> f64 {
        self.pi[output * self.n_inputs + input]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityTest {
    pub reject: bool,
    pub alpha: f64,
    pub result: WelchResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    /// 1-based hidden layer index
    pub layer: usize,
    pub percent: f64,
    pub n_units: usize,
    /// per-unit contributions sorted descending (alive units only)
    pub contributions: Vec<f64>,
}

fn abs_row_times(mlp: &MaskedMlp, layer: usize, acc: &[f64], acc_rows: usize) -> Vec<f64> {
    // acc: acc_rows x widths[layer+1]; multiply on the right by |W_layer|
    // (widths[layer+1] x widths[layer]) giving acc_rows x widths[layer].
    let k = mlp.widths()[layer + 1];
    let n = mlp.widths()[layer];
    let w = mlp.weights_of(layer);
    let mut out = vec![0.0; acc_rows * n];
    for r in 0..acc_rows {
        for kk in 0..k {
            let a = acc[r * k + kk];
            if a != 0.0 {
                let wrow = &w[kk * n..(kk + 1) * n];
                let orow = &mut out[r * n..(r + 1) * n];
                for i in 0..n {
                    orow[i] += a * wrow[i].abs();
                }
            }
        }
    }
    out
}

/// Product of absolute suffix weight matrices `|W_L| … |W_{from+1}|`,
/// shape n_outputs x widths[from+1]. `from = 0` yields the full π matrix's
/// factor down to the first hidden layer.
fn suffix_product(mlp: &MaskedMlp, down_to_layer: usize) -> Vec<f64> {
    let layers = mlp.n_layers();
    let n_out = *mlp.widths().last().unwrap();
    let top = layers - 1;
    let mut acc: Vec<f64> = mlp.weights_of(top).iter().map(|w| w.abs()).collect();
    for l in (down_to_layer..top).rev() {
        acc = abs_row_times(mlp, l, &acc, n_out);
    }
    acc
}

/// π matrix: `|W_L| · … · |W_1|`, equal to the sum over every input→output
/// path of the product of absolute edge weights (masked weights are zero and
/// contribute nothing).
pub fn path_product_matrix(mlp: &MaskedMlp) -> PathProductMatrix {
    let pi = suffix_product(mlp, 0);
    PathProductMatrix {
        n_inputs: mlp.widths()[0],
        n_outputs: *mlp.widths().last().unwrap(),
        pi,
    }
}

/// Welch's test on `{π(i, j) : i ∈ A, j ∈ other}` (sample 1) versus
/// `{π(i, j) : i ∈ A, j ∈ own}` (sample 2), alternative mean1 < mean2.
/// Rejecting says the A inputs reach their own outputs with significantly
/// more path mass than the other module's outputs.
pub fn input_separability_test(
    mlp: &MaskedMlp,
    inputs_a: &[usize],
    outputs_own: &[usize],
    outputs_other: &[usize],
    alpha: f64,
) -> Result<SeparabilityTest> {
    if inputs_a.is_empty() || outputs_own.is_empty() || outputs_other.is_empty() {
        return Err(Error::Precondition("index sets must be nonempty".into()));
    }
    if outputs_own.iter().any(|o| outputs_other.contains(o)) {
        return Err(Error::Precondition("output sets must be disjoint".into()));
    }
    let pi = path_product_matrix(mlp);
    let gather = |outs: &[usize]| -> Vec<f64> {
        let mut v = Vec::with_capacity(inputs_a.len() * outs.len());
        for &i in inputs_a {
            for &j in outs {
                v.push(pi.get(i, j));
            }
        }
        v
    };
    let other = gather(outputs_other);
    let own = gather(outputs_own);
    let result = welch_one_sided(&other, &own)?;
    Ok(SeparabilityTest { reject: result.p < alpha, alpha, result })
}

/// Minimum number of layer-`hidden_layer` units (1-based) whose descending
/// path contributions to the outputs reach `percent` of the layer total.
pub fn layer_coverage(mlp: &MaskedMlp, hidden_layer: usize, percent: f64) -> Result<CoverageResult> {
    let n_hidden = mlp.n_hidden_layers();
    if hidden_layer == 0 || hidden_layer > n_hidden {
        return Err(Error::Precondition(format!("hidden layer {hidden_layer} out of range 1..={n_hidden}")));
    }
    if !(percent > 0.0 && percent <= 100.0) {
        return Err(Error::Precondition("percent must be in (0, 100]".into()));
    }
    // suffix product down to (but not including) weight layer `hidden_layer`
    let suffix = suffix_product(mlp, hidden_layer);
    let width = mlp.widths()[hidden_layer];
    let n_out = *mlp.widths().last().unwrap();
    let alive = mlp.unit_alive(hidden_layer - 1);
    let mut contributions: Vec<f64> = (0..width)
        .filter(|&i| alive[i])
        .map(|i| (0..n_out).map(|j| suffix[j * width + i]).sum())
        .collect();
    contributions.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let total: f64 = contributions.iter().sum();
    if total == 0.0 {
        return Ok(CoverageResult { layer: hidden_layer, percent, n_units: 0, contributions });
    }
    let target = percent / 100.0 * total;
    let mut acc = 0.0;
    let mut n_units = contributions.len();
    for (k, &c) in contributions.iter().enumerate() {
        acc += c;
        if acc >= target {
            n_units = k + 1;
            break;
        }
    }
    Ok(CoverageResult { layer: hidden_layer, percent, n_units, contributions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::MlpConfig;

    fn net_221() -> MaskedMlp {
        // W1 = [[1,2],[3,4]], W2 = [[5,6]]
        let cfg = MlpConfig::new(vec![2, 2, 1], 0);
        let mut mlp = MaskedMlp::init(&cfg);
        mlp.set_weight(0, 0, 0, 1.0);
        mlp.set_weight(0, 0, 1, 2.0);
        mlp.set_weight(0, 1, 0, 3.0);
        mlp.set_weight(0, 1, 1, 4.0);
        mlp.set_weight(1, 0, 0, 5.0);
        mlp.set_weight(1, 0, 1, 6.0);
        mlp
    }

    #[test]
    fn two_layer_example() {
        let pi = path_product_matrix(&net_221());
        assert_eq!(pi.get(0, 0), 23.0);
        assert_eq!(pi.get(1, 0), 34.0);
    }

    #[test]
    fn single_layer_is_abs_weights() {
        let cfg = MlpConfig::new(vec![3, 2], 1);
        let mlp = MaskedMlp::init(&cfg);
        let pi = path_product_matrix(&mlp);
        for o in 0..2 {
            for i in 0..3 {
                assert_eq!(pi.get(i, o), mlp.weight(0, o, i).abs());
            }
        }
    }

    #[test]
    fn fully_masked_middle_layer_zeroes_pi() {
        let cfg = MlpConfig::new(vec![2, 3, 2], 2);
        let mut mlp = MaskedMlp::init(&cfg);
        for u in 0..3 {
            mlp.prune_unit(0, u);
        }
        let pi = path_product_matrix(&mlp);
        assert!(pi.pi.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sign_flip_invariance() {
        let mut a = net_221();
        let pi0 = path_product_matrix(&a);
        a.set_weight(0, 1, 0, -3.0);
        a.set_weight(1, 0, 1, -6.0);
        assert_eq!(path_product_matrix(&a), pi0);
    }

    #[test]
    fn separability_rejects_on_exact_block_structure() {
        // 4 inputs, 4 outputs; inputs 0,1 only reach outputs 0,1
        let cfg = MlpConfig::new(vec![4, 4], 3);
        let mut mlp = MaskedMlp::init(&cfg);
        for o in 0..4 {
            for i in 0..4 {
                let same = (o < 2) == (i < 2);
                if same {
                    mlp.set_weight(0, o, i, 1.0 + 0.1 * (o + i) as f64);
                } else {
                    mlp.prune_edge(0, o, i);
                }
            }
        }
        let t = input_separability_test(&mlp, &[0, 1], &[0, 1], &[2, 3], 0.05).unwrap();
        assert!(t.reject, "p = {}", t.result.p);
    }

    #[test]
    fn uniform_pi_does_not_reject() {
        let cfg = MlpConfig::new(vec![4, 4], 4);
        let mut mlp = MaskedMlp::init(&cfg);
        for o in 0..4 {
            for i in 0..4 {
                mlp.set_weight(0, o, i, 1.0);
            }
        }
        let t = input_separability_test(&mlp, &[0, 1], &[0, 1], &[2, 3], 0.05).unwrap();
        assert!(!t.reject);
        assert_eq!(t.result.p, 0.5);
    }

    #[test]
    fn disjointness_precondition() {
        let mlp = net_221();
        assert!(input_separability_test(&mlp, &[0], &[0], &[0], 0.05).is_err());
        assert!(input_separability_test(&mlp, &[], &[0], &[1], 0.05).is_err());
    }

    #[test]
    fn coverage_equal_contributions() {
        // 4 hidden units, each contributing equally
        let cfg = MlpConfig::new(vec![2, 4, 1], 5);
        let mut mlp = MaskedMlp::init(&cfg);
        for u in 0..4 {
            mlp.set_weight(1, 0, u, 1.0);
        }
        let c = layer_coverage(&mlp, 1, 90.0).unwrap();
        assert_eq!(c.n_units, 4); // 3 units cover only 75%
        let c = layer_coverage(&mlp, 1, 75.0).unwrap();
        assert_eq!(c.n_units, 3);
    }

    #[test]
    fn coverage_dominant_unit() {
        let cfg = MlpConfig::new(vec![2, 4, 1], 6);
        let mut mlp = MaskedMlp::init(&cfg);
        for (u, w) in [0.9, 0.05, 0.03, 0.02].iter().enumerate() {
            mlp.set_weight(1, 0, u, *w);
        }
        let c = layer_coverage(&mlp, 1, 90.0).unwrap();
        assert_eq!(c.n_units, 1);
        assert_eq!(c.contributions[0], 0.9);
    }

    #[test]
    fn coverage_monotone_in_percent() {
        let cfg = MlpConfig::new(vec![4, 6, 5, 4], 7);
        let mlp = MaskedMlp::init(&cfg);
        for layer in 1..=2 {
            let mut prev = 0;
            for p in [10.0, 30.0, 50.0, 70.0, 90.0, 100.0] {
                let n = layer_coverage(&mlp, layer, p).unwrap().n_units;
                assert!(n >= prev);
                prev = n;
            }
        }
    }

    #[test]
    fn coverage_dead_layer_degenerates() {
        let cfg = MlpConfig::new(vec![2, 3, 1], 8);
        let mut mlp = MaskedMlp::init(&cfg);
        for u in 0..3 {
            mlp.prune_unit(0, u);
        }
        let c = layer_coverage(&mlp, 1, 90.0).unwrap();
        assert_eq!(c.n_units, 0);
        assert!(c.contributions.is_empty());
    }

    #[test]
    fn matrix_product_matches_path_enumeration() {
        // brute-force all input->output paths on small random nets
        for seed in 0..8u64 {
            let widths = match seed % 4 {
                0 => vec![3, 4, 2],
                1 => vec![2, 5, 3, 2],
                2 => vec![4, 3, 3, 4],
                _ => vec![5, 5, 5, 5],
            };
            let cfg = MlpConfig::new(widths.clone(), seed);
            let mlp = MaskedMlp::init(&cfg);
            let pi = path_product_matrix(&mlp);
            let n_in = widths[0];
            let n_out = *widths.last().unwrap();
            for j in 0..n_out {
                for i in 0..n_in {
                    let mut total = 0.0;
                    // DFS over unit indices layer by layer
                    let mut stack = vec![(0usize, i, 1.0f64)];
                    while let Some((l, u, prod)) = stack.pop() {
                        if l == widths.len() - 1 {
                            if u == j {
                                total += prod;
                            }
                            continue;
                        }
                        for v in 0..widths[l + 1] {
                            stack.push((l + 1, v, prod * mlp.weight(l, v, u).abs()));
                        }
                    }
                    assert!((pi.get(i, j) - total).abs() < 1e-9, "seed {seed} ({i},{j})");
                }
            }
        }
    }
}
