//! Iterative unit and edge pruning with a halving/rewind schedule, plus the
//! (p_u, p_e) grid search that picks the sparsest accepted network.
//!
//! Both pruning loops share the same skeleton: raise a cumulative pruning
//! percentage `p` by the current step, threshold scores at the p-th
//! percentile taken over the ORIGINAL parameter count, mask everything not
//! strictly above the threshold, retrain, and keep the result only if
//! validation accuracy stays at or above the dense model's. On failure the
//! model rewinds to the last accepted state and the step is halved; the loop
//! ends once the step falls below the resolution of one unit (or edge).

use serde::{Deserialize, Serialize};

use crate::dataset::{validation_view, NoiseConfig, TruthTable};
use crate::error::{Error, Result};
use crate::mlp::{MaskedMlp, MlpConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PruneConfig {
    /// unit-pruning step, percent of the original hidden-unit count
    pub p_u: f64,
    /// edge-pruning step, percent of the original edge count
    pub p_e: f64,
    /// accuracy the sparse model must preserve (the dense model's score)
    pub accuracy_target: f64,
    pub max_rounds: usize,
}

impl Default for PruneConfig {
    fn default() -> Self {
        PruneConfig { p_u: 50.0, p_e: 2.0, accuracy_target: 0.99, max_rounds: 200 }
    }
}

impl PruneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_u > 0.0 && self.p_u <= 100.0 && self.p_e > 0.0 && self.p_e <= 100.0) {
            return Err(Error::Precondition("pruning steps must be in (0, 100]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PruneKind {
    Unit,
    Edge,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PruneRound {
    pub round: usize,
    pub kind: PruneKind,
    pub p_attempted: f64,
    pub accuracy_after_retrain: f64,
    pub accepted: bool,
    pub density_after: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PruneTrace {
    pub rounds: Vec<PruneRound>,
}

impl PruneTrace {
    pub fn accepted_rounds(&self) -> impl Iterator<Item = &PruneRound> {
        self.rounds.iter().filter(|r| r.accepted)
    }
}

/// Nearest-rank percentile: the k-th smallest score with `k = ceil(p/100 n)`,
/// clamped to the list.
fn percentile_threshold(scores: &[f64], p: f64) -> f64 {
    let n = scores.len();
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let k = ((p / 100.0 * n as f64).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

fn check_dense(mlp: &MaskedMlp, table: &TruthTable, cfg: &PruneConfig) -> Result<()> {
    let acc = mlp.bitwise_accuracy(&validation_view(table))?;
    if acc < cfg.accuracy_target {
        return Err(Error::Precondition(format!(
            "model accuracy {acc} below pruning target {}",
            cfg.accuracy_target
        )));
    }
    Ok(())
}

fn prune_loop<FScore, FApply>(
    mlp: &MaskedMlp,
    table: &TruthTable,
    noise: &NoiseConfig,
    train_cfg: &MlpConfig,
    cfg: &PruneConfig,
    kind: PruneKind,
    original_count: usize,
    mut score: FScore,
    mut apply: FApply,
) -> Result<(MaskedMlp, PruneTrace)>
where
    FScore: FnMut(&MaskedMlp) -> Result<Vec<f64>>,
    FApply: FnMut(&mut MaskedMlp, &[f64], f64),
{
    cfg.validate()?;
    check_dense(mlp, table, cfg)?;
    let val = validation_view(table);
    let mut current = mlp.clone();
    let mut trace = PruneTrace::default();
    let mut p = 0.0;
    let mut step = match kind {
        PruneKind::Unit => cfg.p_u,
        PruneKind::Edge => cfg.p_e,
    };
    let p_min = 100.0 / original_count as f64;
    let mut round = 0usize;
    while step >= p_min && round < cfg.max_rounds {
        p += step;
        let scores = score(&current)?;
        debug_assert_eq!(scores.len(), original_count);
        let t = percentile_threshold(&scores, p);
        let mut candidate = current.clone();
        apply(&mut candidate, &scores, t);
        // retrain from the surviving weights; the noise stream advances per
        // round so successive retrains do not replay identical epochs
        candidate.retrain(table, noise, train_cfg, ((round + 1) * train_cfg.epochs) as u64)?;
        let acc = candidate.bitwise_accuracy(&val)?;
        let accepted = acc >= cfg.accuracy_target;
        if accepted {
            current = candidate;
        } else {
            p -= step;
            step /= 2.0;
        }
        trace.rounds.push(PruneRound {
            round,
            kind,
            p_attempted: p + if accepted { 0.0 } else { step * 2.0 },
            accuracy_after_retrain: acc,
            accepted,
            density_after: current.density(),
        });
        round += 1;
    }
    Ok((current, trace))
}

/// Loss-sensitivity unit pruning. Scores cover every original hidden unit
/// (dead units score 0); a unit survives only if its score strictly exceeds
/// the cumulative-percentile threshold.
pub fn prune_units(
    mlp: &MaskedMlp,
    table: &TruthTable,
    noise: &NoiseConfig,
    train_cfg: &MlpConfig,
    cfg: &PruneConfig,
) -> Result<(MaskedMlp, PruneTrace)> {
    let total_units = mlp.total_hidden_units();
    let val = validation_view(table);
    let score_mode = train_cfg.score_mode;
    prune_loop(
        mlp,
        table,
        noise,
        train_cfg,
        cfg,
        PruneKind::Unit,
        total_units,
        move |m| {
            let per_layer = m.loss_sensitivity_scores(&val, score_mode)?;
            Ok(per_layer.into_iter().flatten().collect())
        },
        |m, scores, t| {
            let mut idx = 0;
            for h in 0..m.n_hidden_layers() {
                for u in 0..m.unit_alive(h).len() {
                    if scores[idx] <= t && m.unit_alive(h)[u] {
                        m.prune_unit(h, u);
                    }
                    idx += 1;
                }
            }
        },
    )
}

/// Weight-magnitude edge pruning over the original edge count (masked edges
/// score 0 and stay masked).
pub fn prune_edges(
    mlp: &MaskedMlp,
    table: &TruthTable,
    noise: &NoiseConfig,
    train_cfg: &MlpConfig,
    cfg: &PruneConfig,
) -> Result<(MaskedMlp, PruneTrace)> {
    let total_edges = mlp.total_edges();
    prune_loop(
        mlp,
        table,
        noise,
        train_cfg,
        cfg,
        PruneKind::Edge,
        total_edges,
        |m| {
            let mut v = Vec::with_capacity(total_edges);
            for l in 0..m.n_layers() {
                v.extend(m.weights_of(l).iter().map(|w| w.abs()));
            }
            Ok(v)
        },
        |m, scores, t| {
            let mut idx = 0;
            for l in 0..m.n_layers() {
                let (w_in, w_out) = (m.widths()[l], m.widths()[l + 1]);
                for o in 0..w_out {
                    for i in 0..w_in {
                        if scores[idx] <= t && m.mask_of(l)[o * w_in + i] == 1 {
                            m.prune_edge(l, o, i);
                        }
                        idx += 1;
                    }
                }
            }
        },
    )
}

/// Unit pruning followed by edge pruning; traces concatenated.
pub fn sculpt(
    mlp: &MaskedMlp,
    table: &TruthTable,
    noise: &NoiseConfig,
    train_cfg: &MlpConfig,
    cfg: &PruneConfig,
) -> Result<(MaskedMlp, PruneTrace)> {
    let (unit_pruned, mut trace) = prune_units(mlp, table, noise, train_cfg, cfg)?;
    let (sparse, edge_trace) = prune_edges(&unit_pruned, table, noise, train_cfg, cfg)?;
    trace.rounds.extend(edge_trace.rounds);
    Ok((sparse, trace))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridConfig {
    pub p_u_grid: Vec<f64>,
    pub p_e_grid: Vec<f64>,
    pub accuracy_target: f64,
    pub max_rounds: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            p_u_grid: (1..=14).map(|k| 5.0 * k as f64).collect(),
            p_e_grid: vec![0.5, 1.0, 1.5, 2.0, 2.5],
            accuracy_target: 0.99,
            max_rounds: 200,
        }
    }
}

impl GridConfig {
    /// A 3x2 sub-grid that keeps the high-step cells which tend to win the
    /// full search, for time-budgeted sweeps.
    pub fn reduced() -> Self {
        GridConfig {
            p_u_grid: vec![40.0, 55.0, 70.0],
            p_e_grid: vec![1.0, 2.0],
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridCell {
    pub p_u: f64,
    pub p_e: f64,
    pub density: f64,
    pub alive_units: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct GridOutcome {
    /// sparsest accepted model, None when the dense model misses the target
    pub best: Option<MaskedMlp>,
    pub best_cell: Option<GridCell>,
    pub cells: Vec<GridCell>,
}

/// Sculpt every (p_u, p_e) cell starting from the same trained dense model
/// and keep the lowest-density result. Ties prefer fewer alive units, then
/// earlier grid order. A dense model below the accuracy target yields a
/// failed outcome instead of an error.
pub fn grid_search(
    dense: &MaskedMlp,
    table: &TruthTable,
    noise: &NoiseConfig,
    train_cfg: &MlpConfig,
    grid: &GridConfig,
) -> Result<GridOutcome> {
    if grid.p_u_grid.is_empty() || grid.p_e_grid.is_empty() {
        return Err(Error::Precondition("pruning grids must be nonempty".into()));
    }
    let val = validation_view(table);
    if dense.bitwise_accuracy(&val)? < grid.accuracy_target {
        return Ok(GridOutcome { best: None, best_cell: None, cells: Vec::new() });
    }
    let mut jobs = Vec::new();
    for &p_u in &grid.p_u_grid {
        for &p_e in &grid.p_e_grid {
            jobs.push(PruneConfig {
                p_u,
                p_e,
                accuracy_target: grid.accuracy_target,
                max_rounds: grid.max_rounds,
            });
        }
    }
    // cells run sequentially: parallelism lives at the trial level, keeping
    // a trial's execution single-threaded
    let results: Vec<Result<(MaskedMlp, GridCell)>> = jobs
        .iter()
        .map(|cfg| {
            let (model, _) = sculpt(dense, table, noise, train_cfg, cfg)?;
            let accuracy = model.bitwise_accuracy(&val)?;
            let cell = GridCell {
                p_u: cfg.p_u,
                p_e: cfg.p_e,
                density: model.density(),
                alive_units: model.alive_hidden_units(),
                accuracy,
            };
            Ok((model, cell))
        })
        .collect();
    let mut best: Option<MaskedMlp> = None;
    let mut best_cell: Option<GridCell> = None;
    let mut cells = Vec::with_capacity(results.len());
    for r in results {
        let (model, cell) = r?;
        let better = match &best_cell {
            None => true,
            Some(b) => {
                cell.density < b.density
                    || (cell.density == b.density && cell.alive_units < b.alive_units)
            }
        };
        if better {
            best = Some(model);
            best_cell = Some(cell.clone());
        }
        cells.push(cell);
    }
    Ok(GridOutcome { best, best_cell, cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, ModularitySpec};

    fn trained_dense(widths: Vec<usize>, seed: u64) -> (MaskedMlp, TruthTable, NoiseConfig, MlpConfig) {
        let table = generate(&ModularitySpec::separable(1), seed).unwrap().truth_table().unwrap();
        let cfg = MlpConfig::new(widths, seed);
        let noise = NoiseConfig { sigma: 0.1, seed };
        let mut mlp = MaskedMlp::init(&cfg);
        mlp.train(&table, &noise, &cfg).unwrap();
        (mlp, table, noise, cfg)
    }

    #[test]
    fn percentile_is_nearest_rank() {
        let s = [5.0, 1.0, 3.0, 2.0, 4.0];
        assert_eq!(percentile_threshold(&s, 20.0), 1.0);
        assert_eq!(percentile_threshold(&s, 40.0), 2.0);
        assert_eq!(percentile_threshold(&s, 41.0), 3.0);
        assert_eq!(percentile_threshold(&s, 100.0), 5.0);
        assert_eq!(percentile_threshold(&s, 0.1), 1.0);
    }

    #[test]
    fn dense_below_target_is_a_precondition_error() {
        let table = generate(&ModularitySpec::separable(1), 0).unwrap().truth_table().unwrap();
        let cfg = MlpConfig::new(vec![4, 8, 4], 0);
        let mlp = MaskedMlp::init(&cfg); // untrained
        let err = prune_units(&mlp, &table, &NoiseConfig::default(), &cfg, &PruneConfig::default());
        assert!(err.is_err());
    }

    #[test]
    fn edge_step_below_resolution_returns_input_unchanged() {
        let (mlp, table, noise, cfg) = trained_dense(vec![4, 8, 4], 1);
        let pcfg = PruneConfig { p_e: 100.0 / mlp.total_edges() as f64 * 0.5, ..Default::default() };
        let (out, trace) = prune_edges(&mlp, &table, &noise, &cfg, &pcfg).unwrap();
        assert!(trace.rounds.is_empty());
        assert_eq!(out.density(), 1.0);
    }

    #[test]
    fn dead_unit_is_removed_first_round() {
        let (mut mlp, table, noise, cfg) = trained_dense(vec![4, 12, 4], 2);
        // silence one unit: it can never fire, so its score is 0
        for i in 0..4 {
            mlp.set_weight(0, 5, i, 0.0);
        }
        mlp.set_bias(0, 5, -1.0);
        // retrain so the rest re-converges with the silent unit in place
        mlp.train_offset(&table, &noise, &cfg, 1000).unwrap();
        assert_eq!(mlp.bitwise_accuracy(&validation_view(&table)).unwrap(), 1.0);
        let pcfg = PruneConfig { p_u: 100.0 / 12.0, ..Default::default() };
        let (out, trace) = prune_units(&mlp, &table, &noise, &cfg, &pcfg).unwrap();
        assert!(trace.rounds[0].accepted);
        assert!(!out.unit_alive(0)[5]);
    }

    #[test]
    fn trace_densities_non_increasing_and_accuracy_held() {
        let (mlp, table, noise, cfg) = trained_dense(vec![4, 16, 4], 3);
        let pcfg = PruneConfig::default();
        let (out, trace) = sculpt(&mlp, &table, &noise, &cfg, &pcfg).unwrap();
        let mut last = 1.0;
        for r in trace.accepted_rounds() {
            assert!(r.density_after <= last + 1e-12);
            assert!(r.accuracy_after_retrain >= pcfg.accuracy_target);
            last = r.density_after;
        }
        assert!(out.density() <= 1.0);
        assert_eq!(out.bitwise_accuracy(&validation_view(&table)).unwrap(), 1.0);
    }

    #[test]
    fn masks_are_monotone_within_a_phase() {
        let (mlp, table, noise, cfg) = trained_dense(vec![4, 16, 4], 4);
        let (out, _) = prune_edges(&mlp, &table, &noise, &cfg, &PruneConfig::default()).unwrap();
        // every masked edge in the input stays masked in the output
        for l in 0..mlp.n_layers() {
            for (i, (&a, &b)) in mlp.mask_of(l).iter().zip(out.mask_of(l)).enumerate() {
                assert!(b <= a, "layer {l} edge {i} reappeared");
            }
        }
    }

    #[test]
    fn sculpt_is_deterministic() {
        let (mlp, table, noise, cfg) = trained_dense(vec![4, 12, 4], 5);
        let pcfg = PruneConfig::default();
        let (a, _) = sculpt(&mlp, &table, &noise, &cfg, &pcfg).unwrap();
        let (b, _) = sculpt(&mlp, &table, &noise, &cfg, &pcfg).unwrap();
        assert_eq!(a.weights_of(0), b.weights_of(0));
        assert_eq!(a.mask_of(1), b.mask_of(1));
    }

    #[test]
    fn grid_search_prefers_lowest_density() {
        let (mlp, table, noise, cfg) = trained_dense(vec![4, 12, 4], 6);
        let grid = GridConfig {
            p_u_grid: vec![50.0],
            p_e_grid: vec![1.0, 2.0],
            ..Default::default()
        };
        let out = grid_search(&mlp, &table, &noise, &cfg, &grid).unwrap();
        let best = out.best_cell.unwrap();
        assert!(out.cells.iter().all(|c| best.density <= c.density));
        assert!(best.density < 1.0);
        assert_eq!(best.accuracy, 1.0);
    }

    #[test]
    fn grid_search_untrained_dense_reports_failure() {
        let table = generate(&ModularitySpec::separable(1), 7).unwrap().truth_table().unwrap();
        let cfg = MlpConfig::new(vec![4, 8, 4], 7);
        let mlp = MaskedMlp::init(&cfg);
        let out = grid_search(&mlp, &table, &NoiseConfig::default(), &cfg, &GridConfig::default()).unwrap();
        assert!(out.best.is_none());
        assert!(out.cells.is_empty());
    }
}
