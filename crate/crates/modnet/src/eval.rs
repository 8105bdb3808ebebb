//! Scoring of recovered module hierarchies against ground truth, and the
//! width x depth x seed trial grids that produce success-rate reports.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};

use crate::dataset::{validation_view, NoiseConfig};
use crate::detect::{detect, ModuleHierarchy, DEFAULT_DM, DEFAULT_TM};
use crate::error::{Error, Result};
use crate::graph::{generate, signature_for_depth, HierarchySignature, ModularitySpec};
use crate::mlp::{MaskedMlp, MlpConfig};
use crate::prune::{grid_search, GridConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SuccessFlags {
    /// input units grouped exactly as the true sub-functions group them
    pub input_modules: bool,
    /// output units grouped exactly as the true sub-functions group them
    pub output_modules: bool,
    /// no module mixes terminals of unrelated true modules
    pub middle_separation: bool,
    /// full module-DAG isomorphism, terminals and uses-edges included
    pub exact_structure: bool,
}

fn partition_of_inputs(sig: &HierarchySignature) -> BTreeSet<BTreeSet<usize>> {
    sig.modules.iter().filter(|m| !m.inputs.is_empty()).map(|m| m.inputs.clone()).collect()
}

fn partition_of_outputs(sig: &HierarchySignature) -> BTreeSet<BTreeSet<usize>> {
    sig.modules.iter().filter(|m| !m.outputs.is_empty()).map(|m| m.outputs.clone()).collect()
}

fn found_as_signature(found: &ModuleHierarchy) -> HierarchySignature {
    HierarchySignature {
        modules: found
            .modules
            .iter()
            .map(|m| crate::graph::SigModule {
                id: m.id,
                level: m.level,
                inputs: m.inputs.iter().copied().collect(),
                outputs: m.outputs.iter().copied().collect(),
            })
            .collect(),
        uses: found.uses.clone(),
    }
}

fn reach_closure(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut r = vec![vec![false; n]; n];
    for &(a, b) in edges {
        r[a][b] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if r[i][k] {
                for j in 0..n {
                    r[i][j] |= r[k][j];
                }
            }
        }
    }
    r
}

/// DAG isomorphism between two module hierarchies: terminal-owning modules
/// must match by their exact input/output sets, anonymous middles are
/// matched by backtracking, and the uses-edge sets must coincide under the
/// mapping.
fn isomorphic(a: &HierarchySignature, b: &HierarchySignature) -> bool {
    if a.modules.len() != b.modules.len() {
        return false;
    }
    let n = a.modules.len();
    let key = |m: &crate::graph::SigModule| (m.inputs.clone(), m.outputs.clone());
    let mut mapping: Vec<Option<usize>> = vec![None; n];
    let mut used = vec![false; n];
    let mut anon_a = Vec::new();
    let mut anon_b: Vec<usize> = Vec::new();
    let mut b_by_key: HashMap<_, usize> = HashMap::new();
    for (j, m) in b.modules.iter().enumerate() {
        if m.inputs.is_empty() && m.outputs.is_empty() {
            anon_b.push(j);
        } else if b_by_key.insert(key(m), j).is_some() {
            return false; // duplicate terminal signature
        }
    }
    for (i, m) in a.modules.iter().enumerate() {
        if m.inputs.is_empty() && m.outputs.is_empty() {
            anon_a.push(i);
        } else {
            match b_by_key.get(&key(m)) {
                Some(&j) if !used[j] => {
                    mapping[i] = Some(j);
                    used[j] = true;
                }
                _ => return false,
            }
        }
    }
    if anon_a.len() != anon_b.len() {
        return false;
    }
    let ea: BTreeSet<(usize, usize)> = a.uses.iter().copied().collect();
    let eb: BTreeSet<(usize, usize)> = b.uses.iter().copied().collect();
    fn assign(
        idx: usize,
        anon_a: &[usize],
        anon_b: &[usize],
        mapping: &mut Vec<Option<usize>>,
        used: &mut Vec<bool>,
        ea: &BTreeSet<(usize, usize)>,
        eb: &BTreeSet<(usize, usize)>,
    ) -> bool {
        if idx == anon_a.len() {
            let mapped: BTreeSet<(usize, usize)> =
                ea.iter().map(|&(s, d)| (mapping[s].unwrap(), mapping[d].unwrap())).collect();
            return &mapped == eb;
        }
        let i = anon_a[idx];
        for &j in anon_b {
            if !used[j] {
                mapping[i] = Some(j);
                used[j] = true;
                if assign(idx + 1, anon_a, anon_b, mapping, used, ea, eb) {
                    return true;
                }
                mapping[i] = None;
                used[j] = false;
            }
        }
        false
    }
    assign(0, &anon_a, &anon_b, &mut mapping, &mut used, &ea, &eb)
}

/// Evaluate a recovered hierarchy against the ground-truth signature.
pub fn compare(found: &ModuleHierarchy, truth: &HierarchySignature) -> Result<SuccessFlags> {
    let found_sig = found_as_signature(found);
    let f_in: BTreeSet<usize> = found_sig.modules.iter().flat_map(|m| m.inputs.iter().copied()).collect();
    let t_in: BTreeSet<usize> = truth.modules.iter().flat_map(|m| m.inputs.iter().copied()).collect();
    let f_out: BTreeSet<usize> = found_sig.modules.iter().flat_map(|m| m.outputs.iter().copied()).collect();
    let t_out: BTreeSet<usize> = truth.modules.iter().flat_map(|m| m.outputs.iter().copied()).collect();
    if f_in != t_in || f_out != t_out {
        return Err(Error::Comparison("input/output index spaces differ".into()));
    }

    let input_modules = partition_of_inputs(&found_sig) == partition_of_inputs(truth);
    let output_modules = partition_of_outputs(&found_sig) == partition_of_outputs(truth);

    // middle separation: a module touching truth-module a's inputs and
    // truth-module b's outputs is only consistent when truth lets a feed b
    let truth_reach = reach_closure(truth.modules.len(), &truth.uses);
    let mut middle_separation = true;
    'outer: for m in &found_sig.modules {
        let t_in_mods: Vec<usize> = truth
            .modules
            .iter()
            .filter(|t| t.inputs.intersection(&m.inputs).next().is_some())
            .map(|t| t.id)
            .collect();
        let t_out_mods: Vec<usize> = truth
            .modules
            .iter()
            .filter(|t| t.outputs.intersection(&m.outputs).next().is_some())
            .map(|t| t.id)
            .collect();
        for &ta in &t_in_mods {
            for &tb in &t_out_mods {
                if ta != tb && !truth_reach[ta][tb] {
                    middle_separation = false;
                    break 'outer;
                }
            }
        }
    }

    let exact_structure = isomorphic(&found_sig, truth);
    Ok(SuccessFlags { input_modules, output_modules, middle_separation, exact_structure })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialConfig {
    pub spec: ModularitySpec,
    pub widths: Vec<usize>,
    pub depths: Vec<usize>,
    pub seeds: Vec<u64>,
    pub graph_seed: u64,
    pub t_m: f64,
    pub d_m: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub l2: f64,
    pub sigma: f64,
    pub grid: GridConfig,
}

impl TrialConfig {
    pub fn new(spec: ModularitySpec) -> Self {
        TrialConfig {
            spec,
            widths: vec![24, 36, 48],
            depths: vec![1, 2, 3],
            seeds: vec![0, 1, 2, 3],
            graph_seed: 0,
            t_m: DEFAULT_TM,
            d_m: DEFAULT_DM,
            lr: 0.05,
            batch_size: 16,
            epochs: 120,
            l2: 1e-4,
            sigma: 0.1,
            grid: GridConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() || self.depths.is_empty() || self.seeds.is_empty() {
            return Err(Error::Precondition("trial grids must be nonempty".into()));
        }
        self.spec.validate()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialResult {
    pub width: usize,
    pub depth: usize,
    pub seed: u64,
    pub density: f64,
    pub accuracy: f64,
    pub flags: Option<SuccessFlags>,
    /// reason tag for trials that never reached detection
    pub failure: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DepthRates {
    pub depth: usize,
    pub trials: usize,
    pub input_modules: f64,
    pub output_modules: f64,
    pub middle_separation: f64,
    pub exact_structure: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialReport {
    pub trials: Vec<TrialResult>,
    pub per_depth: Vec<DepthRates>,
}

impl TrialReport {
    pub fn success_rate(&self) -> f64 {
        let ok = self.trials.iter().filter(|t| t.flags.map_or(false, |f| f.exact_structure)).count();
        ok as f64 / self.trials.len() as f64
    }
}

fn run_trial(cfg: &TrialConfig, width: usize, depth: usize, seed: u64) -> TrialResult {
    let fail = |reason: &str| TrialResult {
        width,
        depth,
        seed,
        density: f64::NAN,
        accuracy: f64::NAN,
        flags: None,
        failure: Some(reason.to_string()),
    };
    let graph = match generate(&cfg.spec, cfg.graph_seed) {
        Ok(g) => g,
        Err(_) => return fail("graph_generation"),
    };
    let table = match graph.truth_table() {
        Ok(t) => t,
        Err(_) => return fail("truth_table"),
    };
    let mut layer_widths = vec![table.n_inputs()];
    layer_widths.extend(std::iter::repeat(width).take(depth));
    layer_widths.push(table.n_outputs());
    let mut mcfg = MlpConfig::new(layer_widths, seed);
    mcfg.lr = cfg.lr;
    mcfg.batch_size = cfg.batch_size;
    mcfg.epochs = cfg.epochs;
    mcfg.l2 = cfg.l2;
    let noise = NoiseConfig { sigma: cfg.sigma, seed };
    let mut dense = MaskedMlp::init(&mcfg);
    if dense.train(&table, &noise, &mcfg).is_err() {
        return fail("diverged");
    }
    let val = validation_view(&table);
    let dense_acc = dense.bitwise_accuracy(&val).unwrap_or(0.0);
    if dense_acc < cfg.grid.accuracy_target {
        return fail("dense_below_target");
    }
    let outcome = match grid_search(&dense, &table, &noise, &mcfg, &cfg.grid) {
        Ok(o) => o,
        Err(_) => return fail("grid_search"),
    };
    let Some(best) = outcome.best else {
        return fail("no_accepted_cell");
    };
    let cell = outcome.best_cell.unwrap();
    let hierarchy = match detect(&best, cfg.t_m, cfg.d_m) {
        Ok(h) => h,
        Err(_) => return fail("detection"),
    };
    let truth = signature_for_depth(&cfg.spec, depth);
    match compare(&hierarchy, &truth) {
        Ok(flags) => TrialResult {
            width,
            depth,
            seed,
            density: cell.density,
            accuracy: cell.accuracy,
            flags: Some(flags),
            failure: None,
        },
        Err(_) => fail("comparison"),
    }
}

/// Run the full width x depth x seed grid for one function family.
pub fn run_grid(cfg: &TrialConfig) -> Result<TrialReport> {
    cfg.validate()?;
    let mut jobs = Vec::new();
    for &width in &cfg.widths {
        for &depth in &cfg.depths {
            for &seed in &cfg.seeds {
                jobs.push((width, depth, seed));
            }
        }
    }
    let trials: Vec<TrialResult> =
        jobs.par_iter().map(|&(w, d, s)| run_trial(cfg, w, d, s)).collect();
    let mut per_depth = Vec::new();
    for &depth in &cfg.depths {
        let of_depth: Vec<&TrialResult> = trials.iter().filter(|t| t.depth == depth).collect();
        let n = of_depth.len();
        let rate = |sel: fn(&SuccessFlags) -> bool| {
            of_depth.iter().filter(|t| t.flags.map_or(false, |f| sel(&f))).count() as f64 / n as f64
        };
        per_depth.push(DepthRates {
            depth,
            trials: n,
            input_modules: rate(|f| f.input_modules),
            output_modules: rate(|f| f.output_modules),
            middle_separation: rate(|f| f.middle_separation),
            exact_structure: rate(|f| f.exact_structure),
        });
    }
    Ok(TrialReport { trials, per_depth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::Module;
    use crate::graph::canonical_signature;

    fn found_from(parts: Vec<(Vec<usize>, Vec<usize>)>, uses: Vec<(usize, usize)>) -> ModuleHierarchy {
        let modules = parts
            .into_iter()
            .enumerate()
            .map(|(id, (inputs, outputs))| Module { id, level: 0, units: vec![], inputs, outputs })
            .collect();
        ModuleHierarchy { modules, uses, layer_k: vec![] }
    }

    #[test]
    fn identical_hierarchies_pass_all_flags() {
        let truth = canonical_signature(&ModularitySpec::separable(1));
        let found = found_from(
            vec![(vec![0, 1], vec![0, 1]), (vec![2, 3], vec![2, 3])],
            vec![],
        );
        let f = compare(&found, &truth).unwrap();
        assert!(f.input_modules && f.output_modules && f.middle_separation && f.exact_structure);
    }

    #[test]
    fn single_blob_fails_against_separable_truth() {
        let truth = canonical_signature(&ModularitySpec::separable(1));
        let found = found_from(vec![(vec![0, 1, 2, 3], vec![0, 1, 2, 3])], vec![]);
        let f = compare(&found, &truth).unwrap();
        assert!(!f.input_modules && !f.output_modules && !f.exact_structure);
        // one blob mixes unrelated truth modules
        assert!(!f.middle_separation);
    }

    #[test]
    fn depth_deficient_pattern_keeps_input_flag() {
        // truth: two level-1 modules consuming a shared level-0 module
        let truth = canonical_signature(&ModularitySpec::reused(1));
        // found: inputs split correctly but outputs merged into one module
        let found = found_from(
            vec![(vec![0, 1, 2, 3], vec![]), (vec![], vec![0, 1])],
            vec![(0, 1)],
        );
        let f = compare(&found, &truth).unwrap();
        assert!(f.input_modules);
        assert!(!f.output_modules);
        assert!(!f.exact_structure);
    }

    #[test]
    fn mismatched_terminals_is_an_error() {
        let truth = canonical_signature(&ModularitySpec::separable(1));
        let found = found_from(vec![(vec![0, 1], vec![0, 1])], vec![]);
        assert!(compare(&found, &truth).is_err());
    }

    #[test]
    fn anonymous_middles_matched_by_structure() {
        let truth = canonical_signature(&ModularitySpec::hierarchy(1));
        // same shape, module ids permuted, middle module anonymous
        let found = found_from(
            vec![
                (vec![], vec![0]),      // 0: D
                (vec![0, 1], vec![]),   // 1: A
                (vec![], vec![]),       // 2: C (anonymous)
                (vec![2, 3], vec![]),   // 3: B
                (vec![], vec![1]),      // 4: E
            ],
            vec![(1, 2), (3, 2), (2, 0), (2, 4)],
        );
        let f = compare(&found, &truth).unwrap();
        assert!(f.exact_structure, "{f:?}");
    }

    #[test]
    fn wrong_middle_wiring_fails_exact() {
        let truth = canonical_signature(&ModularitySpec::hierarchy(1));
        // same modules but the middle feeds only one head
        let found = found_from(
            vec![
                (vec![0, 1], vec![]),
                (vec![2, 3], vec![]),
                (vec![], vec![]),
                (vec![], vec![0]),
                (vec![], vec![1]),
            ],
            vec![(0, 2), (1, 2), (2, 3), (1, 4)],
        );
        let f = compare(&found, &truth).unwrap();
        assert!(!f.exact_structure);
        assert!(f.input_modules && f.output_modules);
    }

    #[test]
    fn exact_implies_terminal_flags() {
        // property probed on a handful of synthetic pairs
        let specs = [
            ModularitySpec::separable(1),
            ModularitySpec::reused(2),
            ModularitySpec::hierarchy(1),
            ModularitySpec::dense(),
        ];
        for spec in &specs {
            let truth = canonical_signature(spec);
            let found = found_from(
                truth
                    .modules
                    .iter()
                    .map(|m| {
                        (m.inputs.iter().copied().collect(), m.outputs.iter().copied().collect())
                    })
                    .collect(),
                truth.uses.clone(),
            );
            let f = compare(&found, &truth).unwrap();
            assert!(f.exact_structure);
            assert!(f.input_modules && f.output_modules);
        }
    }
}
