//! Module recovery from a sparse network.
//!
//! Pipeline: binary reachability features per unit → average-linkage cosine
//! agglomerative clustering per layer → cluster-count selection combining a
//! partition-quality metric with binomial separability tests → cross-layer
//! merging of clusters into modules, with output units attached by in-edge
//! majority.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::MaskedMlp;

pub const DEFAULT_TM: f64 = -0.2;
pub const DEFAULT_DM: f64 = 0.9;

/// Binary reachability features for the units of one layer.
///
/// Row `r` belongs to layer unit `units[r]`; column `c` is 1 iff a directed
/// path of unmasked edges leads from that unit to the c-th alive unit of any
/// later layer (layer-major order, output units included).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub layer: usize,
    pub units: Vec<usize>,
    pub g: usize,
    pub rows: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub k: usize,
    pub labels: Vec<usize>,
    pub metric: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityOutcome {
    pub o_i: usize,
    pub o_j: usize,
    pub o_ij: usize,
    pub expected: f64,
    pub z: f64,
    pub separable: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Module {
    pub id: usize,
    pub level: usize,
    /// hidden members as (hidden layer 1-based, unit index)
    pub units: Vec<(usize, usize)>,
    pub inputs: Vec<usize>,
    pub outputs: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleHierarchy {
    pub modules: Vec<Module>,
    /// directed module-uses-module edges (src supplies values to dst)
    pub uses: Vec<(usize, usize)>,
    /// chosen cluster count per clustered layer (input layer first)
    pub layer_k: Vec<usize>,
}

// ---------------------------------------------------------------------------
// reachability

fn layer_alive(mlp: &MaskedMlp, layer: usize) -> Vec<bool> {
    let widths = mlp.widths();
    let last = widths.len() - 1;
    if layer == 0 || layer == last {
        vec![true; widths[layer]]
    } else {
        mlp.unit_alive(layer - 1).to_vec()
    }
}

/// Transitive closure over the unmasked-edge DAG; `reach[l][u]` is indexed by
/// global unit id (layer-major over every layer).
fn closure(mlp: &MaskedMlp) -> (Vec<usize>, Vec<Vec<Vec<bool>>>) {
    let widths = mlp.widths();
    let n_layers = widths.len();
    let mut offsets = vec![0usize; n_layers + 1];
    for l in 0..n_layers {
        offsets[l + 1] = offsets[l] + widths[l];
    }
    let total = offsets[n_layers];
    let mut reach: Vec<Vec<Vec<bool>>> =
        widths.iter().map(|&w| vec![vec![false; total]; w]).collect();
    for l in (0..n_layers - 1).rev() {
        let alive_here = layer_alive(mlp, l);
        let alive_next = layer_alive(mlp, l + 1);
        let w_in = widths[l];
        for u in 0..w_in {
            if !alive_here[u] {
                continue;
            }
            for v in 0..widths[l + 1] {
                if alive_next[v] && mlp.mask_of(l)[v * w_in + u] == 1 {
                    let (a, b) = reach.split_at_mut(l + 1);
                    a[l][u][offsets[l + 1] + v] = true;
                    let src = &b[0][v];
                    let dst = &mut a[l][u];
                    for (d, &s) in dst.iter_mut().zip(src.iter()) {
                        *d |= s;
                    }
                }
            }
        }
    }
    (offsets, reach)
}

/// Reachability features for every alive unit of `layer` (0 = input layer,
/// 1.. = hidden layers).
pub fn reachability_features(mlp: &MaskedMlp, layer: usize) -> Result<FeatureMatrix> {
    let n_layers = mlp.widths().len();
    if layer >= n_layers - 1 {
        return Err(Error::Precondition(format!("layer {layer} is not an input or hidden layer")));
    }
    let (offsets, reach) = closure(mlp);
    Ok(features_from_closure(mlp, layer, &offsets, &reach))
}

fn features_from_closure(
    mlp: &MaskedMlp,
    layer: usize,
    offsets: &[usize],
    reach: &[Vec<Vec<bool>>],
) -> FeatureMatrix {
    let n_layers = mlp.widths().len();
    // columns: alive units of every later layer, layer-major
    let mut cols = Vec::new();
    for l in layer + 1..n_layers {
        let alive = layer_alive(mlp, l);
        for (v, &a) in alive.iter().enumerate() {
            if a {
                cols.push(offsets[l] + v);
            }
        }
    }
    let alive = layer_alive(mlp, layer);
    let mut units = Vec::new();
    let mut rows = Vec::new();
    for (u, &a) in alive.iter().enumerate() {
        if a {
            units.push(u);
            rows.push(cols.iter().map(|&c| u8::from(reach[layer][u][c])).collect());
        }
    }
    FeatureMatrix { layer, units, g: cols.len(), rows }
}

// ---------------------------------------------------------------------------
// clustering

fn cosine_distance(a: &[u8], b: &[u8]) -> f64 {
    let mut dot = 0usize;
    let mut na = 0usize;
    let mut nb = 0usize;
    for (&x, &y) in a.iter().zip(b.iter()) {
        dot += (x & y) as usize;
        na += x as usize;
        nb += y as usize;
    }
    if na == 0 && nb == 0 {
        return 0.0;
    }
    if na == 0 || nb == 0 {
        return 1.0;
    }
    1.0 - dot as f64 / ((na as f64).sqrt() * (nb as f64).sqrt())
}

pub fn distance_matrix(rows: &[Vec<u8>]) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let v = cosine_distance(&rows[i], &rows[j]);
            d[i][j] = v;
            d[j][i] = v;
        }
    }
    d
}

/// Full average-linkage merge history. `merges[m]` joins the clusters whose
/// smallest original members are the recorded pair; cutting after `m` merges
/// leaves `n - m` clusters.
#[derive(Debug, Clone)]
pub struct Dendrogram {
    pub n: usize,
    pub merges: Vec<(usize, usize)>,
}

impl Dendrogram {
    /// Cluster labels at a cut with `k` clusters, ids assigned in order of
    /// each cluster's smallest member.
    pub fn labels(&self, k: usize) -> Vec<usize> {
        assert!(k >= 1 && k <= self.n);
        let mut member: Vec<usize> = (0..self.n).collect(); // -> representative
        for &(a, b) in self.merges.iter().take(self.n - k) {
            let (lo, hi) = (a.min(b), a.max(b));
            for m in member.iter_mut() {
                if *m == hi {
                    *m = lo;
                }
            }
        }
        // reindex representatives to 0..k-1 in ascending order
        let mut reps: Vec<usize> = member.clone();
        reps.sort_unstable();
        reps.dedup();
        member.iter().map(|m| reps.binary_search(m).unwrap()).collect()
    }

    /// The two original rows joined by the first merge (the co-clustered
    /// pair at the k = n-1 cut).
    pub fn first_pair(&self) -> Option<(usize, usize)> {
        self.merges.first().copied()
    }
}

/// Bottom-up average-linkage clustering over a precomputed distance matrix.
/// Inter-cluster distance is the mean of pairwise member distances; ties are
/// broken by the lexicographically smallest pair of cluster representatives
/// (each cluster represented by its smallest member).
pub fn agglomerative(dist: &[Vec<f64>]) -> Dendrogram {
    let n = dist.len();
    let mut clusters: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for _ in 1..n {
        let mut best: Option<(f64, usize, usize)> = None;
        let live: Vec<usize> = (0..n).filter(|&i| clusters[i].is_some()).collect();
        for (ai, &a) in live.iter().enumerate() {
            for &b in &live[ai + 1..] {
                let ca = clusters[a].as_ref().unwrap();
                let cb = clusters[b].as_ref().unwrap();
                let mut sum = 0.0;
                for &x in ca {
                    for &y in cb {
                        sum += dist[x][y];
                    }
                }
                let d = sum / (ca.len() * cb.len()) as f64;
                let better = match best {
                    None => true,
                    Some((bd, _, _)) => d < bd,
                };
                if better {
                    best = Some((d, a, b));
                }
            }
        }
        let (_, a, b) = best.unwrap();
        merges.push((a, b));
        let cb = clusters[b].take().unwrap();
        clusters[a].as_mut().unwrap().extend(cb);
        // keep representative = smallest member: slot index a is already the
        // smallest since live indices are cluster minima in ascending order
    }
    Dendrogram { n, merges }
}

// ---------------------------------------------------------------------------
// partition quality (Eq.-style metric)

/// Partition quality over pairwise distances: the diagonal block mass minus
/// squared row mass of the normalized distance matrix, summed over clusters.
/// Lower is better; a single cluster scores exactly 0.
pub fn modularity_metric(dist: &[Vec<f64>], labels: &[usize]) -> f64 {
    let n = dist.len();
    assert_eq!(labels.len(), n);
    let k = labels.iter().max().map_or(0, |m| m + 1);
    if k <= 1 {
        // one cluster: A = [[1]] and 1 - 1^2 = 0 identically
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                total += dist[i][j];
            }
        }
    }
    if total == 0.0 {
        return 0.0;
    }
    // A[ci][cj] = normalized distance mass between clusters ci and cj
    let mut a = vec![vec![0.0; k]; k];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                a[labels[i]][labels[j]] += dist[i][j] / total;
            }
        }
    }
    let mut m = 0.0;
    for ci in 0..k {
        let row: f64 = a[ci].iter().sum();
        m += a[ci][ci] - row * row;
    }
    m
}

// ---------------------------------------------------------------------------
// separability

/// Binomial overlap test between two binary feature vectors of length `g`.
/// Overlap below its independence expectation (positive z) supports the
/// units belonging to separate modules.
pub fn separability(f_i: &[u8], f_j: &[u8], g: usize) -> Result<SeparabilityOutcome> {
    if f_i.len() != g || f_j.len() != g || g == 0 {
        return Err(Error::Dimension { expected: g, got: f_i.len() });
    }
    let o_i = f_i.iter().filter(|&&b| b == 1).count();
    let o_j = f_j.iter().filter(|&&b| b == 1).count();
    let o_ij = f_i.iter().zip(f_j.iter()).filter(|(&a, &b)| a == 1 && b == 1).count();
    let p = (o_i * o_j) as f64 / (g * g) as f64;
    let expected = (o_i * o_j) as f64 / g as f64;
    let var = g as f64 * p * (1.0 - p);
    let z = if var == 0.0 { 0.0 } else { (expected - o_ij as f64) / var.sqrt() };
    let separable = (o_ij as f64) < expected && var > 0.0;
    Ok(SeparabilityOutcome { o_i, o_j, o_ij, expected, z, separable })
}

fn or_rows(rows: &[Vec<u8>], members: &[usize], g: usize) -> Vec<u8> {
    let mut out = vec![0u8; g];
    for &m in members {
        for (o, &b) in out.iter_mut().zip(rows[m].iter()) {
            *o |= b;
        }
    }
    out
}

// ---------------------------------------------------------------------------
// cluster-count selection

#[derive(Debug, Clone)]
pub struct ChosenK {
    pub k: usize,
    pub labels: Vec<usize>,
    /// (k, metric) over the scanned range
    pub scan: Vec<(usize, f64)>,
    pub z_sin: f64,
    pub z_sep: f64,
    pub tests_ran: bool,
}

/// Select the cluster count for one layer's feature rows.
///
/// Scans k = 2..N-1 for the minimum of the partition metric (later k wins
/// ties). When the minimum sits at the edge of the range or stays above
/// `t_m`, two hypothesis tests arbitrate the degenerate cases: the first
/// checks whether the closest unit pair is separable (supporting all-
/// singleton clustering), the second whether the OR-merged two-cluster split
/// is inseparable (supporting a single cluster). A positive z from either
/// picks K = 1 or K = N by the larger score.
pub fn choose_k(features: &FeatureMatrix, t_m: f64) -> Result<ChosenK> {
    let rows = &features.rows;
    let n = rows.len();
    let g = features.g;
    if n == 0 {
        return Err(Error::Precondition("no rows to cluster".into()));
    }
    if n == 1 {
        return Ok(ChosenK { k: 1, labels: vec![0], scan: vec![], z_sin: 0.0, z_sep: 0.0, tests_ran: false });
    }
    if rows.iter().all(|r| r == &rows[0]) {
        // identical features carry no split information; both separability
        // tests degenerate to z = 0 and a single cluster is the only answer
        return Ok(ChosenK { k: 1, labels: vec![0; n], scan: vec![], z_sin: 0.0, z_sep: 0.0, tests_ran: false });
    }
    let dist = distance_matrix(rows);
    let dendro = agglomerative(&dist);
    let mut scan = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for k in 2..n {
        let labels = dendro.labels(k);
        let m = modularity_metric(&dist, &labels);
        scan.push((k, m));
        let better = match best {
            None => true,
            Some((_, bm)) => m <= bm,
        };
        if better {
            best = Some((k, m));
        }
    }
    let (mut k, s) = best.unwrap_or((n, f64::INFINITY));
    let trigger = n <= 2 || k == 2 || k == n - 1 || s > t_m;
    let mut z_sin = 0.0;
    let mut z_sep = 0.0;
    if trigger {
        // Test 1: the pair co-clustered first
        let (a, b) = dendro.first_pair().expect("n >= 2");
        let t1 = separability(&rows[a], &rows[b], g)?;
        z_sep = t1.z;
        // Test 2: OR-merged halves of the 2-cluster cut
        let labels2 = dendro.labels(2);
        let g0: Vec<usize> = (0..n).filter(|&i| labels2[i] == 0).collect();
        let g1: Vec<usize> = (0..n).filter(|&i| labels2[i] == 1).collect();
        let t2 = separability(&or_rows(rows, &g0, g), &or_rows(rows, &g1, g), g)?;
        z_sin = -t2.z;
        // A zero z_sin means the merged halves sit exactly at (or lack) an
        // independence baseline — no separation evidence, which supports a
        // single cluster just like a positive score does.
        if z_sin >= 0.0 && z_sin >= z_sep {
            k = 1;
        } else if z_sep > 0.0 {
            k = n;
        }
    }
    let labels = match k {
        1 => vec![0; n],
        _ if k == n => (0..n).collect(),
        _ => dendro.labels(k),
    };
    Ok(ChosenK { k, labels, scan, z_sin, z_sep, tests_ran: trigger })
}

// ---------------------------------------------------------------------------
// cross-layer merging

#[derive(Debug, Clone)]
pub struct LayerClusters {
    /// network layer index (0 = inputs, 1.. = hidden)
    pub layer: usize,
    /// clusters as lists of unit indices within the layer
    pub groups: Vec<Vec<usize>>,
    pub k: usize,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }
    fn find(&mut self, x: usize) -> usize {
        if self.0[x] != x {
            let r = self.find(self.0[x]);
            self.0[x] = r;
        }
        self.0[x]
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Merge per-layer clusters into modules. Adjacent-layer clusters merge when
/// the edges between them make up at least `dm` of the source cluster's
/// outgoing edges AND of the target cluster's incoming edges. Output units
/// attach to the module supplying at least `dm` of their in-edges, otherwise
/// they become singleton modules. Remaining inter-cluster connectivity turns
/// into uses-edges.
pub fn merge_layers(clusters: &[LayerClusters], mlp: &MaskedMlp, dm: f64) -> Result<ModuleHierarchy> {
    let widths = mlp.widths();
    let n_layers = widths.len();
    let out_layer = n_layers - 1;

    // global cluster ids
    let mut cluster_of: Vec<std::collections::HashMap<usize, usize>> = vec![Default::default(); n_layers];
    let mut cluster_layers: Vec<usize> = Vec::new();
    let mut all_groups: Vec<Vec<usize>> = Vec::new();
    for lc in clusters {
        for group in &lc.groups {
            let id = all_groups.len();
            for &u in group {
                cluster_of[lc.layer].insert(u, id);
            }
            cluster_layers.push(lc.layer);
            all_groups.push(group.clone());
        }
    }
    let n_clusters = all_groups.len();
    let mut uf = UnionFind::new(n_clusters);

    // adjacent-layer edge counts between clusters
    let mut pair_edges: std::collections::HashMap<(usize, usize), usize> = Default::default();
    for l in 0..out_layer.saturating_sub(1) {
        let w_in = widths[l];
        for v in 0..widths[l + 1] {
            let Some(&cj) = cluster_of[l + 1].get(&v) else { continue };
            for u in 0..w_in {
                if mlp.mask_of(l)[v * w_in + u] == 1 {
                    if let Some(&ci) = cluster_of[l].get(&u) {
                        *pair_edges.entry((ci, cj)).or_insert(0) += 1;
                    }
                }
            }
        }
    }
    let mut row_sums = vec![0usize; n_clusters];
    let mut col_sums = vec![0usize; n_clusters];
    for (&(ci, cj), &e) in &pair_edges {
        row_sums[ci] += e;
        col_sums[cj] += e;
    }
    for (&(ci, cj), &e) in &pair_edges {
        let rf = e as f64 / row_sums[ci] as f64;
        let cf = e as f64 / col_sums[cj] as f64;
        if rf >= dm && cf >= dm {
            uf.union(ci, cj);
        }
    }

    // map merged roots to module ids (ascending root order)
    let mut roots: Vec<usize> = (0..n_clusters).map(|c| uf.find(c)).collect();
    let mut uniq = roots.clone();
    uniq.sort_unstable();
    uniq.dedup();
    let module_of_cluster: Vec<usize> =
        roots.iter_mut().map(|r| uniq.binary_search(r).unwrap()).collect();

    let mut modules: Vec<Module> = (0..uniq.len())
        .map(|id| Module { id, level: usize::MAX, units: vec![], inputs: vec![], outputs: vec![] })
        .collect();
    for (c, group) in all_groups.iter().enumerate() {
        let m = &mut modules[module_of_cluster[c]];
        let layer = cluster_layers[c];
        m.level = m.level.min(layer);
        for &u in group {
            if layer == 0 {
                m.inputs.push(u);
            } else {
                m.units.push((layer, u));
            }
        }
    }

    let mut uses: std::collections::BTreeSet<(usize, usize)> = Default::default();
    for &(ci, cj) in pair_edges.keys() {
        let (mi, mj) = (module_of_cluster[ci], module_of_cluster[cj]);
        if mi != mj {
            uses.insert((mi, mj));
        }
    }

    // zero-feature alive units that no cluster claimed: majority in-edge
    // source module; no in-edges at all -> singleton module
    let mut extra_singletons: Vec<(usize, usize)> = Vec::new();
    for layer in 0..out_layer {
        let alive = layer_alive(mlp, layer);
        for (u, &a) in alive.iter().enumerate() {
            if !a || cluster_of[layer].contains_key(&u) {
                continue;
            }
            let mut counts: std::collections::HashMap<usize, usize> = Default::default();
            if layer > 0 {
                let w_in = widths[layer - 1];
                for src in 0..w_in {
                    if mlp.mask_of(layer - 1)[u * w_in + src] == 1 {
                        if let Some(&c) = cluster_of[layer - 1].get(&src) {
                            *counts.entry(module_of_cluster[c]).or_insert(0) += 1;
                        }
                    }
                }
            }
            if let Some((&m, _)) = counts.iter().max_by_key(|(&m, &c)| (c, std::cmp::Reverse(m))) {
                let module = &mut modules[m];
                module.level = module.level.min(layer);
                if layer == 0 {
                    module.inputs.push(u);
                } else {
                    module.units.push((layer, u));
                }
            } else {
                extra_singletons.push((layer, u));
            }
        }
    }

    // output units attach by dominant in-edge module
    let w_in = widths[out_layer - 1];
    let mut output_singletons: Vec<(usize, Vec<usize>)> = Vec::new();
    for o in 0..widths[out_layer] {
        let mut counts: std::collections::HashMap<usize, usize> = Default::default();
        let mut total = 0usize;
        for src in 0..w_in {
            if mlp.mask_of(out_layer - 1)[o * w_in + src] == 1 {
                total += 1;
                if let Some(&c) = cluster_of[out_layer - 1].get(&src) {
                    *counts.entry(module_of_cluster[c]).or_insert(0) += 1;
                }
            }
        }
        let dominant = counts
            .iter()
            .filter(|(_, &c)| total > 0 && c as f64 / total as f64 >= dm)
            .map(|(&m, _)| m)
            .min();
        match dominant {
            Some(m) => modules[m].outputs.push(o),
            None => output_singletons.push((o, counts.keys().copied().collect())),
        }
    }
    for (o, suppliers) in output_singletons {
        let id = modules.len();
        modules.push(Module { id, level: out_layer, units: vec![], inputs: vec![], outputs: vec![o] });
        for s in suppliers {
            uses.insert((s, id));
        }
    }
    for (layer, u) in extra_singletons {
        let id = modules.len();
        let mut m = Module { id, level: layer, units: vec![], inputs: vec![], outputs: vec![] };
        if layer == 0 {
            m.inputs.push(u);
        } else {
            m.units.push((layer, u));
        }
        modules.push(m);
    }

    for m in &mut modules {
        m.units.sort_unstable();
        m.inputs.sort_unstable();
        m.outputs.sort_unstable();
    }

    let mut hierarchy = ModuleHierarchy {
        modules,
        uses: uses.into_iter().collect(),
        layer_k: clusters.iter().map(|c| c.k).collect(),
    };
    collapse_cycles(&mut hierarchy);
    Ok(hierarchy)
}

/// The uses-graph should follow layer order, but merged modules span layers
/// and can in principle close a loop; collapse any strongly connected
/// component into a single module so the result is always a DAG.
fn collapse_cycles(h: &mut ModuleHierarchy) {
    loop {
        let n = h.modules.len();
        let mut adj = vec![vec![]; n];
        for &(a, b) in &h.uses {
            adj[a].push(b);
        }
        // find a cycle via DFS coloring
        let mut color = vec![0u8; n];
        let mut cycle_edge = None;
        fn dfs(u: usize, adj: &[Vec<usize>], color: &mut [u8], found: &mut Option<(usize, usize)>) {
            color[u] = 1;
            for &v in &adj[u] {
                if found.is_some() {
                    return;
                }
                if color[v] == 1 {
                    *found = Some((u, v));
                    return;
                }
                if color[v] == 0 {
                    dfs(v, adj, color, found);
                }
            }
            color[u] = 2;
        }
        for s in 0..n {
            if color[s] == 0 && cycle_edge.is_none() {
                dfs(s, &adj, &mut color, &mut cycle_edge);
            }
        }
        let Some((a, b)) = cycle_edge else { break };
        // merge a into b (keep smaller id)
        let (keep, drop) = (a.min(b), a.max(b));
        let dropped = h.modules.remove(drop);
        h.modules[keep].level = h.modules[keep].level.min(dropped.level);
        h.modules[keep].units.extend(dropped.units);
        h.modules[keep].inputs.extend(dropped.inputs);
        h.modules[keep].outputs.extend(dropped.outputs);
        h.modules[keep].units.sort_unstable();
        h.modules[keep].inputs.sort_unstable();
        h.modules[keep].outputs.sort_unstable();
        let remap = |x: usize| {
            let x = if x == drop { keep } else { x };
            if x > drop {
                x - 1
            } else {
                x
            }
        };
        let mut uses: std::collections::BTreeSet<(usize, usize)> = Default::default();
        for &(s, d) in &h.uses {
            let (s, d) = (remap(s), remap(d));
            if s != d {
                uses.insert((s, d));
            }
        }
        h.uses = uses.into_iter().collect();
        for (i, m) in h.modules.iter_mut().enumerate() {
            m.id = i;
        }
    }
}

/// Full detection pipeline: features and cluster-count selection per layer,
/// then cross-layer merging.
pub fn detect(mlp: &MaskedMlp, t_m: f64, dm: f64) -> Result<ModuleHierarchy> {
    let n_layers = mlp.widths().len();
    let (offsets, reach) = closure(mlp);
    let mut layer_clusters = Vec::new();
    for layer in 0..n_layers - 1 {
        let fm = features_from_closure(mlp, layer, &offsets, &reach);
        // drop zero-feature rows; they are assigned after merging
        let keep: Vec<usize> =
            (0..fm.rows.len()).filter(|&r| fm.rows[r].iter().any(|&b| b == 1)).collect();
        if keep.is_empty() {
            layer_clusters.push(LayerClusters { layer, groups: vec![], k: 0 });
            continue;
        }
        let sub = FeatureMatrix {
            layer,
            units: keep.iter().map(|&r| fm.units[r]).collect(),
            g: fm.g,
            rows: keep.iter().map(|&r| fm.rows[r].clone()).collect(),
        };
        let chosen = choose_k(&sub, t_m)?;
        let mut groups = vec![vec![]; chosen.k];
        for (r, &label) in chosen.labels.iter().enumerate() {
            groups[label].push(sub.units[r]);
        }
        layer_clusters.push(LayerClusters { layer, groups, k: chosen.k });
    }
    merge_layers(&layer_clusters, mlp, dm)
}

impl ModuleHierarchy {
    /// Partition of input indices into owning-module groups, sorted.
    pub fn input_partition(&self) -> Vec<Vec<usize>> {
        let mut parts: Vec<Vec<usize>> =
            self.modules.iter().filter(|m| !m.inputs.is_empty()).map(|m| m.inputs.clone()).collect();
        parts.sort();
        parts
    }

    pub fn output_partition(&self) -> Vec<Vec<usize>> {
        let mut parts: Vec<Vec<usize>> =
            self.modules.iter().filter(|m| !m.outputs.is_empty()).map(|m| m.outputs.clone()).collect();
        parts.sort();
        parts
    }
}
