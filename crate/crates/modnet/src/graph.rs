//! Boolean function graphs: DAGs of input nodes, AND/OR/ID gates with
//! transfer or negating in-edges, and output nodes. Includes generators for
//! the validation families and the ground-truth module hierarchy of each
//! generated graph.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::TruthTable;
use crate::error::{Error, Result};
use crate::rng::{stream, TAG_GRAPH_GEN};

pub type NodeId = usize;

/// Desk-scale guard: truth tables are materialized exhaustively.
pub const MAX_INPUTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GateKind {
    And,
    Or,
    Id,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Input,
    Gate(GateKind),
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EdgeKind {
    Transfer,
    Negate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub src: NodeId,
    pub dst: NodeId,
    pub kind: EdgeKind,
}

/// The graph families used throughout the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// Two input-separable sub-functions on 2 inputs each; `reuse` outputs
    /// per gate (reuse = 1 gives the plain separable pair).
    Separable { reuse: usize },
    /// One shared first-level sub-function of 3 gates feeding two
    /// second-level gates, each copied to `reuse` outputs. The default
    /// construction wires every level-1 gate to every input, which keeps
    /// the learned input connectivity monolithic (one detectable input
    /// module). With `balanced`, the level-1 gates read input pairs
    /// instead, which makes the intermediate state incompressible below
    /// three units — the right instance for coverage statistics, at the
    /// cost of an input connectivity that no longer clusters as a single
    /// module.
    Reused {
        reuse: usize,
        #[serde(default)]
        balanced: bool,
    },
    /// A single dense sub-function: every output depends on every input.
    Dense,
    /// Two sub-functions on 4 inputs each, sharing `overlap` of them;
    /// each sub-function drives `reuse` outputs.
    Overlap { overlap: usize, reuse: usize },
    /// Two-level hierarchy: two input-separable sub-functions feed one
    /// intermediate sub-function, reused by two output sub-functions.
    Hierarchy { reuse: usize },
}

/// Declarative description of a generated graph: how many sub-functions per
/// hierarchical level, which inputs each first-level sub-function owns, and
/// how often the top-level sub-functions are used by output nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModularitySpec {
    pub family: Family,
    pub n_inputs: usize,
    pub levels: Vec<usize>,
    pub n_outputs: usize,
    pub input_partition: Vec<Vec<usize>>,
    pub reuse_counts: Vec<usize>,
}

impl ModularitySpec {
    pub fn separable(reuse: usize) -> Self {
        ModularitySpec {
            family: Family::Separable { reuse },
            n_inputs: 4,
            levels: vec![2],
            n_outputs: 4 * reuse,
            input_partition: vec![vec![0, 1], vec![2, 3]],
            reuse_counts: vec![reuse, reuse],
        }
    }

    pub fn reused(reuse: usize) -> Self {
        ModularitySpec {
            family: Family::Reused { reuse, balanced: false },
            n_inputs: 4,
            levels: vec![1, 2],
            n_outputs: 2 * reuse,
            input_partition: vec![vec![0, 1, 2, 3]],
            reuse_counts: vec![reuse, reuse],
        }
    }

    /// The reused graph with pair-arity level-1 gates; see
    /// [`Family::Reused`] for the trade-off.
    pub fn reused_balanced(reuse: usize) -> Self {
        ModularitySpec {
            family: Family::Reused { reuse, balanced: true },
            ..Self::reused(reuse)
        }
    }

    pub fn dense() -> Self {
        ModularitySpec {
            family: Family::Dense,
            n_inputs: 4,
            levels: vec![1],
            n_outputs: 4,
            input_partition: vec![vec![0, 1, 2, 3]],
            reuse_counts: vec![4],
        }
    }

    /// Inputs are laid out as `[A-exclusive, shared, B-exclusive]` with
    /// `4 - overlap` exclusive inputs per side.
    pub fn overlap(overlap: usize, reuse: usize) -> Self {
        assert!(overlap <= 4, "overlap ranges over 0..=4");
        let excl = 4 - overlap;
        let n_inputs = 2 * excl + overlap;
        let a: Vec<usize> = (0..excl).chain(excl..excl + overlap).collect();
        let b: Vec<usize> = (excl..excl + overlap).chain(excl + overlap..n_inputs).collect();
        ModularitySpec {
            family: Family::Overlap { overlap, reuse },
            n_inputs,
            levels: vec![2],
            n_outputs: 2 * reuse,
            input_partition: vec![a, b],
            reuse_counts: vec![reuse, reuse],
        }
    }

    pub fn hierarchy(reuse: usize) -> Self {
        ModularitySpec {
            family: Family::Hierarchy { reuse },
            n_inputs: 4,
            levels: vec![2, 1, 2],
            n_outputs: 2 * reuse,
            input_partition: vec![vec![0, 1], vec![2, 3]],
            reuse_counts: vec![reuse, reuse],
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "separable" => Some(Self::separable(1)),
            "reused" => Some(Self::reused(8)),
            "separable_reused" => Some(Self::separable(2)),
            "dense" => Some(Self::dense()),
            "hierarchy" => Some(Self::hierarchy(4)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() || self.levels.iter().any(|&c| c == 0) {
            return Err(Error::Generation("levels must be nonempty with counts >= 1".into()));
        }
        let covered: BTreeSet<usize> = self.input_partition.iter().flatten().copied().collect();
        if covered != (0..self.n_inputs).collect() {
            return Err(Error::Generation("input_partition must cover all inputs".into()));
        }
        if self.reuse_counts.iter().any(|&r| r == 0) {
            return Err(Error::Generation("every sub-function needs at least one use".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FunctionGraph {
    pub n_inputs: usize,
    pub n_outputs: usize,
    kinds: Vec<NodeKind>,
    edges: Vec<Edge>,
    spec: Option<ModularitySpec>,
    // derived on construction
    in_edges: Vec<Vec<(NodeId, EdgeKind)>>,
    eval_order: Vec<NodeId>,
    level_of: Vec<usize>,
}

impl FunctionGraph {
    pub fn new(
        n_inputs: usize,
        n_outputs: usize,
        kinds: Vec<NodeKind>,
        edges: Vec<Edge>,
        spec: Option<ModularitySpec>,
    ) -> Result<Self> {
        let n = kinds.len();
        let mut in_edges: Vec<Vec<(NodeId, EdgeKind)>> = vec![Vec::new(); n];
        let mut out_deg = vec![0usize; n];
        for e in &edges {
            if e.src >= n || e.dst >= n {
                return Err(Error::InvalidGraph(format!("edge {}->{} out of range", e.src, e.dst)));
            }
            in_edges[e.dst].push((e.src, e.kind));
            out_deg[e.src] += 1;
        }

        let inputs: Vec<NodeId> =
            (0..n).filter(|&i| kinds[i] == NodeKind::Input).collect();
        let outputs: Vec<NodeId> =
            (0..n).filter(|&i| kinds[i] == NodeKind::Output).collect();
        if inputs.len() != n_inputs || outputs.len() != n_outputs {
            return Err(Error::InvalidGraph("declared input/output counts do not match nodes".into()));
        }

        // Kahn toposort doubles as the acyclicity check.
        let mut indeg: Vec<usize> = in_edges.iter().map(|v| v.len()).collect();
        let mut queue: Vec<NodeId> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut eval_order = Vec::with_capacity(n);
        let mut head = 0;
        let mut succ: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        for e in &edges {
            succ[e.src].push(e.dst);
        }
        while head < queue.len() {
            let v = queue[head];
            head += 1;
            eval_order.push(v);
            for &w in &succ[v] {
                indeg[w] -= 1;
                if indeg[w] == 0 {
                    queue.push(w);
                }
            }
        }
        if eval_order.len() != n {
            return Err(Error::InvalidGraph("graph contains a cycle".into()));
        }

        for i in 0..n {
            match kinds[i] {
                NodeKind::Input => {
                    if !in_edges[i].is_empty() {
                        return Err(Error::InvalidGraph(format!("input node {i} has in-edges")));
                    }
                }
                NodeKind::Output => {
                    if out_deg[i] != 0 {
                        return Err(Error::InvalidGraph(format!("output node {i} has out-edges")));
                    }
                    if in_edges[i].len() != 1 {
                        return Err(Error::InvalidGraph(format!(
                            "output node {i} must have exactly one in-edge"
                        )));
                    }
                }
                NodeKind::Gate(GateKind::Id) => {
                    if in_edges[i].len() != 1 {
                        return Err(Error::InvalidGraph(format!("ID gate {i} must have one in-edge")));
                    }
                }
                NodeKind::Gate(_) => {
                    if in_edges[i].is_empty() {
                        return Err(Error::InvalidGraph(format!("gate {i} has no in-edges")));
                    }
                }
            }
        }

        // Every gate must lie on some input -> output path.
        let from_input = reach_forward(n, &succ, &inputs);
        let mut pred: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        for e in &edges {
            pred[e.dst].push(e.src);
        }
        let to_output = reach_forward(n, &pred, &outputs);
        for i in 0..n {
            if matches!(kinds[i], NodeKind::Gate(_)) && !(from_input[i] && to_output[i]) {
                return Err(Error::InvalidGraph(format!("gate {i} is not on an input->output path")));
            }
        }

        // Longest-path depth from the inputs.
        let mut level_of = vec![0usize; n];
        for &v in &eval_order {
            for &(s, _) in &in_edges[v] {
                level_of[v] = level_of[v].max(level_of[s] + 1);
            }
        }

        Ok(FunctionGraph { n_inputs, n_outputs, kinds, edges, spec, in_edges, eval_order, level_of })
    }

    pub fn node_kinds(&self) -> &[NodeKind] {
        &self.kinds
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn spec(&self) -> Option<&ModularitySpec> {
        self.spec.as_ref()
    }

    pub fn level_of(&self, id: NodeId) -> usize {
        self.level_of[id]
    }

    pub fn input_ids(&self) -> Vec<NodeId> {
        (0..self.kinds.len()).filter(|&i| self.kinds[i] == NodeKind::Input).collect()
    }

    pub fn output_ids(&self) -> Vec<NodeId> {
        (0..self.kinds.len()).filter(|&i| self.kinds[i] == NodeKind::Output).collect()
    }

    pub fn evaluate(&self, input: &[u8]) -> Result<Vec<u8>> {
        if input.len() != self.n_inputs {
            return Err(Error::Dimension { expected: self.n_inputs, got: input.len() });
        }
        let inputs = self.input_ids();
        let mut value = vec![false; self.kinds.len()];
        for (pos, &id) in inputs.iter().enumerate() {
            value[id] = input[pos] != 0;
        }
        for &v in &self.eval_order {
            match self.kinds[v] {
                NodeKind::Input => {}
                NodeKind::Gate(kind) => {
                    let ins = self.in_edges[v].iter().map(|&(s, k)| value[s] ^ (k == EdgeKind::Negate));
                    value[v] = match kind {
                        GateKind::And => ins.fold(true, |a, b| a && b),
                        GateKind::Or => ins.fold(false, |a, b| a || b),
                        GateKind::Id => self.in_edges[v]
                            .first()
                            .map(|&(s, k)| value[s] ^ (k == EdgeKind::Negate))
                            .unwrap_or(false),
                    };
                }
                NodeKind::Output => {
                    let &(s, k) = &self.in_edges[v][0];
                    value[v] = value[s] ^ (k == EdgeKind::Negate);
                }
            }
        }
        Ok(self.output_ids().iter().map(|&id| u8::from(value[id])).collect())
    }

    /// Exhaustive truth table in lexicographic input order: row `i` holds the
    /// big-endian binary encoding of `i`.
    pub fn truth_table(&self) -> Result<TruthTable> {
        if self.n_inputs > MAX_INPUTS {
            return Err(Error::Capacity(format!(
                "{} inputs exceeds the {MAX_INPUTS}-input truth-table cap",
                self.n_inputs
            )));
        }
        let n = self.n_inputs;
        let rows = 1usize << n;
        let mut inputs = Vec::with_capacity(rows * n);
        let mut outputs = Vec::with_capacity(rows * self.n_outputs);
        let mut bits = vec![0u8; n];
        for r in 0..rows {
            for (j, b) in bits.iter_mut().enumerate() {
                *b = ((r >> (n - 1 - j)) & 1) as u8;
            }
            inputs.extend_from_slice(&bits);
            outputs.extend_from_slice(&self.evaluate(&bits)?);
        }
        TruthTable::new(n, self.n_outputs, inputs, outputs)
    }

    /// True when a directed path `from -> to` exists.
    pub fn has_path(&self, from: NodeId, to: NodeId) -> bool {
        let n = self.kinds.len();
        let mut succ: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        for e in &self.edges {
            succ[e.src].push(e.dst);
        }
        reach_forward(n, &succ, &[from])[to]
    }
}

fn reach_forward(n: usize, succ: &[Vec<NodeId>], sources: &[NodeId]) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut stack: Vec<NodeId> = sources.to_vec();
    for &s in sources {
        seen[s] = true;
    }
    while let Some(v) = stack.pop() {
        for &w in &succ[v] {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen
}

/// Ground-truth module hierarchy of a generated graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SigModule {
    pub id: usize,
    pub level: usize,
    pub inputs: BTreeSet<usize>,
    pub outputs: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchySignature {
    pub modules: Vec<SigModule>,
    pub uses: Vec<(usize, usize)>,
}

impl HierarchySignature {
    fn single(n_inputs: usize, n_outputs: usize) -> Self {
        HierarchySignature {
            modules: vec![SigModule {
                id: 0,
                level: 0,
                inputs: (0..n_inputs).collect(),
                outputs: (0..n_outputs).collect(),
            }],
            uses: vec![],
        }
    }
}

/// Ground-truth signature for a graph produced by [`generate`].
pub fn signature(_graph: &FunctionGraph, spec: &ModularitySpec) -> HierarchySignature {
    canonical_signature(spec)
}

pub fn canonical_signature(spec: &ModularitySpec) -> HierarchySignature {
    let half_out = spec.n_outputs / 2;
    match spec.family {
        Family::Separable { .. } => HierarchySignature {
            modules: vec![
                SigModule {
                    id: 0,
                    level: 0,
                    inputs: spec.input_partition[0].iter().copied().collect(),
                    outputs: (0..half_out).collect(),
                },
                SigModule {
                    id: 1,
                    level: 0,
                    inputs: spec.input_partition[1].iter().copied().collect(),
                    outputs: (half_out..spec.n_outputs).collect(),
                },
            ],
            uses: vec![],
        },
        Family::Reused { .. } => HierarchySignature {
            modules: vec![
                SigModule { id: 0, level: 0, inputs: (0..spec.n_inputs).collect(), outputs: BTreeSet::new() },
                SigModule { id: 1, level: 1, inputs: BTreeSet::new(), outputs: (0..half_out).collect() },
                SigModule { id: 2, level: 1, inputs: BTreeSet::new(), outputs: (half_out..spec.n_outputs).collect() },
            ],
            uses: vec![(0, 1), (0, 2)],
        },
        Family::Dense => HierarchySignature::single(spec.n_inputs, spec.n_outputs),
        Family::Overlap { overlap, .. } => {
            let excl = 4 - overlap;
            let a_excl: BTreeSet<usize> = (0..excl).collect();
            let shared: BTreeSet<usize> = (excl..excl + overlap).collect();
            let b_excl: BTreeSet<usize> = (excl + overlap..spec.n_inputs).collect();
            if overlap == 0 {
                HierarchySignature {
                    modules: vec![
                        SigModule { id: 0, level: 0, inputs: a_excl, outputs: (0..half_out).collect() },
                        SigModule { id: 1, level: 0, inputs: b_excl, outputs: (half_out..spec.n_outputs).collect() },
                    ],
                    uses: vec![],
                }
            } else {
                HierarchySignature {
                    modules: vec![
                        SigModule { id: 0, level: 0, inputs: shared, outputs: BTreeSet::new() },
                        SigModule { id: 1, level: 1, inputs: a_excl, outputs: (0..half_out).collect() },
                        SigModule { id: 2, level: 1, inputs: b_excl, outputs: (half_out..spec.n_outputs).collect() },
                    ],
                    uses: vec![(0, 1), (0, 2)],
                }
            }
        }
        Family::Hierarchy { .. } => HierarchySignature {
            modules: vec![
                SigModule { id: 0, level: 0, inputs: vec![0, 1].into_iter().collect(), outputs: BTreeSet::new() },
                SigModule { id: 1, level: 0, inputs: vec![2, 3].into_iter().collect(), outputs: BTreeSet::new() },
                SigModule { id: 2, level: 1, inputs: BTreeSet::new(), outputs: BTreeSet::new() },
                SigModule { id: 3, level: 2, inputs: BTreeSet::new(), outputs: (0..half_out).collect() },
                SigModule { id: 4, level: 2, inputs: BTreeSet::new(), outputs: (half_out..spec.n_outputs).collect() },
            ],
            uses: vec![(0, 2), (1, 2), (2, 3), (2, 4)],
        },
    }
}

/// Signature variant matched to a network depth, for families whose function
/// collapses to fewer hierarchical levels when represented shallower.
pub fn signature_for_depth(spec: &ModularitySpec, hidden_layers: usize) -> HierarchySignature {
    match spec.family {
        Family::Hierarchy { .. } => {
            if hidden_layers >= 3 {
                canonical_signature(spec)
            } else if hidden_layers == 2 {
                HierarchySignature {
                    modules: vec![
                        SigModule { id: 0, level: 0, inputs: vec![0, 1].into_iter().collect(), outputs: BTreeSet::new() },
                        SigModule { id: 1, level: 0, inputs: vec![2, 3].into_iter().collect(), outputs: BTreeSet::new() },
                        SigModule { id: 2, level: 1, inputs: BTreeSet::new(), outputs: (0..spec.n_outputs).collect() },
                    ],
                    uses: vec![(0, 2), (1, 2)],
                }
            } else {
                HierarchySignature::single(spec.n_inputs, spec.n_outputs)
            }
        }
        _ => canonical_signature(spec),
    }
}

const GEN_ATTEMPTS: usize = 2000;

/// Generate a graph of the requested family. Gate kinds and negation
/// patterns are drawn from `seed` and redrawn until every output depends on
/// each of its designated inputs and no two gates in a level compute
/// identical or complementary columns.
pub fn generate(spec: &ModularitySpec, seed: u64) -> Result<FunctionGraph> {
    spec.validate()?;
    let mut rng = stream(seed, TAG_GRAPH_GEN, 0);
    for _ in 0..GEN_ATTEMPTS {
        let g = build_candidate(spec, &mut rng)?;
        if candidate_ok(&g)? {
            return Ok(g);
        }
    }
    Err(Error::Generation(format!(
        "no valid gate assignment found for {:?} after {GEN_ATTEMPTS} attempts",
        spec.family
    )))
}

struct Builder {
    kinds: Vec<NodeKind>,
    edges: Vec<Edge>,
}

impl Builder {
    fn new(n_inputs: usize) -> Self {
        Builder { kinds: vec![NodeKind::Input; n_inputs], edges: Vec::new() }
    }

    fn gate(&mut self, rng: &mut impl Rng, srcs: &[NodeId]) -> NodeId {
        let id = self.kinds.len();
        let kind = if srcs.len() == 1 {
            GateKind::Id
        } else if rng.gen_bool(0.5) {
            GateKind::And
        } else {
            GateKind::Or
        };
        self.kinds.push(NodeKind::Gate(kind));
        for &s in srcs {
            let ek = if rng.gen_bool(0.5) { EdgeKind::Negate } else { EdgeKind::Transfer };
            self.edges.push(Edge { src: s, dst: id, kind: ek });
        }
        id
    }

    fn gate_with(&mut self, kind: GateKind, srcs: &[(NodeId, EdgeKind)]) -> NodeId {
        let id = self.kinds.len();
        self.kinds.push(NodeKind::Gate(kind));
        for &(s, ek) in srcs {
            self.edges.push(Edge { src: s, dst: id, kind: ek });
        }
        id
    }

    /// Random binary combiner: a 2-ary AND/OR gate with random edge
    /// negations, or an XOR/XNOR block `(a ∨ b) ∧ (¬a ∨ ¬b)` built from
    /// three nodes. The XOR option produces functions no single flat gate
    /// can express, which keeps composed gates from degenerating into
    /// near-constant columns.
    fn combine(&mut self, rng: &mut impl Rng, a: NodeId, b: NodeId) -> NodeId {
        if rng.gen_bool(0.5) {
            self.gate(rng, &[a, b])
        } else {
            let or_ab = self.gate_with(
                GateKind::Or,
                &[(a, EdgeKind::Transfer), (b, EdgeKind::Transfer)],
            );
            let nor_ab =
                self.gate_with(GateKind::Or, &[(a, EdgeKind::Negate), (b, EdgeKind::Negate)]);
            let xor = self.gate_with(
                GateKind::And,
                &[(or_ab, EdgeKind::Transfer), (nor_ab, EdgeKind::Transfer)],
            );
            if rng.gen_bool(0.5) {
                xor
            } else {
                self.gate_with(GateKind::Id, &[(xor, EdgeKind::Negate)])
            }
        }
    }

    /// A random combiner tree over all of `srcs` (shuffled), so the root
    /// depends on every source.
    fn tree(&mut self, rng: &mut impl Rng, srcs: &[NodeId]) -> NodeId {
        let mut layer: Vec<NodeId> = srcs.to_vec();
        layer.shuffle(rng);
        while layer.len() > 1 {
            let mut next = Vec::with_capacity(layer.len() / 2 + 1);
            for pair in layer.chunks(2) {
                match pair {
                    [a, b] => next.push(self.combine(rng, *a, *b)),
                    [a] => next.push(*a),
                    _ => unreachable!(),
                }
            }
            layer = next;
        }
        layer[0]
    }

    fn output(&mut self, rng: &mut impl Rng, src: NodeId) -> NodeId {
        let id = self.kinds.len();
        self.kinds.push(NodeKind::Output);
        let ek = if rng.gen_bool(0.5) { EdgeKind::Negate } else { EdgeKind::Transfer };
        self.edges.push(Edge { src, dst: id, kind: ek });
        id
    }

    /// `reuse` outputs spread round-robin over `gates`.
    fn outputs_over(&mut self, rng: &mut impl Rng, gates: &[NodeId], count: usize) {
        for i in 0..count {
            self.output(rng, gates[i % gates.len()]);
        }
    }

    fn finish(self, spec: &ModularitySpec) -> Result<FunctionGraph> {
        FunctionGraph::new(spec.n_inputs, spec.n_outputs, self.kinds, self.edges, Some(spec.clone()))
    }
}

fn build_candidate(spec: &ModularitySpec, rng: &mut impl Rng) -> Result<FunctionGraph> {
    let mut b = Builder::new(spec.n_inputs);
    match spec.family {
        Family::Separable { .. } | Family::Overlap { .. } => {
            let per_side = spec.n_outputs / 2;
            let n_gates = per_side.min(2);
            for side in 0..2 {
                let srcs = &spec.input_partition[side];
                let gates: Vec<NodeId> = (0..n_gates).map(|_| b.gate(rng, srcs)).collect();
                b.outputs_over(rng, &gates, per_side);
            }
        }
        Family::Reused { reuse, balanced: false } => {
            // Flat AND/OR gates over all four inputs are constant except on
            // a single input row, which makes the function compressible
            // into tiny sparse circuits whose input connectivity no longer
            // looks like one module. Realize each of the three shared gates
            // as a combiner tree over every input instead: the roots stay
            // sensitive to all inputs (so the learned first layer keeps
            // monolithic connectivity) while XOR-capable trees resist
            // collapsing below three intermediate units.
            let all: Vec<NodeId> = (0..spec.n_inputs).collect();
            let t1 = b.tree(rng, &all);
            let t2 = b.tree(rng, &all);
            let t3 = b.tree(rng, &all);
            let f1 = b.gate(rng, &[t1, t2]);
            let f2 = b.gate(rng, &[t3, t2]);
            b.outputs_over(rng, &[f1], reuse);
            b.outputs_over(rng, &[f2], reuse);
        }
        Family::Reused { reuse, balanced: true } => {
            // An AND/OR gate over all four inputs is constant except on a
            // single input row, which lets the learned intermediate state
            // collapse below three units. Here two level-1 gates read one
            // input pair and the third reads the other pair, so the
            // sub-function still depends on every input but each gate stays
            // balanced. Each level-2 gate combines one pair-A gate with the
            // shared pair-B gate; `candidate_ok` redraws until the gate pair
            // realizes all four joint values, which keeps the intermediate
            // state genuinely three-dimensional.
            let mut order: Vec<NodeId> = (0..spec.n_inputs).collect();
            order.shuffle(rng);
            let pair_a = [order[0], order[1]];
            let pair_b = [order[2], order[3]];
            let h1 = b.gate(rng, &pair_a);
            let h2 = b.gate(rng, &pair_b);
            let h3 = b.gate(rng, &pair_a);
            let f1 = b.gate(rng, &[h1, h2]);
            let f2 = b.gate(rng, &[h3, h2]);
            b.outputs_over(rng, &[f1], reuse);
            b.outputs_over(rng, &[f2], reuse);
        }
        Family::Dense => {
            // "All nodes strongly connected": every output reads its own
            // flat gate over all inputs. Such monolithic gates are nearly
            // constant, so the sparsified networks collapse into thin
            // chains whose layers trivially cluster as one group — the
            // single entangled module this graph represents. (Richer
            // per-output circuits are counterproductive here: their minimal
            // networks grow units serving output subsets, i.e. detectable
            // substructure a non-modular graph must not have.)
            let all: Vec<NodeId> = (0..spec.n_inputs).collect();
            for _ in 0..spec.n_outputs {
                let gate = b.gate(rng, &all);
                b.output(rng, gate);
            }
        }
        Family::Hierarchy { reuse } => {
            let a: Vec<NodeId> = (0..2).map(|_| b.gate(rng, &spec.input_partition[0])).collect();
            let bb: Vec<NodeId> = (0..2).map(|_| b.gate(rng, &spec.input_partition[1])).collect();
            let lvl1: Vec<NodeId> = a.iter().chain(bb.iter()).copied().collect();
            let c: Vec<NodeId> = (0..2).map(|_| b.gate(rng, &lvl1)).collect();
            let d = b.gate(rng, &c);
            let e = b.gate(rng, &c);
            b.outputs_over(rng, &[d], reuse);
            b.outputs_over(rng, &[e], reuse);
        }
    }
    b.finish(spec)
}

/// Sensitivity and distinctness checks over the exhaustive truth table.
fn candidate_ok(g: &FunctionGraph) -> Result<bool> {
    let table = g.truth_table()?;
    let rows = table.rows();
    let n = g.n_inputs;

    // Designated inputs of an output are the inputs wired to it by the
    // family topology, i.e. the inputs with a directed path to it.
    let inputs = g.input_ids();
    let outputs = g.output_ids();
    for (j, &out_id) in outputs.iter().enumerate() {
        for (i, &in_id) in inputs.iter().enumerate() {
            if !g.has_path(in_id, out_id) {
                continue;
            }
            let mut sensitive = false;
            for r in 0..rows {
                let flipped = r ^ (1 << (n - 1 - i));
                if table.output_bit(r, j) != table.output_bit(flipped, j) {
                    sensitive = true;
                    break;
                }
            }
            if !sensitive {
                return Ok(false);
            }
        }
    }

    // Gate columns within a level must be pairwise distinct and
    // non-complementary, so no two gates collapse into one learned unit.
    let mut by_level: Vec<(usize, Vec<u8>)> = Vec::new();
    for (id, kind) in g.node_kinds().iter().enumerate() {
        if matches!(kind, NodeKind::Gate(_)) {
            let mut col = Vec::with_capacity(rows);
            let mut bits = vec![0u8; n];
            for r in 0..rows {
                for (j, b) in bits.iter_mut().enumerate() {
                    *b = ((r >> (n - 1 - j)) & 1) as u8;
                }
                col.push(node_value(g, &bits, id));
            }
            // Constant gates are degenerate regardless of level.
            if col.iter().all(|&v| v == col[0]) {
                return Ok(false);
            }
            by_level.push((g.level_of(id), col));
        }
    }
    for i in 0..by_level.len() {
        for j in i + 1..by_level.len() {
            if by_level[i].0 != by_level[j].0 {
                continue;
            }
            let (a, b) = (&by_level[i].1, &by_level[j].1);
            let equal = a == b;
            let complement = a.iter().zip(b).all(|(x, y)| x != y);
            if equal || complement {
                return Ok(false);
            }
        }
    }

    // The reused family's two top-level gates must jointly realize all
    // four output values; otherwise their pair collapses onto a
    // one-dimensional intermediate that narrow networks can exploit.
    if let Some(spec) = g.spec() {
        if matches!(spec.family, Family::Reused { .. }) {
            let joint: BTreeSet<Vec<u8>> =
                (0..rows).map(|r| table.output_row(r).to_vec()).collect();
            if joint.len() < 4 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn node_value(g: &FunctionGraph, input: &[u8], node: NodeId) -> u8 {
    // Re-run evaluation and capture an internal node; cheap at desk scale.
    let mut value = vec![false; g.node_kinds().len()];
    for (pos, &id) in g.input_ids().iter().enumerate() {
        value[id] = input[pos] != 0;
    }
    for &v in &g.eval_order {
        match g.kinds[v] {
            NodeKind::Input => {}
            NodeKind::Gate(kind) => {
                let ins = g.in_edges[v].iter().map(|&(s, k)| value[s] ^ (k == EdgeKind::Negate));
                value[v] = match kind {
                    GateKind::And => ins.fold(true, |a, b| a && b),
                    GateKind::Or => ins.fold(false, |a, b| a || b),
                    GateKind::Id => {
                        let &(s, k) = &g.in_edges[v][0];
                        value[s] ^ (k == EdgeKind::Negate)
                    }
                };
            }
            NodeKind::Output => {
                let &(s, k) = &g.in_edges[v][0];
                value[v] = value[s] ^ (k == EdgeKind::Negate);
            }
        }
    }
    u8::from(value[node])
}

// --- JSON wire format -----------------------------------------------------

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    id: usize,
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    gate: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct EdgeDoc {
    src: usize,
    dst: usize,
    negate: bool,
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    n_inputs: usize,
    n_outputs: usize,
    nodes: Vec<NodeDoc>,
    edges: Vec<EdgeDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    spec: Option<ModularitySpec>,
}

impl FunctionGraph {
    pub fn to_json(&self) -> Result<String> {
        let doc = GraphDoc {
            n_inputs: self.n_inputs,
            n_outputs: self.n_outputs,
            nodes: self
                .kinds
                .iter()
                .enumerate()
                .map(|(id, k)| match k {
                    NodeKind::Input => NodeDoc { id, kind: "input".into(), gate: None },
                    NodeKind::Output => NodeDoc { id, kind: "output".into(), gate: None },
                    NodeKind::Gate(g) => NodeDoc {
                        id,
                        kind: "gate".into(),
                        gate: Some(
                            match g {
                                GateKind::And => "AND",
                                GateKind::Or => "OR",
                                GateKind::Id => "ID",
                            }
                            .into(),
                        ),
                    },
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeDoc { src: e.src, dst: e.dst, negate: e.kind == EdgeKind::Negate })
                .collect(),
            spec: self.spec.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GraphDoc = serde_json::from_str(text)?;
        let mut kinds = vec![NodeKind::Input; doc.nodes.len()];
        for nd in &doc.nodes {
            if nd.id >= kinds.len() {
                return Err(Error::InvalidGraph(format!("node id {} out of range", nd.id)));
            }
            kinds[nd.id] = match nd.kind.as_str() {
                "input" => NodeKind::Input,
                "output" => NodeKind::Output,
                "gate" => NodeKind::Gate(match nd.gate.as_deref() {
                    Some("AND") => GateKind::And,
                    Some("OR") => GateKind::Or,
                    Some("ID") => GateKind::Id,
                    other => {
                        return Err(Error::InvalidGraph(format!("unknown gate kind {other:?}")))
                    }
                }),
                other => return Err(Error::InvalidGraph(format!("unknown node kind {other:?}"))),
            };
        }
        let edges = doc
            .edges
            .iter()
            .map(|e| Edge {
                src: e.src,
                dst: e.dst,
                kind: if e.negate { EdgeKind::Negate } else { EdgeKind::Transfer },
            })
            .collect();
        FunctionGraph::new(doc.n_inputs, doc.n_outputs, kinds, edges, doc.spec)
    }
}
