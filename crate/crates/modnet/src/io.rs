//! Persistence: checkpoints, run manifests with content digests, CSV
//! emission for offline plotting, and DOT export of detected hierarchies.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

use crate::dataset::{NoiseConfig, TruthTable};
use crate::detect::ModuleHierarchy;
use crate::error::{Error, Result};
use crate::eval::TrialReport;
use crate::mlp::{MaskedMlp, MlpConfig};
use crate::paths::{CoverageResult, PathProductMatrix};
use crate::prune::PruneTrace;

/// Self-contained training artifact: the model plus everything needed to
/// keep training or pruning it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: MlpConfig,
    pub noise: NoiseConfig,
    pub table: TruthTable,
    pub model: MaskedMlp,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json = std::fs::read_to_string(path)?;
        let ck: Checkpoint = serde_json::from_str(&json)?;
        ck.model.check_invariants()?;
        Ok(ck)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    format!("{:x}", h.finalize())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArtifactDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub seed: u64,
    pub outputs: Vec<ArtifactDigest>,
}

impl RunManifest {
    pub fn new(command: &str, args: &[String], seed: u64) -> Self {
        RunManifest { command: command.to_string(), args: args.to_vec(), seed, outputs: vec![] }
    }

    /// Record a written artifact by hashing its current content.
    pub fn record(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path)?;
        self.outputs.push(ArtifactDigest {
            path: path.to_string_lossy().into_owned(),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn save(&self, out_dir: &Path) -> Result<PathBuf> {
        let path = out_dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }
}

// ---------------------------------------------------------------------------
// CSV writers

pub fn write_truth_table_csv(table: &TruthTable, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..table.n_inputs()).map(|i| format!("x{i}")).collect();
    header.extend((0..table.n_outputs()).map(|o| format!("y{o}")));
    w.write_record(&header)?;
    for r in 0..table.rows() {
        let mut row: Vec<String> = table.input_row(r).iter().map(|b| b.to_string()).collect();
        row.extend(table.output_row(r).iter().map(|b| b.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_history_csv(loss: &[f64], accuracy: &[f64], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["epoch", "loss", "accuracy"])?;
    for (e, (l, a)) in loss.iter().zip(accuracy.iter()).enumerate() {
        w.write_record(&[e.to_string(), l.to_string(), a.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_pi_csv(pi: &PathProductMatrix, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["input", "output", "value"])?;
    for j in 0..pi.n_outputs {
        for i in 0..pi.n_inputs {
            w.write_record(&[i.to_string(), j.to_string(), pi.get(i, j).to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_coverage_csv(results: &[CoverageResult], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["layer", "rank", "contribution"])?;
    for c in results {
        for (rank, v) in c.contributions.iter().enumerate() {
            w.write_record(&[c.layer.to_string(), rank.to_string(), v.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_csv(trace: &PruneTrace, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["round", "kind", "p", "accuracy", "accepted", "density"])?;
    for r in &trace.rounds {
        w.write_record(&[
            r.round.to_string(),
            format!("{:?}", r.kind).to_lowercase(),
            r.p_attempted.to_string(),
            r.accuracy_after_retrain.to_string(),
            r.accepted.to_string(),
            r.density_after.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trials_csv(report: &TrialReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "width",
        "depth",
        "seed",
        "density",
        "accuracy",
        "input_modules",
        "output_modules",
        "middle_separation",
        "exact_structure",
        "failure",
    ])?;
    for t in &report.trials {
        let f = t.flags.unwrap_or_default();
        w.write_record(&[
            t.width.to_string(),
            t.depth.to_string(),
            t.seed.to_string(),
            t.density.to_string(),
            t.accuracy.to_string(),
            f.input_modules.to_string(),
            f.output_modules.to_string(),
            f.middle_separation.to_string(),
            f.exact_structure.to_string(),
            t.failure.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// DOT export

const PALETTE: [&str; 10] = [
    "#a6cee3", "#b2df8a", "#fb9a99", "#fdbf6f", "#cab2d6", "#ffff99", "#1f78b4", "#33a02c",
    "#e31a1c", "#ff7f00",
];

/// Module-level DOT (one node per module, uses-edges as arrows).
pub fn export_modules_dot(h: &ModuleHierarchy) -> String {
    let mut s = String::from("digraph modules {\n  rankdir=LR;\n  node [shape=box, style=filled];\n");
    for m in &h.modules {
        let color = PALETTE[m.id % PALETTE.len()];
        let label = format!(
            "M{}\\nin: {:?}\\nout: {:?}\\nhidden: {}",
            m.id,
            m.inputs,
            m.outputs,
            m.units.len()
        );
        s.push_str(&format!("  m{} [label=\"{}\", fillcolor=\"{}\"];\n", m.id, label, color));
    }
    for &(a, b) in &h.uses {
        s.push_str(&format!("  m{a} -> m{b};\n"));
    }
    s.push_str("}\n");
    s
}

/// Unit-level DOT: one cluster per module, nodes colored by module, only
/// unmasked edges drawn. Errors when the hierarchy does not cover every
/// alive unit of the network.
pub fn export_dot(h: &ModuleHierarchy, mlp: &MaskedMlp) -> Result<String> {
    let widths = mlp.widths();
    let last = widths.len() - 1;
    // unit -> module map; inputs at layer 0, hidden at 1.., outputs at last
    let mut owner: std::collections::HashMap<(usize, usize), usize> = Default::default();
    for m in &h.modules {
        for &i in &m.inputs {
            owner.insert((0, i), m.id);
        }
        for &(l, u) in &m.units {
            owner.insert((l, u), m.id);
        }
        for &o in &m.outputs {
            owner.insert((last, o), m.id);
        }
    }
    for i in 0..widths[0] {
        if !owner.contains_key(&(0, i)) {
            return Err(Error::Export(format!("input {i} not covered by any module")));
        }
    }
    for l in 1..last {
        for (u, &alive) in mlp.unit_alive(l - 1).iter().enumerate() {
            if alive && !owner.contains_key(&(l, u)) {
                return Err(Error::Export(format!("alive unit ({l},{u}) not covered")));
            }
        }
    }
    let name = |l: usize, u: usize| {
        if l == 0 {
            format!("x{u}")
        } else if l == last {
            format!("y{u}")
        } else {
            format!("h{l}_{u}")
        }
    };
    let mut s = String::from("digraph net {\n  rankdir=LR;\n  node [style=filled];\n");
    for m in &h.modules {
        s.push_str(&format!("  subgraph cluster_{} {{\n    label=\"M{}\";\n", m.id, m.id));
        let color = PALETTE[m.id % PALETTE.len()];
        let mut members: Vec<(usize, usize)> = m.inputs.iter().map(|&i| (0, i)).collect();
        members.extend(m.units.iter().copied());
        members.extend(m.outputs.iter().map(|&o| (last, o)));
        for (l, u) in members {
            s.push_str(&format!("    {} [fillcolor=\"{}\"];\n", name(l, u), color));
        }
        s.push_str("  }\n");
    }
    for l in 0..last {
        let w_in = widths[l];
        for o in 0..widths[l + 1] {
            for i in 0..w_in {
                if mlp.mask_of(l)[o * w_in + i] == 1 {
                    s.push_str(&format!("  {} -> {};\n", name(l, i), name(l + 1, o)));
                }
            }
        }
    }
    s.push_str("}\n");
    Ok(s)
}
