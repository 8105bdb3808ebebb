//! Command-line interface: generation, training, pruning, detection,
//! analysis, trial grids, and DOT export.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

use crate::dataset::{validation_view, NoiseConfig};
use crate::detect::{detect, ModuleHierarchy, DEFAULT_DM, DEFAULT_TM};
use crate::error::Result;
use crate::eval::{run_grid, TrialConfig};
use crate::graph::{generate, FunctionGraph, ModularitySpec};
use crate::io::{
    export_dot, export_modules_dot, write_coverage_csv, write_history_csv, write_pi_csv,
    write_trace_csv, write_trials_csv, write_truth_table_csv, Checkpoint, RunManifest,
};
use crate::mlp::{MaskedMlp, MlpConfig};
use crate::paths::{input_separability_test, layer_coverage, path_product_matrix};
use crate::prune::{grid_search, sculpt, GridConfig, PruneConfig};

#[derive(Parser)]
#[command(name = "modnet", version, about = "Train, sparsify, and structurally analyze MLPs on modular Boolean tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// base RNG seed (falls back to NS_SEED, then 0)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// directory for artifacts (created if missing)
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// trial-level worker threads (0 = all cores)
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct TrainOpts {
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 16)]
    batch: usize,
    #[arg(long, default_value_t = 120)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    l2: f64,
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a Boolean function graph of a named family
    Gen {
        /// separable | reused | separable_reused | dense | hierarchy
        #[arg(long)]
        family: String,
        /// override the family's sub-function use count
        #[arg(long)]
        reuse: Option<usize>,
        /// shared-input count for the overlap family
        #[arg(long)]
        overlap: Option<usize>,
    },
    /// Train a dense MLP on a generated graph
    Train {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 24)]
        width: usize,
        #[arg(long, default_value_t = 2)]
        depth: usize,
        #[command(flatten)]
        train: TrainOpts,
    },
    /// Sparsify a trained checkpoint (single sculpt or full grid search)
    Prune {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 50.0)]
        p_u: f64,
        #[arg(long, default_value_t = 2.0)]
        p_e: f64,
        /// run the full (p_u, p_e) grid instead of a single sculpt
        #[arg(long)]
        grid: bool,
    },
    /// Detect modules in a sparse checkpoint
    Detect {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TM)]
        tm: f64,
        #[arg(long, default_value_t = DEFAULT_DM)]
        dm: f64,
    },
    /// Path products, coverage curves, and separability tests
    Analyze {
        #[arg(long)]
        checkpoint: PathBuf,
        /// comma-separated input indices of group A (defaults to first half)
        #[arg(long)]
        inputs_a: Option<String>,
        /// coverage percentage
        #[arg(long, default_value_t = 90.0)]
        percent: f64,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Run a width x depth x seed trial grid from a TrialConfig JSON
    Eval {
        #[arg(long)]
        config: PathBuf,
        /// exit nonzero when the exact-structure rate falls below this
        #[arg(long)]
        min_success: Option<f64>,
    },
    /// Render a hierarchy JSON as DOT
    Viz {
        #[arg(long)]
        hierarchy: PathBuf,
        /// optional checkpoint for a unit-level rendering
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn parse_indices(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|e| crate::error::Error::Precondition(format!("bad index '{t}': {e}")))
        })
        .collect()
}

fn run(cli: Cli) -> Result<i32> {
    let seed = cli
        .seed
        .or_else(|| std::env::var("NS_SEED").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(0);
    let out = &cli.out_dir;
    std::fs::create_dir_all(out)?;
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let mut code = 0;
    match cli.command {
        Command::Gen { family, reuse, overlap } => {
            let mut manifest = RunManifest::new("gen", &argv, seed);
            let spec = match (family.as_str(), overlap) {
                ("overlap", Some(v)) => ModularitySpec::overlap(v, reuse.unwrap_or(1)),
                _ => {
                    let mut s = ModularitySpec::by_name(&family).ok_or_else(|| {
                        crate::error::Error::Precondition(format!("unknown family '{family}'"))
                    })?;
                    if let Some(r) = reuse {
                        s = match family.as_str() {
                            "separable" => ModularitySpec::separable(r),
                            "reused" => ModularitySpec::reused(r),
                            "separable_reused" => ModularitySpec::separable(2 * r),
                            "hierarchy" => ModularitySpec::hierarchy(r),
                            _ => s,
                        };
                    }
                    s
                }
            };
            let graph = generate(&spec, seed)?;
            let gpath = out.join("graph.json");
            std::fs::write(&gpath, graph.to_json()?)?;
            let tpath = out.join("truth_table.csv");
            write_truth_table_csv(&graph.truth_table()?, &tpath)?;
            manifest.record(&gpath)?;
            manifest.record(&tpath)?;
            manifest.save(out)?;
            println!("graph: {} inputs, {} outputs -> {}", graph.n_inputs, graph.n_outputs, gpath.display());
        }
        Command::Train { graph, width, depth, train } => {
            let mut manifest = RunManifest::new("train", &argv, seed);
            let g = FunctionGraph::from_json(&std::fs::read_to_string(&graph)?)?;
            let table = g.truth_table()?;
            let mut widths = vec![table.n_inputs()];
            widths.extend(std::iter::repeat(width).take(depth));
            widths.push(table.n_outputs());
            let mut cfg = MlpConfig::new(widths, seed);
            cfg.lr = train.lr;
            cfg.batch_size = train.batch;
            cfg.epochs = train.epochs;
            cfg.l2 = train.l2;
            let noise = NoiseConfig { sigma: train.sigma, seed };
            let mut model = MaskedMlp::init(&cfg);
            let history = model.train(&table, &noise, &cfg)?;
            let acc = model.bitwise_accuracy(&validation_view(&table))?;
            let ck = Checkpoint { config: cfg, noise, table, model };
            let ck_path = out.join("checkpoint.json");
            ck.save(&ck_path)?;
            let h_path = out.join("history.csv");
            write_history_csv(&history.loss, &history.accuracy, &h_path)?;
            manifest.record(&ck_path)?;
            manifest.record(&h_path)?;
            manifest.save(out)?;
            println!("trained to accuracy {acc} -> {}", ck_path.display());
        }
        Command::Prune { checkpoint, p_u, p_e, grid } => {
            let mut manifest = RunManifest::new("prune", &argv, seed);
            let ck = Checkpoint::load(&checkpoint)?;
            let (sparse, trace) = if grid {
                let gcfg = GridConfig::default();
                let outcome = grid_search(&ck.model, &ck.table, &ck.noise, &ck.config, &gcfg)?;
                let best = outcome.best.ok_or_else(|| {
                    crate::error::Error::Precondition("dense model below accuracy target".into())
                })?;
                (best, Default::default())
            } else {
                let pcfg = PruneConfig { p_u, p_e, ..Default::default() };
                sculpt(&ck.model, &ck.table, &ck.noise, &ck.config, &pcfg)?
            };
            println!("density {} alive units {}", sparse.density(), sparse.alive_hidden_units());
            let out_ck = Checkpoint { model: sparse, ..ck };
            let ck_path = out.join("sparse.json");
            out_ck.save(&ck_path)?;
            let t_path = out.join("prune_trace.csv");
            write_trace_csv(&trace, &t_path)?;
            manifest.record(&ck_path)?;
            manifest.record(&t_path)?;
            manifest.save(out)?;
        }
        Command::Detect { checkpoint, tm, dm } => {
            let mut manifest = RunManifest::new("detect", &argv, seed);
            let ck = Checkpoint::load(&checkpoint)?;
            let h = detect(&ck.model, tm, dm)?;
            let h_path = out.join("hierarchy.json");
            std::fs::write(&h_path, serde_json::to_string_pretty(&h)?)?;
            let d_path = out.join("hierarchy.dot");
            std::fs::write(&d_path, export_dot(&h, &ck.model)?)?;
            manifest.record(&h_path)?;
            manifest.record(&d_path)?;
            manifest.save(out)?;
            println!("{} modules, {} uses-edges -> {}", h.modules.len(), h.uses.len(), h_path.display());
        }
        Command::Analyze { checkpoint, inputs_a, percent, alpha } => {
            let mut manifest = RunManifest::new("analyze", &argv, seed);
            let ck = Checkpoint::load(&checkpoint)?;
            let pi = path_product_matrix(&ck.model);
            let pi_path = out.join("pi.csv");
            write_pi_csv(&pi, &pi_path)?;
            let coverages: Vec<_> = (1..=ck.model.n_hidden_layers())
                .map(|l| layer_coverage(&ck.model, l, percent))
                .collect::<Result<_>>()?;
            for c in &coverages {
                println!("layer {}: {} units cover {}%", c.layer, c.n_units, c.percent);
            }
            let cov_path = out.join("coverage.csv");
            write_coverage_csv(&coverages, &cov_path)?;
            let n_in = pi.n_inputs;
            let n_out = pi.n_outputs;
            let a: Vec<usize> = match inputs_a {
                Some(s) => parse_indices(&s)?,
                None => (0..n_in / 2).collect(),
            };
            let own: Vec<usize> = (0..n_out / 2).collect();
            let other: Vec<usize> = (n_out / 2..n_out).collect();
            let t1 = input_separability_test(&ck.model, &a, &own, &other, alpha)?;
            let b: Vec<usize> = (0..n_in).filter(|i| !a.contains(i)).collect();
            let t2 = input_separability_test(&ck.model, &b, &other, &own, alpha)?;
            let report = serde_json::json!({
                "alpha": alpha,
                "group_a": {"inputs": a, "reject": t1.reject, "p": t1.result.p, "t": t1.result.t},
                "group_b": {"inputs": b, "reject": t2.reject, "p": t2.result.p, "t": t2.result.t},
            });
            let w_path = out.join("welch.json");
            std::fs::write(&w_path, serde_json::to_string_pretty(&report)?)?;
            println!("group A reject={} (p={:.4}), group B reject={} (p={:.4})", t1.reject, t1.result.p, t2.reject, t2.result.p);
            manifest.record(&pi_path)?;
            manifest.record(&cov_path)?;
            manifest.record(&w_path)?;
            manifest.save(out)?;
        }
        Command::Eval { config, min_success } => {
            let mut manifest = RunManifest::new("eval", &argv, seed);
            let cfg: TrialConfig = serde_json::from_str(&std::fs::read_to_string(&config)?)?;
            let report = run_grid(&cfg)?;
            let csv_path = out.join("trials.csv");
            write_trials_csv(&report, &csv_path)?;
            let json_path = out.join("report.json");
            std::fs::write(&json_path, serde_json::to_string_pretty(&report)?)?;
            manifest.record(&csv_path)?;
            manifest.record(&json_path)?;
            manifest.save(out)?;
            for d in &report.per_depth {
                println!(
                    "depth {}: exact {:.2} inputs {:.2} outputs {:.2} ({} trials)",
                    d.depth, d.exact_structure, d.input_modules, d.output_modules, d.trials
                );
            }
            let rate = report.success_rate();
            println!("overall exact-structure rate: {rate:.3}");
            if let Some(min) = min_success {
                if rate < min {
                    eprintln!("success rate {rate:.3} below required {min:.3}");
                    code = 1;
                }
            }
        }
        Command::Viz { hierarchy, checkpoint } => {
            let mut manifest = RunManifest::new("viz", &argv, seed);
            let h: ModuleHierarchy = serde_json::from_str(&std::fs::read_to_string(&hierarchy)?)?;
            let dot = match checkpoint {
                Some(ck_path) => export_dot(&h, &Checkpoint::load(&ck_path)?.model)?,
                None => export_modules_dot(&h),
            };
            let d_path = out.join("hierarchy.dot");
            std::fs::write(&d_path, dot)?;
            manifest.record(&d_path)?;
            manifest.save(out)?;
            println!("wrote {}", d_path.display());
        }
    }
    Ok(code)
}

/// Entry point for the `modnet` binary; returns the process exit code.
pub fn cli_main() -> i32 {
    let cli = Cli::parse();
    if cli.threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global();
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
