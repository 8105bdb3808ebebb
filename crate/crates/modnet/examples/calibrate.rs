// Scratch harness for tuning trial settings; not part of the public surface.

use modnet::eval::{run_grid, TrialConfig};
use modnet::graph::ModularitySpec;
use modnet::prune::GridConfig;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let family = args.first().map(String::as_str).unwrap_or("separable");
    let grid = args.get(1).map(String::as_str).unwrap_or("reduced");
    let graph_seed: u64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0);
    let spec = match family {
        "overlap0" => ModularitySpec::overlap(0, 2),
        "overlap1" => ModularitySpec::overlap(1, 2),
        "overlap2" => ModularitySpec::overlap(2, 2),
        "overlap3" => ModularitySpec::overlap(3, 2),
        "overlap4" => ModularitySpec::overlap(4, 2),
        "reused1" => ModularitySpec::reused(1),
        "reused2" => ModularitySpec::reused(2),
        "reused4" => ModularitySpec::reused(4),
        name => ModularitySpec::by_name(name).expect("family"),
    };
    let mut cfg = TrialConfig::new(spec);
    cfg.graph_seed = graph_seed;
    if let Some(depths) = args.get(3) {
        cfg.depths = depths.split(',').map(|d| d.parse().unwrap()).collect();
    }
    if grid == "full" {
        cfg.grid = GridConfig::default();
    }
    let t0 = Instant::now();
    let report = run_grid(&cfg).unwrap();
    println!("family {family} grid {grid} graph_seed {graph_seed} elapsed {:?}", t0.elapsed());
    for d in &report.per_depth {
        println!(
            "  depth {}: exact {:.2} in {:.2} out {:.2} mid {:.2} ({})",
            d.depth, d.exact_structure, d.input_modules, d.output_modules, d.middle_separation, d.trials
        );
    }
    for t in &report.trials {
        if t.flags.map_or(true, |f| !f.exact_structure) {
            println!(
                "  miss w{} d{} s{} density {:.4} flags {:?} fail {:?}",
                t.width, t.depth, t.seed, t.density, t.flags, t.failure
            );
        }
    }
}
