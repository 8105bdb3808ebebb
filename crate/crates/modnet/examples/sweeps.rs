// Scratch: criterion-5 sweeps with per-value printing.
use modnet::eval::{run_grid, TrialConfig, TrialResult};
use modnet::graph::ModularitySpec;
use modnet::prune::GridConfig;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "reuse".into());
    if which == "reuse" {
        for reuse in 1..=8usize {
            let mut cfg = TrialConfig::new(ModularitySpec::reused(reuse));
            cfg.depths = vec![2];
            let t0 = std::time::Instant::now();
            let report = run_grid(&cfg).unwrap();
            let all: Vec<&TrialResult> = report.trials.iter().collect();
            let ok = all.iter().filter(|t| t.flags.map_or(false, |f| f.exact_structure)).count();
            let tags: Vec<String> = all
                .iter()
                .filter(|t| !t.flags.map_or(false, |f| f.exact_structure))
                .map(|t| format!("w{}s{}:{:?}/{:?}", t.width, t.seed, t.failure.as_deref(), t.flags))
                .collect();
            println!("reuse {reuse}: exact {ok}/{} [{:.0?}] {tags:?}", all.len(), t0.elapsed());
        }
    } else {
        for overlap in 0..=4usize {
            let mut cfg = TrialConfig::new(ModularitySpec::overlap(overlap, 2));
            cfg.widths = vec![24];
            cfg.depths = vec![2];
            cfg.grid = GridConfig::reduced();
            let t0 = std::time::Instant::now();
            let report = run_grid(&cfg).unwrap();
            let ok = report.trials.iter().filter(|t| t.flags.map_or(false, |f| f.input_modules)).count();
            println!("overlap {overlap}: input_modules {ok}/{} [{:.0?}]", report.trials.len(), t0.elapsed());
        }
    }
}
