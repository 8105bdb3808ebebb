// Scratch harness: per-cell timing and outcomes of one grid search.

use modnet::dataset::{validation_view, NoiseConfig};
use modnet::graph::{generate, ModularitySpec};
use modnet::mlp::{MaskedMlp, MlpConfig};
use modnet::prune::{sculpt, PruneConfig};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let family = args.first().map(String::as_str).unwrap_or("separable");
    let width: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(24);
    let depth: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2);
    let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0);
    let spec = ModularitySpec::by_name(family).expect("family");
    let graph = generate(&spec, 0).unwrap();
    let table = graph.truth_table().unwrap();
    let mut widths = vec![table.n_inputs()];
    widths.extend(std::iter::repeat(width).take(depth));
    widths.push(table.n_outputs());
    let mut cfg = MlpConfig::new(widths, seed);
    cfg.lr = 0.05;
    cfg.batch_size = 16;
    cfg.epochs = 120;
    let noise = NoiseConfig { sigma: 0.1, seed };
    let mut dense = MaskedMlp::init(&cfg);
    let t0 = Instant::now();
    dense.train(&table, &noise, &cfg).unwrap();
    println!("dense train {:?} acc {}", t0.elapsed(), dense.bitwise_accuracy(&validation_view(&table)).unwrap());
    for &p_u in &[5.0f64, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0] {
        for &p_e in &[0.5f64, 1.0, 1.5, 2.0, 2.5] {
            let pcfg = PruneConfig { p_u, p_e, ..Default::default() };
            let t = Instant::now();
            match sculpt(&dense, &table, &noise, &cfg, &pcfg) {
                Ok((m, trace)) => println!(
                    "cell ({p_u},{p_e}): {:.2?} density {:.5} edges {} units {} rounds {}",
                    t.elapsed(),
                    m.density(),
                    (m.density() * m.total_edges() as f64).round(),
                    m.alive_hidden_units(),
                    trace.rounds.len()
                ),
                Err(e) => println!("cell ({p_u},{p_e}): {:.2?} error {e}", t.elapsed()),
            }
        }
    }
}
