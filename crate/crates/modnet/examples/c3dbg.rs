// Scratch: coverage statistics after sculpt on the reused graph.
use modnet::dataset::NoiseConfig;
use modnet::graph::{generate, ModularitySpec};
use modnet::mlp::{MaskedMlp, MlpConfig};
use modnet::paths::layer_coverage;
use modnet::prune::{sculpt, grid_search, GridConfig, PruneConfig};

fn main() {
    let mode = std::env::args().nth(1).unwrap_or_else(|| "sculpt".into());
    let spec = ModularitySpec::reused(8);
    let graph = generate(&spec, 0).unwrap();
    let table = graph.truth_table().unwrap();
    for width in [24usize, 36, 48] {
        for seed in 0..4u64 {
            let mut widths = vec![4, width, width];
            widths.push(table.n_outputs());
            let mut cfg = MlpConfig::new(widths, seed);
            cfg.lr = 0.05;
            cfg.batch_size = 16;
            cfg.epochs = 120;
            let noise = NoiseConfig { sigma: 0.1, seed };
            let mut mlp = MaskedMlp::init(&cfg);
            mlp.train(&table, &noise, &cfg).unwrap();
            let sparse = if mode == "grid" {
                match grid_search(&mlp, &table, &noise, &cfg, &GridConfig::default()) {
                    Ok(o) => match o.best { Some(m) => m, None => { println!("w{width} s{seed}: dense below target"); continue; } },
                    Err(e) => { println!("w{width} s{seed}: {e}"); continue; }
                }
            } else {
                match sculpt(&mlp, &table, &noise, &cfg, &PruneConfig::default()) {
                    Ok((m, _)) => m,
                    Err(e) => { println!("w{width} s{seed}: {e}"); continue; }
                }
            };
            let c1 = layer_coverage(&sparse, 1, 90.0).unwrap();
            let c2 = layer_coverage(&sparse, 2, 90.0).unwrap();
            println!(
                "w{width} s{seed}: density {:.4} alive ({},{}) N1_90 {} N2_90 {}",
                sparse.density(),
                sparse.unit_alive(0).iter().filter(|&&a| a).count(),
                sparse.unit_alive(1).iter().filter(|&&a| a).count(),
                c1.n_units, c2.n_units
            );
        }
    }
}
