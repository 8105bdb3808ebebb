// Scratch: full 12-trial criterion-3 hit counts per graph seed.
use modnet::dataset::NoiseConfig;
use modnet::graph::{generate, ModularitySpec};
use modnet::mlp::{MaskedMlp, MlpConfig};
use modnet::paths::layer_coverage;
use modnet::prune::{sculpt, PruneConfig};

fn main() {
    let gseeds: Vec<u64> = std::env::args().skip(1).map(|a| a.parse().unwrap()).collect();
    let spec = ModularitySpec::reused(8);
    for &gseed in &gseeds {
        let graph = generate(&spec, gseed).unwrap();
        let table = graph.truth_table().unwrap();
        let mut hits = 0;
        let mut profile = String::new();
        for &width in &[24usize, 36, 48] {
            for seed in 0..4u64 {
                let mut cfg = MlpConfig::new(vec![4, width, width, table.n_outputs()], seed);
                cfg.lr = std::env::var("LR").map(|v| v.parse().unwrap()).unwrap_or(0.05); cfg.batch_size = 16; cfg.epochs = std::env::var("EP").map(|v| v.parse().unwrap()).unwrap_or(120);
                let noise = NoiseConfig { sigma: 0.1, seed };
                let mut mlp = MaskedMlp::init(&cfg);
                mlp.train(&table, &noise, &cfg).unwrap();
                match sculpt(&mlp, &table, &noise, &cfg, &PruneConfig { accuracy_target: std::env::var("ACC").map(|v| v.parse().unwrap()).unwrap_or(0.99), p_e: std::env::var("PE").map(|v| v.parse().unwrap()).unwrap_or(2.0), ..Default::default() }) {
                    Ok((s, _)) => {
                        let c1 = layer_coverage(&s, 1, 90.0).unwrap();
                        let c2 = layer_coverage(&s, 2, 90.0).unwrap();
                        if c1.n_units == 3 && c2.n_units == 2 { hits += 1; }
                        profile.push_str(&format!(" ({},{})", c1.n_units, c2.n_units));
                    }
                    Err(_) => profile.push_str(" (err)"),
                }
            }
        }
        println!("gseed {gseed}: hits {hits}/12 —{profile}");
    }
}
