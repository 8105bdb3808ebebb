// Scratch: criterion-3 profile with sculpt applied twice.
use modnet::dataset::NoiseConfig;
use modnet::graph::{generate, ModularitySpec};
use modnet::mlp::{MaskedMlp, MlpConfig};
use modnet::paths::layer_coverage;
use modnet::prune::{sculpt, PruneConfig};

fn main() {
    let gseeds: Vec<u64> = std::env::args().skip(1).map(|a| a.parse().unwrap()).collect();
    let acc: f64 = std::env::var("ACC").map(|v| v.parse().unwrap()).unwrap_or(0.99);
    let spec = ModularitySpec::reused(8);
    for &gseed in &gseeds {
        let graph = generate(&spec, gseed).unwrap();
        let table = graph.truth_table().unwrap();
        let mut hits = 0;
        let mut profile = String::new();
        for &width in &[24usize, 36, 48] {
            for seed in 0..4u64 {
                let mut cfg = MlpConfig::new(vec![4, width, width, table.n_outputs()], seed);
                cfg.lr = 0.05; cfg.batch_size = 16; cfg.epochs = std::env::var("EP").map(|v| v.parse().unwrap()).unwrap_or(120);
                let noise = NoiseConfig { sigma: 0.1, seed };
                let mut mlp = MaskedMlp::init(&cfg);
                mlp.train(&table, &noise, &cfg).unwrap();
                let pcfg = PruneConfig { accuracy_target: acc, ..Default::default() };
                let once = sculpt(&mlp, &table, &noise, &cfg, &pcfg)
                    .and_then(|(s, _)| sculpt(&s, &table, &noise, &cfg, &pcfg));
                match once {
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
