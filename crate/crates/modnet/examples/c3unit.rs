// Scratch: layer-wise contribution shares of sculpted reused nets.
use modnet::dataset::NoiseConfig;
use modnet::graph::{generate, ModularitySpec};
use modnet::mlp::{MaskedMlp, MlpConfig};
use modnet::paths::layer_coverage;
use modnet::prune::{sculpt, PruneConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let gseed: u64 = args[1].parse().unwrap();
    let width: usize = args[2].parse().unwrap();
    let seed: u64 = args[3].parse().unwrap();
    let graph = generate(&ModularitySpec::reused(8), gseed).unwrap();
    let table = graph.truth_table().unwrap();
    let mut cfg = MlpConfig::new(vec![4, width, width, table.n_outputs()], seed);
    cfg.lr = 0.05; cfg.batch_size = 16; cfg.epochs = 120;
    let noise = NoiseConfig { sigma: 0.1, seed };
    let mut mlp = MaskedMlp::init(&cfg);
    mlp.train(&table, &noise, &cfg).unwrap();
    let pcfg = PruneConfig { accuracy_target: 1.0, ..Default::default() };
    let (s, _) = sculpt(&mlp, &table, &noise, &cfg, &pcfg).unwrap();
    for l in 1..=2usize {
        let c = layer_coverage(&s, l, 90.0).unwrap();
        println!("layer {l}: N90={} shares {:?}", c.n_units, c.contributions);
    }
}
