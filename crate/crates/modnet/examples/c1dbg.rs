// Scratch: per-seed Welch outcomes for dense depth-1 nets.
use modnet::dataset::NoiseConfig;
use modnet::graph::{generate, ModularitySpec};
use modnet::mlp::{MaskedMlp, MlpConfig};
use modnet::paths::input_separability_test;

fn main() {
    let spec = ModularitySpec::separable(1);
    let graph = generate(&spec, 0).unwrap();
    let table = graph.truth_table().unwrap();
    for lr in [0.05f64, 0.1] {
        for width in [24usize, 36, 48] {
            for depth in [1usize] {
                for seed in 0..4u64 {
                    let mut widths = vec![4];
                    widths.extend(std::iter::repeat(width).take(depth));
                    widths.push(4);
                    let mut cfg = MlpConfig::new(widths, seed);
                    cfg.lr = lr;
                    cfg.batch_size = 16;
                    cfg.epochs = 120;
                    let noise = NoiseConfig { sigma: 0.1, seed };
                    let mut mlp = MaskedMlp::init(&cfg);
                    mlp.train(&table, &noise, &cfg).unwrap();
                    let a = input_separability_test(&mlp, &[0, 1], &[0, 1], &[2, 3], 0.05).unwrap();
                    let b = input_separability_test(&mlp, &[2, 3], &[2, 3], &[0, 1], 0.05).unwrap();
                    println!(
                        "lr {lr} w{width} d{depth} s{seed}: pA {:.4} pB {:.4} reject {}",
                        a.result.p, b.result.p, a.reject && b.reject
                    );
                }
            }
        }
    }
}
