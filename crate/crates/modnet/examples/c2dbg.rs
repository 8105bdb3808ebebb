// Scratch: sculpt + Welch outcomes for depth-3 cells at two lrs.
use modnet::dataset::{validation_view, NoiseConfig};
use modnet::graph::{generate, ModularitySpec};
use modnet::mlp::{MaskedMlp, MlpConfig};
use modnet::paths::input_separability_test;
use modnet::prune::{sculpt, PruneConfig};

fn main() {
    let spec = ModularitySpec::separable(1);
    let graph = generate(&spec, 0).unwrap();
    let table = graph.truth_table().unwrap();
    for lr in [0.1f64, 0.05] {
        for width in [24usize, 36, 48] {
            for seed in 0..4u64 {
                let mut widths = vec![4];
                widths.extend(std::iter::repeat(width).take(3));
                widths.push(4);
                let mut cfg = MlpConfig::new(widths, seed);
                cfg.lr = lr;
                cfg.batch_size = 16;
                cfg.epochs = 120;
                let noise = NoiseConfig { sigma: 0.1, seed };
                let mut mlp = MaskedMlp::init(&cfg);
                mlp.train(&table, &noise, &cfg).unwrap();
                let acc = mlp.bitwise_accuracy(&validation_view(&table)).unwrap();
                let pcfg = PruneConfig::default();
                match sculpt(&mlp, &table, &noise, &cfg, &pcfg) {
                    Ok((s, _)) => {
                        let a = input_separability_test(&s, &[0, 1], &[0, 1], &[2, 3], 0.05).unwrap();
                        let b = input_separability_test(&s, &[2, 3], &[2, 3], &[0, 1], 0.05).unwrap();
                        println!(
                            "lr {lr} w{width} s{seed}: acc {acc:.3} density {:.4} pA {:.4} pB {:.4} reject {}",
                            s.density(), a.result.p, b.result.p, a.reject && b.reject
                        );
                    }
                    Err(e) => println!("lr {lr} w{width} s{seed}: acc {acc:.3} sculpt error {e}"),
                }
            }
        }
    }
}
