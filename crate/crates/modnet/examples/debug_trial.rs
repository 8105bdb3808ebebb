// Scratch harness: run one trial and dump the detected hierarchy.

use modnet::dataset::{validation_view, NoiseConfig};
use modnet::detect::detect;
use modnet::eval::compare;
use modnet::graph::{generate, signature_for_depth, ModularitySpec};
use modnet::mlp::{MaskedMlp, MlpConfig};
use modnet::prune::{grid_search, GridConfig};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let family = args.first().map(String::as_str).unwrap_or("separable");
    let width: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(24);
    let depth: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2);
    let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(0);
    let grid = args.get(4).map(String::as_str).unwrap_or("reduced");
    let lr: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(0.1);
    let spec = ModularitySpec::by_name(family).expect("family");
    let gseed: u64 = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(0);
    let graph = generate(&spec, gseed).unwrap();
    let table = graph.truth_table().unwrap();
    let mut widths = vec![table.n_inputs()];
    widths.extend(std::iter::repeat(width).take(depth));
    widths.push(table.n_outputs());
    let mut cfg = MlpConfig::new(widths, seed);
    cfg.lr = lr;
    cfg.batch_size = 16;
    cfg.epochs = args.get(7).and_then(|s| s.parse().ok()).unwrap_or(120);
    let noise = NoiseConfig { sigma: 0.1, seed };
    let mut dense = MaskedMlp::init(&cfg);
    dense.train(&table, &noise, &cfg).unwrap();
    println!("dense acc {}", dense.bitwise_accuracy(&validation_view(&table)).unwrap());
    let gcfg = if grid == "full" { GridConfig::default() } else { GridConfig::reduced() };
    let outcome = grid_search(&dense, &table, &noise, &cfg, &gcfg).unwrap();
    let best = outcome.best.expect("no accepted cell");
    println!("best cell {:?} density {}", outcome.best_cell, best.density());
    for l in 0..best.n_layers() {
        let w_in = best.widths()[l];
        for o in 0..best.widths()[l + 1] {
            for i in 0..w_in {
                if best.mask_of(l)[o * w_in + i] == 1 {
                    print!("L{l}:{i}->{o} ");
                }
            }
        }
        println!();
    }
    for l in 0..best.n_layers() {
        let feats = modnet::detect::reachability_features(&best, l).unwrap();
        let ck = modnet::detect::choose_k(&feats, -0.2).unwrap();
        println!(
            "layer {l}: k {} tests {} z_sin {:.3} z_sep {:.3} scan {:?}",
            ck.k, ck.tests_ran, ck.z_sin, ck.z_sep,
            ck.scan.iter().map(|(k, m)| (*k, (m * 1000.0).round() / 1000.0)).collect::<Vec<_>>()
        );
        for (i, r) in feats.rows.iter().enumerate() {
            println!("  row {i}: {:?}", r);
        }
    }
    let h = detect(&best, -0.2, 0.9).unwrap();
    println!("layer_k {:?}", h.layer_k);
    for m in &h.modules {
        println!(
            "module {} level {} inputs {:?} outputs {:?} units {:?}",
            m.id, m.level, m.inputs, m.outputs, m.units
        );
    }
    println!("uses {:?}", h.uses);
    let truth = signature_for_depth(&spec, depth);
    println!("truth modules:");
    for m in &truth.modules {
        println!("  {} level {} inputs {:?} outputs {:?}", m.id, m.level, m.inputs, m.outputs);
    }
    println!("truth uses {:?}", truth.uses);
    println!("flags {:?}", compare(&h, &truth));
}
