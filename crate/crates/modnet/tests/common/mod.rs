//! Shared oracle checks: each verifies a fast component against an
//! independent brute-force implementation and returns Err with a
//! description on the first disagreement.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use modnet::detect::{agglomerative, modularity_metric, reachability_features};
use modnet::mlp::{MaskedMlp, MlpConfig, ScoreMode};
use modnet::paths::path_product_matrix;
use modnet::stats::welch_one_sided;

pub type CheckResult = Result<(), String>;

fn rng_for(case: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x6f7261636c65 ^ case)
}

/// Random masked net: 2-4 weight layers, 1-5 units per layer, each edge
/// kept with probability `keep`.
pub fn random_net(rng: &mut ChaCha8Rng, keep: f64) -> MaskedMlp {
    let n_layers = rng.gen_range(2..=4usize);
    let widths: Vec<usize> = (0..=n_layers).map(|_| rng.gen_range(1..=5usize)).collect();
    let cfg = MlpConfig::new(widths.clone(), rng.gen());
    let mut mlp = MaskedMlp::init(&cfg);
    for l in 0..n_layers {
        for o in 0..widths[l + 1] {
            for i in 0..widths[l] {
                if rng.gen::<f64>() > keep {
                    mlp.prune_edge(l, o, i);
                }
            }
        }
    }
    mlp
}

// ---------------------------------------------------------------------------
// (a) path products vs exhaustive path enumeration

fn enumerate_paths(mlp: &MaskedMlp, layer: usize, unit: usize) -> Vec<f64> {
    // returns, for the given unit, the summed |weight|-product over all
    // paths to each output unit
    let widths = mlp.widths();
    let last = widths.len() - 1;
    if layer == last {
        let mut v = vec![0.0; widths[last]];
        v[unit] = 1.0;
        return v;
    }
    let w_in = widths[layer];
    let mut acc = vec![0.0; widths[last]];
    for o in 0..widths[layer + 1] {
        let w = mlp.weight(layer, o, unit);
        if w != 0.0 {
            for (a, t) in acc.iter_mut().zip(enumerate_paths(mlp, layer + 1, o)) {
                *a += w.abs() * t;
            }
        }
        let _ = w_in;
    }
    acc
}

pub fn check_path_products(cases: usize) -> CheckResult {
    for case in 0..cases {
        let mut rng = rng_for(case as u64);
        let mlp = random_net(&mut rng, 0.7);
        let pi = path_product_matrix(&mlp);
        for i in 0..pi.n_inputs {
            let oracle = enumerate_paths(&mlp, 0, i);
            for j in 0..pi.n_outputs {
                let got = pi.get(i, j);
                if (got - oracle[j]).abs() > 1e-9 {
                    return Err(format!(
                        "case {case}: pi({i},{j}) = {got}, enumeration gives {}",
                        oracle[j]
                    ));
                }
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// (b) partition metric vs exhaustive partition search

fn naive_metric(dist: &[Vec<f64>], labels: &[usize]) -> f64 {
    let n = dist.len();
    let k = labels.iter().copied().max().unwrap_or(0) + 1;
    if k == 1 {
        return 0.0;
    }
    let mut total = 0.0;
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                d[i][j] = dist[i][j];
                total += dist[i][j];
            }
        }
    }
    if total == 0.0 {
        return 0.0;
    }
    let mut m = 0.0;
    for c in 0..k {
        let mut within = 0.0;
        let mut row = 0.0;
        for i in 0..n {
            if labels[i] != c {
                continue;
            }
            for j in 0..n {
                row += d[i][j] / total;
                if labels[j] == c {
                    within += d[i][j] / total;
                }
            }
        }
        m += within - row * row;
    }
    m
}

/// All set partitions of {0..n-1} as canonical restricted-growth strings.
fn all_partitions(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; n];
    fn rec(i: usize, max_used: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for label in 0..=max_used + 1 {
            cur[i] = label;
            rec(i + 1, max_used.max(label), cur, out);
        }
    }
    if n > 0 {
        rec(1, 0, &mut cur, &mut out);
    }
    out
}

pub fn check_modularity(cases: usize) -> CheckResult {
    for case in 0..cases {
        let mut rng = rng_for(1_000 + case as u64);
        let n = rng.gen_range(4..=8usize);
        let mut dist = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let d = rng.gen::<f64>();
                dist[i][j] = d;
                dist[j][i] = d;
            }
        }
        // metric implementation must agree with the naive formula on every
        // partition, and the dendrogram scan can never beat the global
        // minimum over all partitions
        let mut global = f64::INFINITY;
        for labels in all_partitions(n) {
            let fast = modularity_metric(&dist, &labels);
            let slow = naive_metric(&dist, &labels);
            if (fast - slow).abs() > 1e-9 {
                return Err(format!("case {case}: metric {fast} vs naive {slow} on {labels:?}"));
            }
            global = global.min(slow);
        }
        let dendro = agglomerative(&dist);
        let mut scan_best = (0usize, f64::INFINITY);
        for k in 2..n {
            let m = modularity_metric(&dist, &dendro.labels(k));
            if m <= scan_best.1 {
                scan_best = (k, m);
            }
        }
        if scan_best.1 < global - 1e-9 {
            return Err(format!("case {case}: scan minimum {} beats global {global}", scan_best.1));
        }
        // the scan argmin must be reproducible from the naive metric alone
        let mut naive_best = (0usize, f64::INFINITY);
        for k in 2..n {
            let m = naive_metric(&dist, &dendro.labels(k));
            if m <= naive_best.1 {
                naive_best = (k, m);
            }
        }
        if naive_best.0 != scan_best.0 {
            return Err(format!(
                "case {case}: argmin k disagrees: {} (fast) vs {} (naive)",
                scan_best.0, naive_best.0
            ));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// (c) backprop vs central finite differences

pub fn check_backprop(cases: usize) -> CheckResult {
    for case in 0..cases {
        let mut rng = rng_for(2_000 + case as u64);
        let mut mlp = random_net(&mut rng, 0.85);
        let widths = mlp.widths().to_vec();
        let rows = 6;
        let inputs: Vec<f64> = (0..rows * widths[0]).map(|_| rng.gen::<f64>()).collect();
        let targets: Vec<f64> =
            (0..rows * widths[widths.len() - 1]).map(|_| f64::from(rng.gen::<bool>())).collect();
        let batch = modnet::dataset::Batch {
            rows,
            n_inputs: widths[0],
            n_outputs: widths[widths.len() - 1],
            inputs,
            targets,
        };
        let (_, grads) = mlp.gradients(&batch, 0.0).map_err(|e| e.to_string())?;
        let h = 1e-5;
        for l in 0..widths.len() - 1 {
            for o in 0..widths[l + 1] {
                for i in 0..widths[l] {
                    let masked = mlp.mask_of(l)[o * widths[l] + i] == 0;
                    let g = grads.dw[l][o * widths[l] + i];
                    if masked {
                        if g != 0.0 {
                            return Err(format!("case {case}: masked grad nonzero at {l},{o},{i}"));
                        }
                        continue;
                    }
                    let w0 = mlp.weight(l, o, i);
                    mlp.set_weight(l, o, i, w0 + h);
                    let lp = mlp.loss(&batch).map_err(|e| e.to_string())?;
                    mlp.set_weight(l, o, i, w0 - h);
                    let lm = mlp.loss(&batch).map_err(|e| e.to_string())?;
                    mlp.set_weight(l, o, i, w0);
                    let fd = (lp - lm) / (2.0 * h);
                    let denom = g.abs().max(fd.abs()).max(1e-3);
                    if (g - fd).abs() / denom > 1e-4 {
                        return Err(format!(
                            "case {case}: dw[{l}][{o},{i}] = {g}, finite diff {fd}"
                        ));
                    }
                }
            }
        }
        let _ = ScoreMode::MeanThenAbs;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// (d) Welch p-values vs frozen high-precision fixtures

pub fn check_welch() -> CheckResult {
    let cases: Vec<(&[f64], &[f64], f64, f64)> = vec![
        (&[2.191514, -5.297539][..], &[1.172821, 1.863724, -0.065743, 3.931529, 3.697093, 2.054842, 4.503379][..], -1.0547133646435156, 0.23777393907077973),
        (&[-2.7291, 0.409608, -1.176333, -1.406845, -2.254274][..], &[0.730568, 0.935535, 3.314731, 2.865855, 2.993064][..], -4.6693457247422065, 0.00080290225002906),
        (&[-0.509415, -1.385594, 2.768948, 4.259592, 0.647943, -1.46226, -1.416711][..], &[1.42215, -0.230989, 0.996792, 0.838852, 0.978365, 1.871144][..], -0.6202497967560644, 0.2769862862188882),
        (&[-1.165282, -1.12376, -1.377194, -1.239159, -1.257447, -1.277895][..], &[-1.81497, -1.022383][..], 0.44867480149253625, 0.6347407371902319),
        (&[2.197667, 2.440261, 2.599631, 0.383231, 0.162717, 2.725055, 0.688734][..], &[0.697888, 1.800614, 1.52448, 1.951103, 1.081028][..], 0.38727315141358104, 0.6461661429741817),
        (&[-0.446426, -4.431112, -2.804223, -0.932027][..], &[0.325795, -0.024504, 0.929842, 4.041314, -5.485044, 0.011182, 0.986342, 1.268209][..], -1.8389174012618876, 0.050339251252561834),
        (&[-0.727904, -1.855922, -0.233315, -0.880107, 2.54385, 1.731316, -0.124909][..], &[-1.493908, -3.119501, -0.393288, -1.492025][..], 2.0875184748744684, 0.9652554205329493),
        (&[-1.598608, -3.754946, -1.745818, -1.510275, 2.404506, 1.308982, -3.359672, -2.392009][..], &[0.619345, 2.73441, -1.862641, -1.684604, -5.232033, -0.516938, -2.654573, -1.388323][..], -0.07373355112150215, 0.4711364988284251),
        (&[-1.833604, -3.349776, -0.647802, -1.718531, -0.362071, -0.737282][..], &[-1.694795, 0.692174, 0.772987][..], -1.4713140651932974, 0.11453702311213437),
        (&[-2.0904, -1.472613, -2.049819, -1.81663, -1.074859, -1.806946][..], &[0.579301, -0.465461, 0.391847, 2.046638][..], -4.325460738639697, 0.008012583145825062),
        (&[-2.550472, -1.830533, -0.680804, 1.960952, -2.777827, 0.090055, -0.997905, -0.667172][..], &[2.658965, -0.358122][..], -1.2992305186245003, 0.19055451287318878),
        (&[-3.795406, -3.216772][..], &[-1.871067, 0.435762, 1.275673, -1.929869][..], -3.4538519708131585, 0.015132958916000314),
        (&[-3.874087, -2.026423, 0.52145, -0.332076, -2.35251][..], &[-1.489133, -1.501404, -1.284571, -1.62707, -1.180464, -0.945095][..], -0.35127781598926916, 0.37126602057341185),
        (&[-4.803931, 3.700107, 3.904992, -1.45582, -2.029504, 3.166377, -4.068438][..], &[-1.687793, -0.770765, -1.143527, 0.036105, 2.555174, -0.545425, 0.757432][..], -0.07419749656801256, 0.4713747385397733),
        (&[0.079075, -1.297666, -1.012663][..], &[-0.757011, 2.834274, 1.303796, -0.925022, -0.112407][..], -1.4705375863692582, 0.09650962045430037),
        (&[1.241251, -0.189033, 0.193082, 0.169194, -0.871653][..], &[-0.145398, 0.120423, 0.100999, 0.22524, -0.2084, -0.392793, -0.197746][..], 0.5096894831834169, 0.6828391223695194),
        (&[1.481484, 1.036555, 1.006341, 1.84382, 2.655883, 1.836547, 1.675677, 1.9092][..], &[-1.697375, 1.851144, 0.266507][..], 1.4767149178279437, 0.8648757095849076),
        (&[2.172575, -2.096284][..], &[-0.598805, -1.639697][..], 0.5268161876159282, 0.6581702566985324),
        (&[2.682586, -0.61291, 1.102527, -1.87981, -3.259558, -2.817194][..], &[-0.746274, 1.2052, -0.842139, 1.314637, 0.671987, 0.035255][..], -1.0443796443027453, 0.16651845659179482),
        (&[2.734667, -1.042779, -3.164578, -4.891261, -1.264485][..], &[-1.659169, -0.90039, 1.042451, -0.420884, -0.929118, -2.341075, -3.36988][..], -0.21729046906656063, 0.41796246028936196),
    ];
    for (i, (a, b, t, p)) in cases.iter().enumerate() {
        let r = welch_one_sided(a, b).map_err(|e| e.to_string())?;
        if (r.t - t).abs() > 1e-9 * t.abs().max(1.0) {
            return Err(format!("fixture {i}: t = {} vs {t}", r.t));
        }
        if (r.p - p).abs() > 1e-6 {
            return Err(format!("fixture {i}: p = {} vs {p}", r.p));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// (e) reachability features vs DFS closure

fn dfs_reaches(mlp: &MaskedMlp, from: (usize, usize), to: (usize, usize)) -> bool {
    let widths = mlp.widths();
    let last = widths.len() - 1;
    let alive = |l: usize, u: usize| l == 0 || l == last || mlp.unit_alive(l - 1)[u];
    let mut stack = vec![from];
    let mut seen = std::collections::HashSet::new();
    while let Some((l, u)) = stack.pop() {
        if !seen.insert((l, u)) || l == last {
            continue;
        }
        let w_in = widths[l];
        for v in 0..widths[l + 1] {
            if mlp.mask_of(l)[v * w_in + u] == 1 && alive(l + 1, v) {
                if (l + 1, v) == to {
                    return true;
                }
                stack.push((l + 1, v));
            }
        }
    }
    false
}

pub fn check_reachability(cases: usize) -> CheckResult {
    for case in 0..cases {
        let mut rng = rng_for(3_000 + case as u64);
        let mlp = random_net(&mut rng, 0.4);
        let widths = mlp.widths().to_vec();
        let last = widths.len() - 1;
        for layer in 0..last {
            let features = reachability_features(&mlp, layer).map_err(|e| e.to_string())?;
            // rebuild the column list the same way: alive units of every
            // later layer, layer-major
            let mut cols = Vec::new();
            for l in layer + 1..=last {
                for v in 0..widths[l] {
                    let alive = l == last || mlp.unit_alive(l - 1)[v];
                    if alive {
                        cols.push((l, v));
                    }
                }
            }
            if cols.len() != features.g {
                return Err(format!("case {case}: layer {layer} has g {} vs {}", features.g, cols.len()));
            }
            for (r, &u) in features.units.iter().enumerate() {
                for (c, &target) in cols.iter().enumerate() {
                    let want = u8::from(dfs_reaches(&mlp, (layer, u), target));
                    if features.rows[r][c] != want {
                        return Err(format!(
                            "case {case}: feature ({layer},{u})->{target:?} = {} vs DFS {want}",
                            features.rows[r][c]
                        ));
                    }
                }
            }
        }
    }
    Ok(())
}
