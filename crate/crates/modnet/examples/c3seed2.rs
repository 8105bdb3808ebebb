// Scratch: structural fingerprint of reused(8) instances per graph seed.
use modnet::graph::{generate, ModularitySpec};

fn main() {
    let spec = ModularitySpec::reused(8);
    for gseed in 0..24u64 {
        let graph = match generate(&spec, gseed) { Ok(g) => g, Err(e) => { println!("g{gseed}: {e}"); continue; } };
        let table = graph.truth_table().unwrap();
        let n = table.n_outputs();
        let rows = table.rows();
        let mut cols: Vec<u32> = (0..n)
            .map(|j| (0..rows).fold(0u32, |acc, r| acc << 1 | table.output_bit(r, j) as u32))
            .collect();
        cols.sort();
        cols.dedup();
        let distinct_rows: std::collections::BTreeSet<&[u8]> =
            (0..rows).map(|r| table.output_row(r)).collect();
        println!(
            "g{gseed}: distinct output fns {} | joint row patterns {} | cols {:04x?}",
            cols.len(), distinct_rows.len(), cols
        );
    }
}
