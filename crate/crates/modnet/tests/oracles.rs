//! Brute-force oracle equivalences for the analytical core.

mod common;

#[test]
fn path_products_match_exhaustive_enumeration() {
    common::check_path_products(100).unwrap();
}

#[test]
fn partition_metric_matches_exhaustive_search() {
    common::check_modularity(50).unwrap();
}

#[test]
fn backprop_matches_finite_differences() {
    common::check_backprop(20).unwrap();
}

#[test]
fn welch_matches_high_precision_fixtures() {
    common::check_welch().unwrap();
}

#[test]
fn reachability_matches_dfs_closure() {
    common::check_reachability(100).unwrap();
}
