//! Preset fidelity: the literal parameter formulas stay usable at toy sizes
//! and the calibrated preset agrees with them on every structural invariant.

use transship_core::covers::{self, CoverParams, ExactForestOracle, PresetKind};
use transship_core::driver::{self, DriverParams};
use transship_core::exact;
use transship_core::gen;
use transship_core::minor_agg::RoundLedger;

#[test]
fn literal_preset_cover_invariants_hold_at_toy_sizes() {
    for n in [2usize, 5, 8] {
        let g = gen::path(n);
        for kind in [PresetKind::Paper, PresetKind::Desk] {
            let params = CoverParams::for_preset(kind, n);
            let mut ledger = RoundLedger::new();
            let cover =
                covers::sparse_cover(&g, 64.0, &mut ExactForestOracle, &params, &mut ledger)
                    .unwrap_or_else(|e| panic!("n = {n}, {kind:?}: {e}"));
            covers::validate_cover(&g, &cover).unwrap_or_else(|e| panic!("n = {n}, {kind:?}: {e}"));
            assert!(cover.clusterings.len() <= params.sparse_rounds);
        }
    }
}

#[test]
fn literal_preset_pipeline_solves_toy_instances() {
    for n in [2usize, 4, 8] {
        let g = gen::path(n);
        let mut params = DriverParams::paper(n);
        params.debug_checks = true;
        let mut ledger = RoundLedger::new();
        let sol = driver::solve_sssp(&g, &[0], 0.5, &params, &mut ledger)
            .unwrap_or_else(|e| panic!("n = {n}: {e}"));
        let dist = exact::dijkstra(&g, &[0]).dist;
        for v in 0..n {
            let d = dist[v].unwrap() as f64;
            assert!(sol.label[v].unwrap() <= 1.5 * d + 1e-9, "n = {n} node {v}");
        }
        assert_eq!(sol.stats.forest_failures, 0);
        assert_eq!(sol.stats.potential_failures, 0);
    }
}

#[test]
fn literal_preset_transshipment_certifies_toy_instances() {
    let g = gen::path(6);
    let params = DriverParams::paper(6);
    let b = transship_core::graph::Demand {
        values: vec![-2.0, 0.0, 1.0, 0.0, 0.0, 1.0],
    };
    let mut ledger = RoundLedger::new();
    let (pair, _) =
        driver::solve_transshipment(&g, &b, 0.25, &params, &mut ledger).unwrap();
    let cost = transship_core::graph::flow_cost(&pair.flow, &g);
    // Optimum is 2 + 5 by inspection.
    assert!(cost <= 1.25 * 7.0 + 1e-9, "cost {cost}");
    assert!(exact::satisfies(&g, &pair.flow, &b, 1e-9));
}

#[test]
fn pipeline_is_deterministic_end_to_end() {
    let g = gen::random_graph(30, 0.15, 77);
    let run = || {
        let params = DriverParams::desk(30);
        let mut ledger = RoundLedger::new();
        let sol = driver::solve_sssp(&g, &[2, 9], 0.5, &params, &mut ledger).unwrap();
        (sol.label.clone(), sol.parent.clone(), ledger.rounds)
    };
    let a = run();
    let b = run();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
    assert_eq!(a.2, b.2, "round ledgers must match exactly");
}

#[test]
fn transshipment_rejects_per_component_imbalance() {
    let g = transship_core::graph::WeightedGraph::new(
        4,
        vec![(0, 1, 1), (2, 3, 1)],
        0,
    )
    .unwrap();
    let b = transship_core::graph::Demand { values: vec![-1.0, 0.0, 0.0, 1.0] };
    let params = DriverParams::desk(4);
    let mut ledger = RoundLedger::new();
    let err = driver::solve_transshipment(&g, &b, 0.25, &params, &mut ledger);
    assert!(matches!(
        err,
        Err(transship_core::driver::DriverError::UnbalancedComponent { .. })
    ));
}

#[test]
fn augmented_graph_preserves_short_distances() {
    // Distances at most 2D between base nodes survive the augmentation.
    for seed in 0..10u64 {
        let g = gen::random_graph(24, 0.2, seed);
        let d = 40 + (seed as i64 % 50);
        let aug = transship_core::graph::build_augmented(&g, &[0], d).unwrap();
        let base = exact::dijkstra(&g, &[seed as usize % 24]).dist;
        let lifted = exact::dijkstra(&aug.graph, &[seed as usize % 24]).dist;
        for v in 0..24 {
            let (Some(b), Some(l)) = (base[v], lifted[v]) else { continue };
            if b <= 2 * d {
                assert_eq!(b, l, "seed {seed} node {v}");
            } else {
                assert!(l <= 2 * d, "seed {seed} node {v}");
            }
        }
    }
}
