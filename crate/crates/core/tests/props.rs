//! Property tests for the algebraic invariants of the core primitives.

use proptest::prelude::*;

use transship_core::euler;
use transship_core::gen;
use transship_core::graph::{
    demand_of_flow, flow_cost, validate_potential, Flow, Potential, WeightedGraph,
};
use transship_core::minor_agg::RoundLedger;

fn arb_graph() -> impl Strategy<Value = WeightedGraph> {
    (4usize..24, 0u64..1000).prop_map(|(n, seed)| gen::random_graph(n, 0.3, seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn max_and_min_of_valid_potentials_are_valid(
        (g, a, b) in arb_graph().prop_flat_map(|g| {
            let n = g.node_count();
            (Just(g), prop::collection::vec(0usize..n, 1), prop::collection::vec(0usize..n, 1))
        })
    ) {
        // Exact distance vectors from arbitrary roots are valid potentials.
        let da = transship_core::exact::dijkstra(&g, &a).dist;
        let db = transship_core::exact::dijkstra(&g, &b).dist;
        let pa = Potential { values: da.iter().map(|d| d.unwrap_or(0) as f64).collect() };
        let pb = Potential { values: db.iter().map(|d| d.unwrap_or(0) as f64).collect() };
        prop_assume!(validate_potential(&pa, &g).is_ok());
        prop_assume!(validate_potential(&pb, &g).is_ok());
        prop_assert!(validate_potential(&Potential::max(&pa, &pb), &g).is_ok());
        prop_assert!(validate_potential(&Potential::min(&pa, &pb), &g).is_ok());
    }

    #[test]
    fn demand_is_linear_in_the_flow(
        (g, xs, ys) in arb_graph().prop_flat_map(|g| {
            let m = g.edge_count();
            (
                Just(g),
                prop::collection::vec(-4.0f64..4.0, m),
                prop::collection::vec(-4.0f64..4.0, m),
            )
        })
    ) {
        let f = Flow { values: xs.clone() };
        let h = Flow { values: ys.clone() };
        let mut fh = f.clone();
        fh.add(&h);
        let bf = demand_of_flow(&f, &g);
        let bh = demand_of_flow(&h, &g);
        let bfh = demand_of_flow(&fh, &g);
        for v in 0..g.node_count() {
            prop_assert!((bfh.values[v] - bf.values[v] - bh.values[v]).abs() < 1e-9);
        }
    }

    #[test]
    fn signed_cost_matches_canonical_bidirected_cost(
        (g, xs) in arb_graph().prop_flat_map(|g| {
            let m = g.edge_count();
            (Just(g), prop::collection::vec(-4.0f64..4.0, m))
        })
    ) {
        let f = Flow { values: xs };
        let bi = f.to_bidirected();
        let back = Flow::from_bidirected(&bi);
        prop_assert!((flow_cost(&f, &g) - transship_core::graph::biflow_cost(&bi, &g)).abs() < 1e-9);
        for e in 0..g.edge_count() {
            prop_assert!((back.values[e] - f.values[e]).abs() < 1e-12);
        }
    }

    #[test]
    fn eulerian_orientations_balance((n, c, seed) in (6usize..40, 2usize..8, 0u64..500)) {
        let g = gen::eulerian_multigraph(n, c, seed);
        let o = euler::orient(&g, &mut RoundLedger::new()).unwrap();
        prop_assert!(o.is_balanced(&g));
    }
}
