//! Deterministic, seeded instance generators for tests and the verification
//! harness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{Demand, NodeId, WeightedGraph};

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn path(n: usize) -> WeightedGraph {
    let edges: Vec<(usize, usize, i64)> = (0..n.saturating_sub(1)).map(|i| (i, i + 1, 1)).collect();
    WeightedGraph::new(n, edges, 0).unwrap()
}

pub fn cycle(n: usize) -> WeightedGraph {
    let mut edges: Vec<(usize, usize, i64)> = (0..n - 1).map(|i| (i, i + 1, 1)).collect();
    edges.push((n - 1, 0, 1));
    WeightedGraph::new(n, edges, 0).unwrap()
}

pub fn star(n: usize) -> WeightedGraph {
    let edges: Vec<(usize, usize, i64)> = (1..n).map(|i| (0, i, 1)).collect();
    WeightedGraph::new(n, edges, 0).unwrap()
}

/// r x c grid with unit lengths.
pub fn grid(rows: usize, cols: usize) -> WeightedGraph {
    let idx = |r: usize, c: usize| r * cols + c;
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.push((idx(r, c), idx(r, c + 1), 1));
            }
            if r + 1 < rows {
                edges.push((idx(r, c), idx(r + 1, c), 1));
            }
        }
    }
    WeightedGraph::new(rows * cols, edges, 0).unwrap()
}

/// Connected G(n, p) with random integer lengths in [1, n^2]. A random
/// spanning tree guarantees connectivity; extra edges are sampled with
/// probability p.
pub fn random_graph(n: usize, p: f64, seed: u64) -> WeightedGraph {
    let mut rng = rng_for(seed ^ 0x9e37_79b9_7f4a_7c15);
    let max_len = ((n * n) as i64).max(1);
    let mut edges: Vec<(usize, usize, i64)> = Vec::new();
    for v in 1..n {
        let u = rng.gen_range(0..v);
        edges.push((u, v, rng.gen_range(1..=max_len)));
    }
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.gen_bool(p) {
                edges.push((u, v, rng.gen_range(1..=max_len)));
            }
        }
    }
    WeightedGraph::new(n, edges, 0).unwrap()
}

/// Even-degree multigraph built as a union of random edge-disjoint cycles
/// (parallel edges allowed, self-loops not).
pub fn eulerian_multigraph(n: usize, cycles: usize, seed: u64) -> WeightedGraph {
    let mut rng = rng_for(seed ^ 0x5851_f42d_4c95_7f2d);
    let mut edges: Vec<(usize, usize, i64)> = Vec::new();
    for _ in 0..cycles {
        let len = rng.gen_range(3..=n.max(3).min(12));
        let mut nodes: Vec<usize> = Vec::with_capacity(len);
        while nodes.len() < len {
            let v = rng.gen_range(0..n);
            if nodes.last() != Some(&v) && !(nodes.len() == len - 1 && nodes[0] == v) {
                nodes.push(v);
            }
        }
        for i in 0..len {
            let u = nodes[i];
            let v = nodes[(i + 1) % len];
            if u != v {
                edges.push((u, v, rng.gen_range(1..=9)));
            }
        }
    }
    // Any node pair repeated an odd number of times still has even degree per
    // node because every cycle contributes degree 2 to each visited node.
    WeightedGraph::new(n, edges, 0).unwrap()
}

/// Random zero-sum demand with entries in [-scale, scale] supported on k
/// nodes; the imbalance is folded into the last chosen node.
pub fn random_demand(g: &WeightedGraph, k: usize, scale: f64, seed: u64) -> Demand {
    let n = g.node_count();
    let mut rng = rng_for(seed ^ 0x2545_f491_4f6c_dd1d);
    let k = k.min(n).max(2);
    let mut chosen: Vec<NodeId> = Vec::new();
    while chosen.len() < k {
        let v = rng.gen_range(0..n);
        if !chosen.contains(&v) {
            chosen.push(v);
        }
    }
    let mut b = vec![0.0; n];
    let mut acc = 0.0;
    for &v in chosen.iter().take(k - 1) {
        let x = (rng.gen::<f64>() * 2.0 - 1.0) * scale;
        b[v] = x;
        acc += x;
    }
    b[chosen[k - 1]] = -acc;
    Demand { values: b }
}

/// Single-source demand: one unit into each of k random sinks.
pub fn random_single_source_demand(g: &WeightedGraph, k: usize, seed: u64) -> (NodeId, Demand) {
    let n = g.node_count();
    let mut rng = rng_for(seed ^ 0x94d0_49bb_1331_11eb);
    let source = rng.gen_range(0..n);
    let mut b = vec![0.0; n];
    let mut sinks = 0usize;
    let k = k.min(n - 1).max(1);
    while sinks < k {
        let v = rng.gen_range(0..n);
        if v != source && b[v] == 0.0 {
            b[v] = 1.0;
            sinks += 1;
        }
    }
    b[source] = -(sinks as f64);
    (source, Demand { values: b })
}

/// Tiny integral demand (<= 3 supplies, <= 3 sinks, total <= 6 units) for
/// cross-validating the exact oracle against enumeration.
pub fn small_integral_demand(g: &WeightedGraph, seed: u64) -> Demand {
    let n = g.node_count();
    let mut rng = rng_for(seed ^ 0x853c_49e6_748f_ea9b);
    let mut b = vec![0.0; n];
    let pairs = rng.gen_range(1..=3usize);
    for _ in 0..pairs {
        let s = rng.gen_range(0..n);
        let t = rng.gen_range(0..n);
        if s != t {
            let amt = rng.gen_range(1..=2) as f64;
            b[s] -= amt;
            b[t] += amt;
        }
    }
    Demand { values: b }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_seed_deterministic() {
        let a = random_graph(30, 0.2, 7);
        let b = random_graph(30, 0.2, 7);
        assert_eq!(a.edges(), b.edges());
        let d1 = random_demand(&a, 5, 10.0, 3);
        let d2 = random_demand(&b, 5, 10.0, 3);
        assert_eq!(d1.values, d2.values);
    }

    #[test]
    fn eulerian_generator_yields_even_degrees() {
        for seed in 0..10 {
            let g = eulerian_multigraph(20, 5, seed);
            for v in 0..g.node_count() {
                assert_eq!(g.degree(v) % 2, 0, "seed {seed} node {v}");
            }
        }
    }

    #[test]
    fn path_shape() {
        let g = path(5);
        assert_eq!(g.node_count(), 5);
        assert_eq!(g.edge_count(), 4);
    }

    #[test]
    fn random_demand_balances() {
        let g = path(10);
        for seed in 0..5 {
            assert!(random_demand(&g, 4, 100.0, seed).is_balanced());
        }
    }
}
