//! Eulerian-orientation oracle: orient every edge of an even-degree graph so
//! each node's in-degree equals its out-degree.
//!
//! At every node the incident edges are paired consecutively in ascending
//! edge-id order; the pairing splits the edge set into closed walks, and each
//! walk is oriented consistently. The walk with smallest edge id sets its own
//! direction from that edge's lower-indexed endpoint.

use thiserror::Error;

use crate::graph::{EdgeId, NodeId, WeightedGraph};
use crate::minor_agg::RoundLedger;

#[derive(Debug, Error)]
pub enum EulerError {
    #[error("node {node} has odd degree {degree}")]
    OddDegree { node: NodeId, degree: usize },
}

/// Per-edge direction flags: `forward[e]` means the edge is oriented from its
/// lower-indexed endpoint to its higher-indexed one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Orientation {
    pub forward: Vec<bool>,
}

impl Orientation {
    /// (out-degree, in-degree) per node under this orientation.
    pub fn degrees(&self, g: &WeightedGraph) -> Vec<(usize, usize)> {
        let mut deg = vec![(0usize, 0usize); g.node_count()];
        for (e, &fwd) in self.forward.iter().enumerate() {
            let edge = g.edge(e);
            let (from, to) = if fwd { (edge.u, edge.v) } else { (edge.v, edge.u) };
            deg[from].0 += 1;
            deg[to].1 += 1;
        }
        deg
    }

    pub fn is_balanced(&self, g: &WeightedGraph) -> bool {
        self.degrees(g).iter().all(|&(o, i)| o == i)
    }
}

/// Orients an even-degree graph so in-degree equals out-degree everywhere.
/// The graph may be disconnected and may contain parallel edges; edges with
/// multiplicity count per copy.
pub fn orient(g: &WeightedGraph, ledger: &mut RoundLedger) -> Result<Orientation, EulerError> {
    let n = g.node_count();
    let m = g.edge_count();
    for v in 0..n {
        if g.degree(v) % 2 != 0 {
            return Err(EulerError::OddDegree { node: v, degree: g.degree(v) });
        }
    }
    // partner[(e, end)] = edge paired with e at that endpoint. end 0 = the
    // edge's lower endpoint u, end 1 = v.
    let mut partner: Vec<[Option<EdgeId>; 2]> = vec![[None, None]; m];
    for v in 0..n {
        // Incident edge ids ascending (adjacency lists are built ascending,
        // but parallel self-symmetric entries keep both slots distinct).
        let mut inc: Vec<EdgeId> = g.neighbors(v).iter().map(|&(_, e)| e).collect();
        inc.sort_unstable();
        for pair in inc.chunks(2) {
            let (a, b) = (pair[0], pair[1]);
            let slot_a = if g.edge(a).u == v { 0 } else { 1 };
            let slot_b = if g.edge(b).u == v { 0 } else { 1 };
            partner[a][slot_a] = Some(b);
            partner[b][slot_b] = Some(a);
        }
    }

    // Walk extraction: follow partners from each unvisited edge. Each walk is
    // discovered once; `forward` is filled while traversing in the direction
    // chosen by the walk's smallest edge id.
    let mut forward = vec![false; m];
    let mut visited = vec![false; m];
    let mut max_walk_len = 0usize;
    for e0 in 0..m {
        if visited[e0] {
            continue;
        }
        // e0 is the smallest unvisited id in its walk: orient it from its
        // lower endpoint.
        let mut walk_len = 0usize;
        let mut e = e0;
        let mut from = g.edge(e0).u;
        loop {
            visited[e] = true;
            walk_len += 1;
            let edge = g.edge(e);
            let to = edge.other(from);
            forward[e] = edge.u == from;
            // Leave `to` via the edge paired with e at `to`.
            let slot = if edge.u == to { 0 } else { 1 };
            let next = partner[e][slot].expect("even degree guarantees a partner");
            from = to;
            e = next;
            if e == e0 {
                debug_assert_eq!(from, g.edge(e0).u, "walk must close at its start");
                break;
            }
        }
        max_walk_len = max_walk_len.max(walk_len);
    }
    // Walk collection is a doubling scheme over walk segments.
    let log_rounds = (usize::BITS - max_walk_len.max(1).leading_zeros()) as u64;
    ledger.charge_labeled("euler-orient", log_rounds + 2);
    Ok(Orientation { forward })
}

/// Follows the pairing from an edge in its assigned direction and checks the
/// walk returns to the start consistently (test support).
pub fn walk_is_consistent(g: &WeightedGraph, o: &Orientation) -> bool {
    let m = g.edge_count();
    let mut partner: Vec<[Option<EdgeId>; 2]> = vec![[None, None]; m];
    for v in 0..g.node_count() {
        let mut inc: Vec<EdgeId> = g.neighbors(v).iter().map(|&(_, e)| e).collect();
        inc.sort_unstable();
        for pair in inc.chunks(2) {
            let (a, b) = (pair[0], pair[1]);
            let slot_a = if g.edge(a).u == v { 0 } else { 1 };
            let slot_b = if g.edge(b).u == v { 0 } else { 1 };
            partner[a][slot_a] = Some(b);
            partner[b][slot_b] = Some(a);
        }
    }
    for e0 in 0..m {
        let mut e = e0;
        let mut steps = 0usize;
        loop {
            let edge = g.edge(e);
            let head = if o.forward[e] { edge.v } else { edge.u };
            let slot = if edge.u == head { 0 } else { 1 };
            let next = partner[e][slot].unwrap();
            // The next edge must leave from `head`.
            let nedge = g.edge(next);
            let ntail = if o.forward[next] { nedge.u } else { nedge.v };
            if ntail != head {
                return false;
            }
            e = next;
            steps += 1;
            if e == e0 {
                break;
            }
            if steps > 2 * m {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;
    use crate::graph::WeightedGraph;

    #[test]
    fn cycle_four_balanced() {
        let g = gen::cycle(4);
        let mut ledger = RoundLedger::new();
        let o = orient(&g, &mut ledger).unwrap();
        for (out_d, in_d) in o.degrees(&g) {
            assert_eq!(out_d, 1);
            assert_eq!(in_d, 1);
        }
    }

    #[test]
    fn two_triangles_sharing_a_vertex() {
        let g = WeightedGraph::new(
            5,
            vec![(0, 1, 1), (1, 2, 1), (0, 2, 1), (2, 3, 1), (3, 4, 1), (2, 4, 1)],
            0,
        )
        .unwrap();
        let mut ledger = RoundLedger::new();
        let o = orient(&g, &mut ledger).unwrap();
        let deg = o.degrees(&g);
        assert_eq!(deg[2], (2, 2));
        assert!(o.is_balanced(&g));
    }

    #[test]
    fn empty_edge_set() {
        let g = WeightedGraph::new(3, vec![], 0).unwrap();
        let mut ledger = RoundLedger::new();
        let o = orient(&g, &mut ledger).unwrap();
        assert!(o.forward.is_empty());
    }

    #[test]
    fn odd_degree_rejected_with_witness() {
        let g = gen::path(3);
        let mut ledger = RoundLedger::new();
        match orient(&g, &mut ledger) {
            Err(EulerError::OddDegree { node, degree }) => {
                assert_eq!(node, 0);
                assert_eq!(degree, 1);
            }
            other => panic!("expected odd-degree error, got {other:?}"),
        }
    }

    #[test]
    fn random_eulerian_multigraphs_balanced() {
        for seed in 0..50 {
            let g = gen::eulerian_multigraph(24, 6, seed);
            let mut ledger = RoundLedger::new();
            let o = orient(&g, &mut ledger).unwrap();
            assert!(o.is_balanced(&g), "seed {seed}");
            assert!(walk_is_consistent(&g, &o), "seed {seed}");
        }
    }

    #[test]
    fn deterministic_orientation() {
        let g = gen::eulerian_multigraph(16, 4, 9);
        let mut l1 = RoundLedger::new();
        let mut l2 = RoundLedger::new();
        assert_eq!(orient(&g, &mut l1).unwrap(), orient(&g, &mut l2).unwrap());
    }

    #[test]
    fn parallel_edges_pair_correctly() {
        // Two parallel edges form a closed walk of length 2.
        let g = WeightedGraph::new(2, vec![(0, 1, 1), (0, 1, 1)], 0).unwrap();
        let mut ledger = RoundLedger::new();
        let o = orient(&g, &mut ledger).unwrap();
        assert!(o.is_balanced(&g));
        assert_ne!(o.forward[0], o.forward[1]);
    }
}
