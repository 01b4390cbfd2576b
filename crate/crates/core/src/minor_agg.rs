//! Sequential simulator of the Minor-Aggregation round model.
//!
//! A round contracts an edge subset into supernodes, aggregates node values
//! per supernode (consensus), then aggregates per-supernode over incident
//! minor edges. Aggregations always fold in canonical ascending id order, so
//! executions are deterministic even for non-commutative operators. Round
//! accounting (not wall-clock) is the fidelity target: higher-level
//! algorithms charge their documented round formulas to a [`RoundLedger`].

use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

use crate::graph::{EdgeId, NodeId, WeightedGraph};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("message of {got} bits exceeds the configured bound of {bound} bits")]
    MessageTooLarge { got: usize, bound: usize },
    #[error("forest structure invalid: {0}")]
    BadForest(String),
    #[error("input length {got}, expected {want}")]
    LengthMismatch { got: usize, want: usize },
}

/// Size accounting for simulated messages.
pub trait Message: Clone {
    fn bit_size(&self) -> usize;
}

impl Message for u64 {
    fn bit_size(&self) -> usize {
        64
    }
}
impl Message for i64 {
    fn bit_size(&self) -> usize {
        64
    }
}
impl Message for f64 {
    fn bit_size(&self) -> usize {
        64
    }
}
impl Message for usize {
    fn bit_size(&self) -> usize {
        64
    }
}
impl Message for bool {
    fn bit_size(&self) -> usize {
        1
    }
}
impl<A: Message, B: Message> Message for (A, B) {
    fn bit_size(&self) -> usize {
        self.0.bit_size() + self.1.bit_size()
    }
}
impl<T: Message> Message for Option<T> {
    fn bit_size(&self) -> usize {
        1 + self.as_ref().map_or(0, Message::bit_size)
    }
}

/// Default message bound: O(log n) * polylog words, fixed at 4096 bits.
pub const DEFAULT_MESSAGE_BOUND_BITS: usize = 4096;

#[derive(Debug, Clone, Copy)]
pub struct ModelConfig {
    pub message_bound_bits: usize,
    /// In strict mode an oversized message aborts the simulation; otherwise
    /// it is only counted as a warning.
    pub strict: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig { message_bound_bits: DEFAULT_MESSAGE_BOUND_BITS, strict: false }
    }
}

/// Round and oracle-call accounting, labeled by phase.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RoundLedger {
    pub rounds: u64,
    pub phases: BTreeMap<String, u64>,
    pub oracle_calls: BTreeMap<String, u64>,
    pub virtual_nodes: usize,
    pub message_warnings: u64,
    #[serde(skip)]
    current_phase: String,
}

impl RoundLedger {
    pub fn new() -> Self {
        let mut l = RoundLedger::default();
        l.current_phase = "main".to_string();
        l
    }

    pub fn set_phase(&mut self, label: &str) {
        self.current_phase = label.to_string();
    }

    pub fn charge(&mut self, rounds: u64) {
        self.rounds += rounds;
        *self.phases.entry(self.current_phase.clone()).or_insert(0) += rounds;
    }

    pub fn charge_labeled(&mut self, label: &str, rounds: u64) {
        self.rounds += rounds;
        *self.phases.entry(label.to_string()).or_insert(0) += rounds;
    }

    pub fn record_oracle(&mut self, kind: &str) {
        *self.oracle_calls.entry(kind.to_string()).or_insert(0) += 1;
    }

    pub fn record_virtual_nodes(&mut self, count: usize) {
        self.virtual_nodes = self.virtual_nodes.max(count);
    }

    pub fn report(&self) -> serde_json::Value {
        serde_json::json!({
            "rounds": self.rounds,
            "phases": self.phases,
            "oracle_calls": self.oracle_calls,
            "virtual_nodes": self.virtual_nodes,
            "message_warnings": self.message_warnings,
        })
    }
}

/// Output of one simulated round.
#[derive(Debug, Clone)]
pub struct RoundOutput<T> {
    /// Per node: its supernode's consensus value.
    pub consensus: Vec<T>,
    /// Per node: the aggregate over its supernode's incident minor edges
    /// (None when the supernode has no incident minor edge).
    pub aggregate: Vec<Option<T>>,
    /// Per node: representative (smallest node id) of its supernode.
    pub supernode: Vec<NodeId>,
}

struct Dsu {
    parent: Vec<usize>,
}

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu { parent: (0..n).collect() }
    }
    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let r = self.find(self.parent[x]);
            self.parent[x] = r;
        }
        self.parent[x]
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller id becomes the representative.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

fn check_size<T: Message>(
    value: &T,
    config: &ModelConfig,
    ledger: &mut RoundLedger,
) -> Result<(), ModelError> {
    let got = value.bit_size();
    if got > config.message_bound_bits {
        if config.strict {
            return Err(ModelError::MessageTooLarge { got, bound: config.message_bound_bits });
        }
        ledger.message_warnings += 1;
    }
    Ok(())
}

/// Executes one Minor-Aggregation round.
///
/// `contracted[e]` marks edges whose endpoints merge into one supernode.
/// `combine` is the consensus operator over node values (folded ascending by
/// node id). `edge_value` maps a minor edge to the message it offers each
/// endpoint supernode, given both consensus values: it receives
/// `(edge id, y_own, y_other)` and returns the value for the "own" side.
/// `aggregate` folds those per-supernode, ascending by edge id.
pub fn run_round<T, F, Z, G>(
    g: &WeightedGraph,
    config: &ModelConfig,
    ledger: &mut RoundLedger,
    contracted: &[bool],
    node_values: &[T],
    mut combine: F,
    mut edge_value: Z,
    mut aggregate: G,
) -> Result<RoundOutput<T>, ModelError>
where
    T: Message,
    F: FnMut(&T, &T) -> T,
    Z: FnMut(EdgeId, &T, &T) -> T,
    G: FnMut(&T, &T) -> T,
{
    let n = g.node_count();
    if node_values.len() != n {
        return Err(ModelError::LengthMismatch { got: node_values.len(), want: n });
    }
    if contracted.len() != g.edge_count() {
        return Err(ModelError::LengthMismatch { got: contracted.len(), want: g.edge_count() });
    }
    for x in node_values {
        check_size(x, config, ledger)?;
    }
    // Contraction step: supernodes = components of the contracted edge set.
    let mut dsu = Dsu::new(n);
    for (e, &c) in contracted.iter().enumerate() {
        if c {
            let edge = g.edge(e);
            dsu.union(edge.u, edge.v);
        }
    }
    let supernode: Vec<NodeId> = (0..n).map(|v| dsu.find(v)).collect();

    // Consensus step (ascending node id within each supernode).
    let mut consensus_by_rep: BTreeMap<NodeId, T> = BTreeMap::new();
    for v in 0..n {
        let rep = supernode[v];
        match consensus_by_rep.get(&rep) {
            None => {
                consensus_by_rep.insert(rep, node_values[v].clone());
            }
            Some(acc) => {
                let merged = combine(acc, &node_values[v]);
                check_size(&merged, config, ledger)?;
                consensus_by_rep.insert(rep, merged);
            }
        }
    }

    // Aggregation step over minor edges (self-loops removed).
    let mut agg_by_rep: BTreeMap<NodeId, T> = BTreeMap::new();
    for e in 0..g.edge_count() {
        let edge = g.edge(e);
        let (ra, rb) = (supernode[edge.u], supernode[edge.v]);
        if ra == rb {
            continue;
        }
        let ya = consensus_by_rep.get(&ra).unwrap().clone();
        let yb = consensus_by_rep.get(&rb).unwrap().clone();
        for (own, own_y, other_y) in [(ra, &ya, &yb), (rb, &yb, &ya)] {
            let z = edge_value(e, own_y, other_y);
            check_size(&z, config, ledger)?;
            match agg_by_rep.get(&own) {
                None => {
                    agg_by_rep.insert(own, z);
                }
                Some(acc) => {
                    let merged = aggregate(acc, &z);
                    check_size(&merged, config, ledger)?;
                    agg_by_rep.insert(own, merged);
                }
            }
        }
    }

    ledger.charge(1);
    let consensus = (0..n)
        .map(|v| consensus_by_rep.get(&supernode[v]).unwrap().clone())
        .collect();
    let aggregate_out = (0..n).map(|v| agg_by_rep.get(&supernode[v]).cloned()).collect();
    Ok(RoundOutput { consensus, aggregate: aggregate_out, supernode })
}

/// Explicitly contracted minor, for the dual-execution equivalence tests:
/// returns the minor graph (self-loops dropped, parallel edges kept), the
/// node-to-supernode map (supernode ids are compacted ascending by
/// representative), and the minor edge ids' original edge ids.
pub fn contract_graph(
    g: &WeightedGraph,
    contracted: &[bool],
) -> (WeightedGraph, Vec<NodeId>, Vec<EdgeId>) {
    let n = g.node_count();
    let mut dsu = Dsu::new(n);
    for (e, &c) in contracted.iter().enumerate() {
        if c {
            let edge = g.edge(e);
            dsu.union(edge.u, edge.v);
        }
    }
    let mut reps: Vec<NodeId> = (0..n).map(|v| dsu.find(v)).collect();
    let mut sorted_reps: Vec<NodeId> = reps.clone();
    sorted_reps.sort_unstable();
    sorted_reps.dedup();
    let index_of = |r: NodeId| sorted_reps.binary_search(&r).unwrap();
    for r in reps.iter_mut() {
        *r = index_of(*r);
    }
    let mut edges = Vec::new();
    let mut orig = Vec::new();
    for (e, edge) in g.edges().iter().enumerate() {
        let (a, b) = (reps[edge.u], reps[edge.v]);
        if a != b {
            edges.push((a, b, edge.length));
            orig.push(e);
        }
    }
    let minor = WeightedGraph::new(sorted_reps.len(), edges, g.scale_exp()).unwrap();
    (minor, reps, orig)
}

/// Per-node ancestor and descendant aggregates on a rooted forest.
#[derive(Debug, Clone)]
pub struct ForestSums<T> {
    /// Aggregate over v's ancestors (inclusive of v), in root-to-v order.
    pub ancestor: Vec<T>,
    /// Aggregate over v's descendants (inclusive of v).
    pub subtree: Vec<T>,
    /// Derived parent pointers (node, edge id).
    pub parent: Vec<Option<(NodeId, EdgeId)>>,
    pub depth: Vec<usize>,
}

/// Documented round constant: ancestor/subtree sums charge at most
/// `ANCESTOR_SUBTREE_ROUND_FACTOR * ceil(log2 n)` rounds (pointer doubling
/// for the ancestor pass plus the mirrored subtree pass).
pub const ANCESTOR_SUBTREE_ROUND_FACTOR: u64 = 4;

/// Computes ancestor and subtree aggregates over a rooted forest given by
/// per-edge membership flags and per-node root flags. The operator must be
/// associative; evaluation order is deterministic (children ascending by
/// node id; ancestor chains in path order).
pub fn ancestor_subtree_sums<T, F>(
    g: &WeightedGraph,
    ledger: &mut RoundLedger,
    forest_edge: &[bool],
    is_root: &[bool],
    values: &[T],
    mut combine: F,
) -> Result<ForestSums<T>, ModelError>
where
    T: Clone,
    F: FnMut(&T, &T) -> T,
{
    let n = g.node_count();
    if forest_edge.len() != g.edge_count() {
        return Err(ModelError::LengthMismatch { got: forest_edge.len(), want: g.edge_count() });
    }
    if is_root.len() != n || values.len() != n {
        return Err(ModelError::LengthMismatch { got: values.len(), want: n });
    }
    // Orient the forest away from the roots by BFS.
    let mut parent: Vec<Option<(NodeId, EdgeId)>> = vec![None; n];
    let mut depth = vec![usize::MAX; n];
    let mut queue: Vec<NodeId> = Vec::new();
    for v in 0..n {
        if is_root[v] {
            depth[v] = 0;
            queue.push(v);
        }
    }
    let mut head = 0;
    while head < queue.len() {
        let v = queue[head];
        head += 1;
        for &(w, e) in g.neighbors(v) {
            if !forest_edge[e] {
                continue;
            }
            if depth[w] == usize::MAX {
                depth[w] = depth[v] + 1;
                parent[w] = Some((v, e));
                queue.push(w);
            } else if depth[w] != depth[v].wrapping_sub(1) && parent[v].map(|(p, _)| p) != Some(w) {
                // w already reached not as v's parent: either a cycle or a
                // second root in the component.
                if !(depth[w] + 1 == depth[v] && parent[v].map(|(p, _)| p) == Some(w)) {
                    return Err(ModelError::BadForest(format!(
                        "edge {e} closes a cycle or joins two rooted trees"
                    )));
                }
            }
        }
    }
    let touched = queue.len();
    let in_forest_nodes: usize = {
        let mut cnt = vec![false; n];
        for (e, &f) in forest_edge.iter().enumerate() {
            if f {
                let edge = g.edge(e);
                cnt[edge.u] = true;
                cnt[edge.v] = true;
            }
        }
        for v in 0..n {
            if is_root[v] {
                cnt[v] = true;
            }
        }
        cnt.iter().filter(|&&x| x).count()
    };
    if touched < in_forest_nodes {
        return Err(ModelError::BadForest(
            "a forest component has no root".to_string(),
        ));
    }

    // Ancestor pass: pointer doubling over parent chains. jump[v] walks
    // 2^k ancestors up; seg[v] aggregates the (jump[v], v] segment.
    let mut jump: Vec<NodeId> = (0..n)
        .map(|v| parent[v].map(|(p, _)| p).unwrap_or(v))
        .collect();
    let mut seg: Vec<T> = values.to_vec();
    let log_rounds = (usize::BITS - n.max(2).leading_zeros()) as u64;
    for _ in 0..log_rounds {
        let prev_jump = jump.clone();
        let prev_seg = seg.clone();
        for v in 0..n {
            let j = prev_jump[v];
            if j != v && prev_jump[j] != j {
                seg[v] = combine(&prev_seg[j], &prev_seg[v]);
                jump[v] = prev_jump[j];
            }
        }
        ledger.charge(1);
    }
    let mut ancestor: Vec<T> = Vec::with_capacity(n);
    for v in 0..n {
        let j = jump[v];
        if j == v {
            ancestor.push(seg[v].clone());
        } else {
            // jump[v] is the root: prepend its value.
            ancestor.push(combine(&seg[j], &seg[v]));
        }
    }

    // Subtree pass: fold by decreasing depth, children ascending by id.
    let mut order: Vec<NodeId> = (0..n).filter(|&v| depth[v] != usize::MAX).collect();
    order.sort_by_key(|&v| std::cmp::Reverse(depth[v]));
    let mut subtree: Vec<T> = values.to_vec();
    for &v in &order {
        if let Some((p, _)) = parent[v] {
            subtree[p] = combine(&subtree[p], &subtree[v]);
        }
    }
    ledger.charge(log_rounds);

    Ok(ForestSums { ancestor, subtree, parent, depth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;

    fn sum_round(
        g: &WeightedGraph,
        ledger: &mut RoundLedger,
        contracted: &[bool],
        x: &[u64],
    ) -> RoundOutput<u64> {
        run_round(
            g,
            &ModelConfig::default(),
            ledger,
            contracted,
            x,
            |a, b| a + b,
            |_, _, _| 1u64,
            |a, b| a + b,
        )
        .unwrap()
    }

    #[test]
    fn star_no_contraction() {
        let g = gen::star(4);
        let mut ledger = RoundLedger::new();
        let out = sum_round(&g, &mut ledger, &vec![false; 3], &vec![1u64; 4]);
        // Each node is its own supernode with consensus 1.
        assert_eq!(out.consensus, vec![1, 1, 1, 1]);
        // Center has 3 incident minor edges with z = 1 each.
        assert_eq!(out.aggregate[0], Some(3));
        assert_eq!(ledger.rounds, 1);
    }

    #[test]
    fn full_contraction_max_id() {
        let g = gen::random_graph(8, 0.4, 1);
        let mut ledger = RoundLedger::new();
        let ids: Vec<u64> = (0..8).map(|v| v as u64).collect();
        let out = run_round(
            &g,
            &ModelConfig::default(),
            &mut ledger,
            &vec![true; g.edge_count()],
            &ids,
            |a, b| *a.max(b),
            |_, _, _| 0u64,
            |a, b| *a.max(b),
        )
        .unwrap();
        assert!(out.consensus.iter().all(|&y| y == 7));
    }

    #[test]
    fn contracted_path_supernode_sum() {
        // Two-edge path contracted into one supernode: everyone learns 3.
        let g = gen::path(3);
        let mut ledger = RoundLedger::new();
        let out = sum_round(&g, &mut ledger, &[true, true], &[1, 1, 1]);
        assert_eq!(out.consensus, vec![3, 3, 3]);
    }

    #[test]
    fn strict_mode_message_bound() {
        let g = gen::path(2);
        let mut ledger = RoundLedger::new();
        let config = ModelConfig { message_bound_bits: 32, strict: true };
        let res = run_round(
            &g,
            &config,
            &mut ledger,
            &[false],
            &[1u64, 2u64],
            |a, b| a + b,
            |_, _, _| 0u64,
            |a, b| a + b,
        );
        assert!(matches!(res, Err(ModelError::MessageTooLarge { .. })));
    }

    #[test]
    fn minor_execution_matches_contracted_graph() {
        // Running with contraction flags equals running on the explicit minor.
        for seed in 0..5 {
            let g = gen::random_graph(12, 0.3, seed);
            let m = g.edge_count();
            let contracted: Vec<bool> = (0..m).map(|e| e % 3 == 0).collect();
            let x: Vec<u64> = (0..12).map(|v| (v * v + 1) as u64).collect();
            let mut l1 = RoundLedger::new();
            let out = sum_round(&g, &mut l1, &contracted, &x);

            let (minor, node_map, _) = contract_graph(&g, &contracted);
            let mut xm = vec![0u64; minor.node_count()];
            for v in 0..12 {
                xm[node_map[v]] += x[v];
            }
            let mut l2 = RoundLedger::new();
            let out_m = sum_round(&minor, &mut l2, &vec![false; minor.edge_count()], &xm);
            for v in 0..12 {
                assert_eq!(out.consensus[v], out_m.consensus[node_map[v]], "seed {seed} node {v}");
                assert_eq!(out.aggregate[v], out_m.aggregate[node_map[v]], "seed {seed} node {v}");
            }
        }
    }

    #[test]
    fn node_disjoint_scheduling_equivalence() {
        // One pass over two disjoint components equals independent runs.
        let g = WeightedGraph::new(
            6,
            vec![(0, 1, 1), (1, 2, 1), (3, 4, 1), (4, 5, 1)],
            0,
        )
        .unwrap();
        let mut ledger = RoundLedger::new();
        let out = sum_round(&g, &mut ledger, &[true, true, true, true], &[1, 2, 3, 4, 5, 6]);
        assert_eq!(out.consensus[..3], [6, 6, 6]);
        assert_eq!(out.consensus[3..], [15, 15, 15]);
    }

    #[test]
    fn ancestor_subtree_on_single_node() {
        let g = WeightedGraph::new(1, vec![], 0).unwrap();
        let mut ledger = RoundLedger::new();
        let sums =
            ancestor_subtree_sums(&g, &mut ledger, &[], &[true], &[5i64], |a, b| a + b).unwrap();
        assert_eq!(sums.ancestor, vec![5]);
        assert_eq!(sums.subtree, vec![5]);
    }

    #[test]
    fn ancestor_subtree_on_path() {
        // r - a - b rooted at r with unit values.
        let g = gen::path(3);
        let mut ledger = RoundLedger::new();
        let sums = ancestor_subtree_sums(
            &g,
            &mut ledger,
            &[true, true],
            &[true, false, false],
            &[1i64, 1, 1],
            |a, b| a + b,
        )
        .unwrap();
        assert_eq!(sums.subtree, vec![3, 2, 1]);
        assert_eq!(sums.ancestor, vec![1, 2, 3]);
    }

    #[test]
    fn ancestor_subtree_on_star() {
        let g = gen::star(6);
        let mut ledger = RoundLedger::new();
        let sums = ancestor_subtree_sums(
            &g,
            &mut ledger,
            &vec![true; 5],
            &[true, false, false, false, false, false],
            &vec![1i64; 6],
            |a, b| a + b,
        )
        .unwrap();
        assert_eq!(sums.subtree[0], 6);
        assert!(sums.subtree[1..].iter().all(|&s| s == 1));
    }

    #[test]
    fn ancestor_sums_match_recursive_oracle_on_random_forests() {
        for seed in 0..8 {
            let g = gen::random_graph(40, 0.15, seed);
            // Build a BFS forest from nodes 0 and 1 as roots.
            let sp = crate::exact::dijkstra(&g, &[0, 1]);
            let mut forest_edge = vec![false; g.edge_count()];
            for v in 0..40 {
                if let Some((_, e)) = sp.parent[v] {
                    forest_edge[e] = true;
                }
            }
            let roots: Vec<bool> = (0..40).map(|v| v < 2).collect();
            let x: Vec<i64> = (0..40).map(|v| (v % 7 + 1) as i64).collect();
            let mut ledger = RoundLedger::new();
            let sums =
                ancestor_subtree_sums(&g, &mut ledger, &forest_edge, &roots, &x, |a, b| a + b)
                    .unwrap();
            // Recursive oracle.
            for v in 0..40 {
                let mut anc = x[v];
                let mut u = v;
                while let Some((p, _)) = sums.parent[u] {
                    anc += x[p];
                    u = p;
                }
                assert_eq!(sums.ancestor[v], anc, "seed {seed} node {v}");
            }
            let mut sub = x.clone();
            let mut order: Vec<usize> = (0..40).collect();
            order.sort_by_key(|&v| std::cmp::Reverse(sums.depth[v]));
            for &v in &order {
                if let Some((p, _)) = sums.parent[v] {
                    let s = sub[v];
                    sub[p] += s;
                }
            }
            assert_eq!(sums.subtree, sub, "seed {seed}");
        }
    }

    #[test]
    fn ancestor_subtree_round_budget() {
        let g = gen::path(8);
        let mut ledger = RoundLedger::new();
        let forest: Vec<bool> = vec![true; 7];
        let roots: Vec<bool> = (0..8).map(|v| v == 0).collect();
        ancestor_subtree_sums(&g, &mut ledger, &forest, &roots, &vec![1i64; 8], |a, b| a + b)
            .unwrap();
        let budget = ANCESTOR_SUBTREE_ROUND_FACTOR * 3; // ceil(log2 8) = 3
        assert!(ledger.rounds <= budget, "rounds {} > budget {budget}", ledger.rounds);
    }

    #[test]
    fn forest_errors_detected() {
        let g = gen::cycle(4);
        let mut ledger = RoundLedger::new();
        // All cycle edges flagged: not a forest.
        let res = ancestor_subtree_sums(
            &g,
            &mut ledger,
            &vec![true; 4],
            &[true, false, false, false],
            &vec![1i64; 4],
            |a, b| a + b,
        );
        assert!(res.is_err());
        // No root in the component.
        let g2 = gen::path(3);
        let res2 = ancestor_subtree_sums(
            &g2,
            &mut ledger,
            &[true, true],
            &[false, false, false],
            &vec![1i64; 3],
            |a, b| a + b,
        );
        assert!(matches!(res2, Err(ModelError::BadForest(_))));
    }

    #[test]
    fn ledger_reports() {
        let mut ledger = RoundLedger::new();
        assert_eq!(ledger.report()["rounds"], 0);
        ledger.set_phase("cover");
        ledger.charge(3);
        ledger.record_oracle("forest");
        let rep = ledger.report();
        assert_eq!(rep["rounds"], 3);
        assert_eq!(rep["phases"]["cover"], 3);
        assert_eq!(rep["oracle_calls"]["forest"], 1);
    }

    #[test]
    fn determinism_same_inputs_same_ledger() {
        let g = gen::random_graph(15, 0.3, 2);
        let x: Vec<u64> = (0..15).map(|v| v as u64 * 3 + 1) .collect();
        let run = || {
            let mut ledger = RoundLedger::new();
            let out = sum_round(&g, &mut ledger, &vec![false; g.edge_count()], &x);
            (out.consensus, out.aggregate, ledger.rounds)
        };
        assert_eq!(run(), run());
    }
}
