//! Construction and evaluation of the cluster-hierarchy l1-oblivious routing
//! operator.
//!
//! Demands are routed level by level: each node spreads its unit among the
//! clusters containing it proportionally to how deep it sits inside each
//! (the boundary potential), and every cluster pair (C, C') on consecutive
//! levels with C inside C' carries flow between the cluster centers along
//! the tree path in C'. The operator is never materialized as a matrix;
//! applications walk the stored pair paths lazily.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::covers::{self, ExactForestOracle};
use crate::exact;
use crate::graph::{
    build_augmented, AugmentedGraph, Demand, EdgeId, Flow, NodeId, WeightedGraph,
};
use crate::minor_agg::RoundLedger;

#[derive(Debug, Error)]
pub enum RoutingError {
    #[error("node {node} has zero routing weight at level {level}: the cover does not reach it deeply enough")]
    ZeroWeight { node: NodeId, level: usize },
    #[error("cluster center walk failed at node {node}: not inside the enclosing tree")]
    CenterOutsideTree { node: NodeId },
    #[error("no cluster of the top structure contains every node; the ladder does not reach the graph diameter")]
    NoAllContainingCluster,
    #[error("distance structures for scales 1..={want} required, got {got}")]
    MissingScales { want: usize, got: usize },
    #[error("demand does not sum to zero (sum {sum})")]
    UnbalancedDemand { sum: f64 },
    #[error("input length {got}, expected {want}")]
    LengthMismatch { got: usize, want: usize },
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("cover construction failed: {0}")]
    Cover(String),
}

/// One cluster of a distance structure: members with boundary potentials and
/// a rooted spanning tree.
#[derive(Debug, Clone)]
pub struct StructCluster {
    /// Sorted member list.
    pub members: Vec<NodeId>,
    /// Boundary potential per member (parallel to `members`); implicitly 0
    /// outside the cluster.
    pub dtilde: Vec<f64>,
    pub center: NodeId,
    /// child -> (parent, edge), rooted at `center`; spans the members.
    pub tree: BTreeMap<NodeId, (NodeId, EdgeId)>,
}

impl StructCluster {
    pub fn dtilde_of(&self, v: NodeId) -> f64 {
        match self.members.binary_search(&v) {
            Ok(i) => self.dtilde[i],
            Err(_) => 0.0,
        }
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.members.binary_search(&v).is_ok()
    }
}

#[derive(Debug, Clone)]
pub struct StructClustering {
    pub clusters: Vec<StructCluster>,
}

/// Per-scale distance structure: a sparse cover with cluster trees and
/// boundary potentials.
#[derive(Debug, Clone)]
pub struct DistanceStructure {
    pub scale_index: usize,
    /// The scale value D_i.
    pub scale_d: f64,
    /// Declared covering radius (scale_d / tau).
    pub covering_radius: f64,
    pub clusterings: Vec<StructClustering>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Topology {
    Augmented,
    WholeGraph,
}

#[derive(Debug, Clone)]
struct RCluster {
    members: Vec<NodeId>,
    dtilde: Vec<f64>,
    center: NodeId,
    tree: BTreeMap<NodeId, (NodeId, EdgeId)>,
    level_d: f64,
}

impl RCluster {
    fn dtilde_of(&self, v: NodeId) -> f64 {
        match self.members.binary_search(&v) {
            Ok(i) => self.dtilde[i],
            Err(_) => 0.0,
        }
    }
}

#[derive(Debug, Clone)]
struct Pair {
    lower: usize,
    upper: usize,
    /// Signed edge path from the lower center to the upper center.
    path: Vec<(EdgeId, f64)>,
}

/// The factored routing operator.
pub struct RoutingOperator {
    graph: WeightedGraph,
    /// levels[li] = clusterings of arena indices, li = 0 is the first level.
    levels: Vec<Vec<Vec<usize>>>,
    clusters: Vec<RCluster>,
    /// Arena index of the all-containing top cluster.
    top: usize,
    /// level_of[arena idx]; the top cluster maps to levels.len().
    level_of: Vec<usize>,
    pairs: Vec<Pair>,
    /// weight[li][v] = sum of deepness coefficients at that level.
    weight: Vec<Vec<f64>>,
    top_weight: Vec<f64>,
    tau: f64,
    offset: f64,
    topology: Topology,
    augmented: Option<AugmentedGraph>,
    alpha_bound: f64,
}

fn coefficient(dtilde: f64, level_d: f64, offset: f64) -> f64 {
    (dtilde / level_d - offset).max(0.0)
}

fn is_subset(a: &[NodeId], b: &[NodeId]) -> bool {
    let mut j = 0usize;
    for &x in a {
        while j < b.len() && b[j] < x {
            j += 1;
        }
        if j == b.len() || b[j] != x {
            return false;
        }
    }
    true
}

impl RoutingOperator {
    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn augmented(&self) -> Option<&AugmentedGraph> {
        self.augmented.as_ref()
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn is_whole_graph(&self) -> bool {
        self.topology == Topology::WholeGraph
    }

    pub fn alpha_bound(&self) -> f64 {
        self.alpha_bound
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn pair_count(&self) -> usize {
        self.pairs.len()
    }

    /// (lower members, upper members) of a pair, for tests.
    pub fn pair_members(&self, pair_idx: usize) -> (&[NodeId], &[NodeId]) {
        let p = &self.pairs[pair_idx];
        (&self.clusters[p.lower].members, &self.clusters[p.upper].members)
    }

    /// Edges used by a pair's center path.
    pub fn pair_path(&self, pair_idx: usize) -> &[(EdgeId, f64)] {
        &self.pairs[pair_idx].path
    }

    /// The deepness-product coefficient of node v for a consecutive-level
    /// cluster pair; zero when v is outside either cluster.
    pub fn pair_coefficient(&self, pair_idx: usize, v: NodeId) -> f64 {
        let pair = &self.pairs[pair_idx];
        let lower = &self.clusters[pair.lower];
        let upper = &self.clusters[pair.upper];
        let pl = coefficient(lower.dtilde_of(v), lower.level_d, self.offset);
        let pu = coefficient(upper.dtilde_of(v), upper.level_d, self.offset);
        if pl == 0.0 || pu == 0.0 {
            return 0.0;
        }
        let wl = self.weight_at(self.level_of[pair.lower], v);
        let wu = self.weight_at(self.level_of[pair.upper], v);
        (pl / wl) * (pu / wu)
    }

    fn weight_at(&self, level_index: usize, v: NodeId) -> f64 {
        if level_index == self.levels.len() {
            self.top_weight[v]
        } else {
            self.weight[level_index][v]
        }
    }

    /// First-level cluster arena indices (the top cluster when there are no
    /// intermediate levels).
    fn first_level(&self) -> Vec<usize> {
        match self.levels.first() {
            Some(level) => level.iter().flatten().copied().collect(),
            None => vec![self.top],
        }
    }

    fn first_level_weight(&self, v: NodeId) -> f64 {
        if self.levels.is_empty() {
            self.top_weight[v]
        } else {
            self.weight[0][v]
        }
    }

    /// Routes a zero-sum demand into a flow satisfying exactly that demand.
    pub fn apply_r(&self, b: &Demand, ledger: &mut RoundLedger) -> Result<Flow, RoutingError> {
        let n = self.node_count();
        if b.values.len() != n {
            return Err(RoutingError::LengthMismatch { got: b.values.len(), want: n });
        }
        let sum: f64 = crate::graph::compensated_sum(b.values.iter().copied());
        if sum.abs() > 1e-6 * b.l1_norm().max(1.0) {
            return Err(RoutingError::UnbalancedDemand { sum });
        }
        let mut flow = Flow::zero(self.graph.edge_count());
        // Level 0 -> first level: every node pushes its unit toward the
        // centers of the first-level clusters containing it.
        for ci in self.first_level() {
            let cluster = &self.clusters[ci];
            for (mi, &v) in cluster.members.iter().enumerate() {
                if b.values[v] == 0.0 {
                    continue;
                }
                let p = coefficient(cluster.dtilde[mi], cluster.level_d, self.offset);
                if p == 0.0 {
                    continue;
                }
                let scalar = -b.values[v] * p / self.first_level_weight(v);
                self.push_tree_path(cluster, v, scalar, &mut flow)?;
            }
        }
        // Consecutive-level pairs.
        for pi in 0..self.pairs.len() {
            let scalar = -self.pair_demand_sum(pi, b);
            if scalar != 0.0 {
                for &(e, sign) in &self.pairs[pi].path {
                    flow.values[e] += sign * scalar;
                }
            }
        }
        self.charge_apply(ledger);
        Ok(flow)
    }

    /// Transpose application: edge-cost vector to node values.
    pub fn apply_rt(
        &self,
        costs: &[f64],
        ledger: &mut RoundLedger,
    ) -> Result<Vec<f64>, RoutingError> {
        let m = self.graph.edge_count();
        if costs.len() != m {
            return Err(RoutingError::LengthMismatch { got: costs.len(), want: m });
        }
        let n = self.node_count();
        let mut out = vec![0.0; n];
        for ci in self.first_level() {
            let cluster = &self.clusters[ci];
            for (mi, &v) in cluster.members.iter().enumerate() {
                let p = coefficient(cluster.dtilde[mi], cluster.level_d, self.offset);
                if p == 0.0 {
                    continue;
                }
                let path_sum = self.tree_path_sum(cluster, v, costs)?;
                out[v] -= p / self.first_level_weight(v) * path_sum;
            }
        }
        for pi in 0..self.pairs.len() {
            let path_sum: f64 = self.pairs[pi]
                .path
                .iter()
                .map(|&(e, s)| s * costs[e])
                .sum();
            if path_sum != 0.0 {
                self.pair_scatter(pi, path_sum, &mut out);
            }
        }
        self.charge_apply(ledger);
        Ok(out)
    }

    fn charge_apply(&self, ledger: &mut RoundLedger) {
        let logn = (usize::BITS - self.node_count().max(2).leading_zeros()) as u64;
        ledger.charge((self.levels.len() as u64 + 1) * (logn + 3));
    }

    fn pair_demand_sum(&self, pair_idx: usize, b: &Demand) -> f64 {
        let pair = &self.pairs[pair_idx];
        let lower = &self.clusters[pair.lower];
        let upper = &self.clusters[pair.upper];
        let ll = self.level_of[pair.lower];
        let ul = self.level_of[pair.upper];
        let mut acc = 0.0;
        for (mi, &v) in lower.members.iter().enumerate() {
            if b.values[v] == 0.0 {
                continue;
            }
            let pl = coefficient(lower.dtilde[mi], lower.level_d, self.offset);
            if pl == 0.0 {
                continue;
            }
            let pu = coefficient(upper.dtilde_of(v), upper.level_d, self.offset);
            if pu == 0.0 {
                continue;
            }
            acc += b.values[v] * (pl / self.weight_at(ll, v)) * (pu / self.weight_at(ul, v));
        }
        acc
    }

    fn pair_scatter(&self, pair_idx: usize, path_sum: f64, out: &mut [f64]) {
        let pair = &self.pairs[pair_idx];
        let lower = &self.clusters[pair.lower];
        let upper = &self.clusters[pair.upper];
        let ll = self.level_of[pair.lower];
        let ul = self.level_of[pair.upper];
        for (mi, &v) in lower.members.iter().enumerate() {
            let pl = coefficient(lower.dtilde[mi], lower.level_d, self.offset);
            if pl == 0.0 {
                continue;
            }
            let pu = coefficient(upper.dtilde_of(v), upper.level_d, self.offset);
            if pu == 0.0 {
                continue;
            }
            out[v] -= (pl / self.weight_at(ll, v)) * (pu / self.weight_at(ul, v)) * path_sum;
        }
    }

    fn push_tree_path(
        &self,
        cluster: &RCluster,
        v: NodeId,
        scalar: f64,
        flow: &mut Flow,
    ) -> Result<(), RoutingError> {
        let mut u = v;
        let mut hops = 0usize;
        while u != cluster.center {
            let Some(&(p, e)) = cluster.tree.get(&u) else {
                return Err(RoutingError::CenterOutsideTree { node: u });
            };
            let sign = if self.graph.edge(e).u == u { 1.0 } else { -1.0 };
            flow.values[e] += sign * scalar;
            u = p;
            hops += 1;
            if hops > self.node_count() {
                return Err(RoutingError::CenterOutsideTree { node: v });
            }
        }
        Ok(())
    }

    fn tree_path_sum(
        &self,
        cluster: &RCluster,
        v: NodeId,
        costs: &[f64],
    ) -> Result<f64, RoutingError> {
        let mut acc = 0.0;
        let mut u = v;
        let mut hops = 0usize;
        while u != cluster.center {
            let Some(&(p, e)) = cluster.tree.get(&u) else {
                return Err(RoutingError::CenterOutsideTree { node: u });
            };
            let sign = if self.graph.edge(e).u == u { 1.0 } else { -1.0 };
            acc += sign * costs[e];
            u = p;
            hops += 1;
            if hops > self.node_count() {
                return Err(RoutingError::CenterOutsideTree { node: v });
            }
        }
        Ok(acc)
    }
}

struct LevelInput {
    clusterings: Vec<Vec<RCluster>>,
    #[allow(dead_code)]
    level_d: f64,
}

fn assemble(
    graph: WeightedGraph,
    augmented: Option<AugmentedGraph>,
    topology: Topology,
    level_inputs: Vec<LevelInput>,
    top_cluster: RCluster,
    tau: f64,
    beta: f64,
) -> Result<RoutingOperator, RoutingError> {
    let n = graph.node_count();
    let offset = 0.25 / tau;
    let mut clusters: Vec<RCluster> = Vec::new();
    let mut level_of: Vec<usize> = Vec::new();
    let mut levels: Vec<Vec<Vec<usize>>> = Vec::new();
    let mut gamma_max = 1usize;
    for (li, input) in level_inputs.into_iter().enumerate() {
        gamma_max = gamma_max.max(input.clusterings.len());
        let mut level = Vec::new();
        for clustering in input.clusterings {
            let mut idxs = Vec::new();
            for c in clustering {
                idxs.push(clusters.len());
                level_of.push(li);
                clusters.push(c);
            }
            level.push(idxs);
        }
        levels.push(level);
    }
    let top = clusters.len();
    level_of.push(levels.len());
    clusters.push(top_cluster);

    // Per-level weights; every node must be strictly covered at every level.
    let mut weight: Vec<Vec<f64>> = Vec::new();
    for (li, level) in levels.iter().enumerate() {
        let mut w = vec![0.0f64; n];
        for idxs in level {
            for &ci in idxs {
                let c = &clusters[ci];
                for (mi, &v) in c.members.iter().enumerate() {
                    w[v] += coefficient(c.dtilde[mi], c.level_d, offset);
                }
            }
        }
        for v in 0..n {
            if w[v] <= 0.0 {
                return Err(RoutingError::ZeroWeight { node: v, level: li + 1 });
            }
        }
        weight.push(w);
    }
    let mut top_weight = vec![0.0f64; n];
    {
        let c = &clusters[top];
        for (mi, &v) in c.members.iter().enumerate() {
            top_weight[v] += coefficient(c.dtilde[mi], c.level_d, offset);
        }
        for v in 0..n {
            if top_weight[v] <= 0.0 {
                return Err(RoutingError::ZeroWeight { node: v, level: levels.len() + 1 });
            }
        }
    }

    // Pair enumeration: consecutive levels, lower inside upper.
    let mut pairs: Vec<Pair> = Vec::new();
    let build_path = |lower: &RCluster, upper: &RCluster| -> Result<Vec<(EdgeId, f64)>, RoutingError> {
        let mut path = Vec::new();
        let mut u = lower.center;
        let mut hops = 0usize;
        while u != upper.center {
            let Some(&(p, e)) = upper.tree.get(&u) else {
                return Err(RoutingError::CenterOutsideTree { node: u });
            };
            let sign = if graph.edge(e).u == u { 1.0 } else { -1.0 };
            path.push((e, sign));
            u = p;
            hops += 1;
            if hops > n {
                return Err(RoutingError::CenterOutsideTree { node: lower.center });
            }
        }
        Ok(path)
    };
    for li in 0..levels.len() {
        let lower_idxs: Vec<usize> = levels[li].iter().flatten().copied().collect();
        let upper_idxs: Vec<usize> = if li + 1 < levels.len() {
            levels[li + 1].iter().flatten().copied().collect()
        } else {
            vec![top]
        };
        for &lo in &lower_idxs {
            for &up in &upper_idxs {
                if up == top || is_subset(&clusters[lo].members, &clusters[up].members) {
                    let path = build_path(&clusters[lo], &clusters[up])?;
                    pairs.push(Pair { lower: lo, upper: up, path });
                }
            }
        }
    }

    let level_count = levels.len() as f64 + 1.0;
    let gamma = gamma_max as f64;
    let alpha_bound = level_count * gamma.powi(3) * tau * beta;
    Ok(RoutingOperator {
        graph,
        levels,
        clusters,
        top,
        level_of,
        pairs,
        weight,
        top_weight,
        tau,
        offset,
        topology,
        augmented,
        alpha_bound,
    })
}

fn struct_to_rclusters(s: &DistanceStructure) -> Vec<Vec<RCluster>> {
    s.clusterings
        .iter()
        .map(|cl| {
            cl.clusters
                .iter()
                .map(|c| RCluster {
                    members: c.members.clone(),
                    dtilde: c.dtilde.clone(),
                    center: c.center,
                    tree: c.tree.clone(),
                    level_d: s.scale_d,
                })
                .collect()
        })
        .collect()
}

/// Router for the hub-augmented graph of scale `scale_index`: structures for
/// all lower scales become the intermediate levels (with the hub and the
/// super-source as singleton clusters), and a hub-centered star is the top
/// cluster.
pub fn build_router(
    base: &WeightedGraph,
    structures: &[DistanceStructure],
    sources: &[NodeId],
    scale_index: usize,
    d_top: f64,
    tau: f64,
    _ledger: &mut RoundLedger,
) -> Result<RoutingOperator, RoutingError> {
    if scale_index == 0 || structures.len() + 1 != scale_index {
        return Err(RoutingError::MissingScales { want: scale_index.saturating_sub(1), got: structures.len() });
    }
    if sources.is_empty() {
        return Err(RoutingError::Parameter("source set must be nonempty".into()));
    }
    if !(d_top >= 1.0) || d_top > 1e18 {
        return Err(RoutingError::Parameter(format!("top scale {d_top} out of range")));
    }
    let aug = build_augmented(base, sources, d_top.round() as i64)
        .map_err(|e| RoutingError::Parameter(e.to_string()))?;
    let n = base.node_count();
    let hub = aug.hub;
    let s_star = aug.super_source;
    let base_edges = aug.base_edges;

    let singleton = |v: NodeId, level_d: f64| RCluster {
        members: vec![v],
        dtilde: vec![d_top],
        center: v,
        tree: BTreeMap::new(),
        level_d,
    };

    let mut level_inputs = Vec::new();
    for s in structures {
        let mut clusterings = struct_to_rclusters(s);
        clusterings.push(vec![singleton(hub, s.scale_d), singleton(s_star, s.scale_d)]);
        level_inputs.push(LevelInput { clusterings, level_d: s.scale_d });
    }

    // Top cluster: hub-centered star over every node; the super-source hangs
    // off its smallest source.
    let mut tree: BTreeMap<NodeId, (NodeId, EdgeId)> = BTreeMap::new();
    for v in 0..n {
        tree.insert(v, (hub, base_edges + v));
    }
    let s0 = aug.sources[0];
    tree.insert(s_star, (s0, base_edges + n));
    let members: Vec<NodeId> = (0..n + 2).collect();
    let top_cluster = RCluster {
        dtilde: vec![d_top; members.len()],
        members,
        center: hub,
        tree,
        level_d: d_top,
    };
    let beta = match structures.last() {
        Some(s) => d_top / s.scale_d,
        None => 8.0 * tau,
    };
    assemble(
        aug.graph.clone(),
        Some(aug),
        Topology::Augmented,
        level_inputs,
        top_cluster,
        tau,
        beta,
    )
}

/// Router on the base graph itself: requires the top structure to hold a
/// cluster containing every node (its spanning tree caps the top level).
pub fn build_router_whole_graph(
    base: &WeightedGraph,
    structures: &[DistanceStructure],
    tau: f64,
    beta: f64,
    _ledger: &mut RoundLedger,
) -> Result<RoutingOperator, RoutingError> {
    if structures.is_empty() {
        return Err(RoutingError::MissingScales { want: 1, got: 0 });
    }
    let n = base.node_count();
    let last = structures.last().unwrap();
    let mut top_source: Option<&StructCluster> = None;
    'search: for clustering in &last.clusterings {
        for c in &clustering.clusters {
            if c.members.len() == n {
                top_source = Some(c);
                break 'search;
            }
        }
    }
    let Some(all) = top_source else {
        return Err(RoutingError::NoAllContainingCluster);
    };
    let d_top = last.scale_d * beta;
    let top_cluster = RCluster {
        members: all.members.clone(),
        dtilde: vec![d_top; all.members.len()],
        center: all.center,
        tree: all.tree.clone(),
        level_d: d_top,
    };
    let level_inputs = structures
        .iter()
        .map(|s| LevelInput { clusterings: struct_to_rclusters(s), level_d: s.scale_d })
        .collect();
    assemble(
        base.clone(),
        None,
        Topology::WholeGraph,
        level_inputs,
        top_cluster,
        tau,
        beta,
    )
}

/// Synthetic distance structure from exact shortest paths: a padded
/// ball-growing cover with boundary potentials min(dist(v, outside), D).
/// Satisfies every structure invariant; used by tests and the verification
/// harness to isolate routing behavior from cover construction.
pub fn synthetic_structure(
    g: &WeightedGraph,
    scale_index: usize,
    scale_d: f64,
    tau: f64,
    ledger: &mut RoundLedger,
) -> Result<DistanceStructure, RoutingError> {
    let n = g.node_count();
    let rounds = 4 * (usize::BITS - n.max(2).leading_zeros()) as usize + 8;
    let cover = covers::padded_cover(
        g,
        scale_d / tau,
        scale_d,
        rounds,
        &mut ExactForestOracle,
        ledger,
    )
    .map_err(|e| RoutingError::Cover(e.to_string()))?;
    let mut clusterings = Vec::new();
    for clustering in &cover.clusterings {
        let mut out = Vec::new();
        for c in &clustering.clusters {
            let member_set: Vec<bool> = {
                let mut m = vec![false; n];
                for &v in &c.members {
                    m[v] = true;
                }
                m
            };
            let outside: Vec<NodeId> = (0..n).filter(|&v| !member_set[v]).collect();
            let dist = if outside.is_empty() {
                vec![None; n]
            } else {
                exact::dijkstra_truncated(g, &outside, scale_d.ceil() as i64).dist
            };
            let dtilde: Vec<f64> = c
                .members
                .iter()
                .map(|&v| match dist[v] {
                    Some(d) => (d as f64).min(scale_d),
                    None => scale_d,
                })
                .collect();
            out.push(StructCluster {
                members: c.members.clone(),
                dtilde,
                center: c.center,
                tree: c.tree.parents.clone(),
            });
        }
        clusterings.push(StructClustering { clusters: out });
    }
    Ok(DistanceStructure {
        scale_index,
        scale_d,
        covering_radius: scale_d / tau,
        clusterings,
    })
}

/// Distance scales D_i = beta^i for i = 1.. until D_i >= n^2 * max length
/// and D_i / tau exceeds the diameter bound n * max length (so a
/// whole-graph router can always be assembled on top).
pub fn scale_values(g: &WeightedGraph, tau: f64, beta: f64) -> Vec<f64> {
    let n = g.node_count().max(1) as f64;
    let max_len = g.max_length() as f64;
    let target = (n * n * max_len).max(beta);
    let diam_bound = n * max_len;
    let mut out = Vec::new();
    let mut d = beta;
    loop {
        out.push(d);
        if d >= target && d / tau >= diam_bound {
            break;
        }
        d *= beta;
        if d > 4e17 {
            break;
        }
    }
    out
}

/// Synthetic full ladder: exact structures for every scale.
pub fn synthetic_ladder(
    g: &WeightedGraph,
    tau: f64,
    beta: f64,
    ledger: &mut RoundLedger,
) -> Result<Vec<DistanceStructure>, RoutingError> {
    let mut out = Vec::new();
    for (i, d) in scale_values(g, tau, beta).into_iter().enumerate() {
        out.push(synthetic_structure(g, i + 1, d, tau, ledger)?);
    }
    Ok(out)
}

/// Structure invariant validation against exact distances (tests/verify).
pub fn validate_structure(
    g: &WeightedGraph,
    s: &DistanceStructure,
    tau: f64,
) -> Result<(), String> {
    let n = g.node_count();
    let floor = 0.5 * s.scale_d / tau;
    let mut deep_enough = vec![false; n];
    for (ki, clustering) in s.clusterings.iter().enumerate() {
        let mut owner: Vec<Option<usize>> = vec![None; n];
        for (ci, c) in clustering.clusters.iter().enumerate() {
            for &v in &c.members {
                if owner[v].is_some() {
                    return Err(format!("clustering {ki}: node {v} in two clusters"));
                }
                owner[v] = Some(ci);
            }
            // Boundary potential: 0 outside, Lipschitz, dominated by the
            // true boundary distance, floor at depth.
            let member_set: Vec<bool> = {
                let mut m = vec![false; n];
                for &v in &c.members {
                    m[v] = true;
                }
                m
            };
            let outside: Vec<NodeId> = (0..n).filter(|&v| !member_set[v]).collect();
            let dist = if outside.is_empty() {
                vec![None; n]
            } else {
                exact::dijkstra(g, &outside).dist
            };
            for (mi, &v) in c.members.iter().enumerate() {
                let dt = c.dtilde[mi];
                if dt < -1e-9 {
                    return Err(format!("clustering {ki} cluster {ci}: negative potential at {v}"));
                }
                if let Some(d) = dist[v] {
                    if dt > d as f64 + 1e-6 {
                        return Err(format!(
                            "clustering {ki} cluster {ci}: potential {dt} exceeds boundary distance {d} at node {v}"
                        ));
                    }
                    if d as f64 >= s.scale_d / tau && dt < floor - 1e-6 {
                        return Err(format!(
                            "clustering {ki} cluster {ci}: node {v} at depth {d} has potential {dt} below the floor {floor}"
                        ));
                    }
                }
                if dt >= floor {
                    deep_enough[v] = true;
                }
            }
            for (eid, edge) in g.edges().iter().enumerate() {
                let _ = eid;
                let du = c.dtilde_of(edge.u);
                let dv = c.dtilde_of(edge.v);
                if (du - dv).abs() > edge.length as f64 + 1e-6 {
                    return Err(format!(
                        "clustering {ki} cluster {ci}: potential not Lipschitz across edge ({}, {})",
                        edge.u, edge.v
                    ));
                }
            }
            // Tree sanity: spans members, rooted at the center, diameter
            // within the scale.
            for &v in &c.members {
                if v != c.center && !c.tree.contains_key(&v) {
                    return Err(format!("clustering {ki} cluster {ci}: member {v} missing from tree"));
                }
            }
            let tree = covers::ClusterTree { root: c.center, parents: c.tree.clone() };
            let r = tree.radius(g);
            if 2 * r > 2 * (s.scale_d.ceil() as i64) {
                return Err(format!(
                    "clustering {ki} cluster {ci}: tree radius {r} exceeds the scale {}",
                    s.scale_d
                ));
            }
        }
    }
    for v in 0..n {
        if !deep_enough[v] {
            return Err(format!(
                "node {v} is nowhere deeper than the covering floor; routing weights would vanish"
            ));
        }
    }
    Ok(())
}
