//! Deterministic clustering machinery: weak-radius clustering (bit-phased
//! cluster growing driven by a forest oracle), strong-radius clustering
//! (promotion of dominant children), sparse neighborhood covers built from
//! repeated strong clusterings, and a padded ball-growing cover used to
//! build per-scale distance structures.
//!
//! All constructions are parameterized by an injected [`ForestOracle`]; unit
//! tests use the exact truncated-Dijkstra oracle, the pipeline injects the
//! boosting-based one.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::exact;
use crate::graph::{id_bits_for, EdgeId, NodeId, WeightedGraph};
use crate::minor_agg::RoundLedger;

#[derive(Debug, Error)]
pub enum CoverError {
    #[error("forest oracle violated its contract: {0}")]
    OracleContract(String),
    #[error("cover construction error: {0}")]
    Internal(String),
    #[error("cover rounds exhausted with {remaining} nodes uncovered")]
    RoundsExhausted { remaining: usize },
    #[error(transparent)]
    Boost(#[from] Box<crate::boosting::BoostError>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetKind {
    /// Literal parameter formulas; only feasible for toy sizes.
    Paper,
    /// Calibrated constants for bench-scale runs.
    Desk,
}

/// All clustering constants, exposed so both presets share one code path.
#[derive(Debug, Clone)]
pub struct CoverParams {
    pub preset: PresetKind,
    /// Separation decay per phase (epsilon_c).
    pub epsilon_c: f64,
    /// Identifier width b = ceil(log2 n) + 1.
    pub id_bits: u32,
    /// Phases of the strong clustering (k).
    pub strong_phases: usize,
    /// Rounds of the sparse-cover construction (t).
    pub sparse_rounds: usize,
    /// Delta = delta_ratio * D is the strong-clustering scale inside the
    /// sparse cover.
    pub delta_ratio: f64,
    node_count: usize,
}

impl CoverParams {
    pub fn paper(n: usize) -> Self {
        let b = id_bits_for(n);
        let log2n = (n.max(2) as f64).log2().ceil().max(1.0);
        CoverParams {
            preset: PresetKind::Paper,
            epsilon_c: 1.0 / (100.0 * b as f64 * log2n),
            id_bits: b,
            strong_phases: 3 + log2n as usize,
            sparse_rounds: 100 * log2n as usize,
            delta_ratio: 1.0 / log2n.powi(4).max(1.0),
            node_count: n,
        }
    }

    pub fn desk(n: usize) -> Self {
        let b = id_bits_for(n);
        let log2n = (n.max(2) as f64).log2().ceil().max(1.0);
        CoverParams {
            preset: PresetKind::Desk,
            epsilon_c: 1.0 / (8.0 * b as f64),
            id_bits: b,
            strong_phases: 3 + log2n as usize,
            sparse_rounds: 4 * log2n as usize,
            delta_ratio: 1.0 / 200.0,
            node_count: n,
        }
    }

    pub fn for_preset(kind: PresetKind, n: usize) -> Self {
        match kind {
            PresetKind::Paper => Self::paper(n),
            PresetKind::Desk => Self::desk(n),
        }
    }

    /// Declared separation of a weak clustering at scale d.
    pub fn weak_separation(&self, d: f64) -> f64 {
        (1.0 - self.epsilon_c).powi(self.id_bits as i32) * d
    }

    /// Declared weak radius bound: the tree grows by at most (1+eps)d per
    /// growth step and the member count multiplies by (1+delta/b) per growth
    /// step, so growth steps are capped by log_{1+delta/b}(n).
    pub fn weak_radius_bound(&self, d: f64, delta: f64) -> f64 {
        let growth_cap = self.growth_step_cap(delta) as f64;
        (1.0 + self.epsilon_c) * d * (growth_cap + 1.0)
    }

    fn growth_step_cap(&self, delta: f64) -> usize {
        let rate = (1.0 + delta / self.id_bits as f64).ln();
        ((self.node_count.max(2) as f64).ln() / rate).ceil() as usize + 2
    }

    /// Declared separation of a strong clustering at scale d.
    pub fn strong_separation(&self, d: f64) -> f64 {
        self.epsilon_c * d
    }

    /// Declared strong radius bound (weak bound at the first-phase scale).
    pub fn strong_radius_bound(&self, d: f64) -> f64 {
        let delta = 1.0 / (3.0 * self.strong_phases as f64);
        self.weak_radius_bound(10.0 * d, delta)
    }

    /// Strong-clustering scale used inside the sparse cover.
    pub fn sparse_delta(&self, d: f64) -> f64 {
        self.delta_ratio * d
    }

    /// Declared covering radius of the sparse cover at scale d.
    pub fn sparse_covering_radius(&self, d: f64) -> f64 {
        self.strong_separation(self.sparse_delta(d)) / 10.0
    }
}

/// Rooted forest as returned by a forest oracle.
#[derive(Debug, Clone)]
pub struct RootedForest {
    pub parent: Vec<Option<(NodeId, EdgeId)>>,
    pub in_forest: Vec<bool>,
    /// Root of each forest node's tree (roots map to themselves).
    pub root_of: Vec<Option<NodeId>>,
    /// Forest distance from the root set.
    pub dist: Vec<Option<f64>>,
}

impl RootedForest {
    pub fn node_count(&self) -> usize {
        self.in_forest.iter().filter(|&&x| x).count()
    }
}

/// Shortest-path-forest oracle: given sources S and a radius D, returns a
/// forest rooted at S that contains every node within distance D of S and
/// whose forest distances stretch true distances by at most (1 + stretch()).
pub trait ForestOracle {
    fn stretch(&self) -> f64;
    fn forest(
        &mut self,
        g: &WeightedGraph,
        sources: &[NodeId],
        radius: f64,
        ledger: &mut RoundLedger,
    ) -> Result<RootedForest, CoverError>;

    /// Batched padding test: for every cluster (disjoint member lists) of one
    /// clustering, which members lie strictly deeper than `radius` from the
    /// cluster's complement. The default asks one complement forest per
    /// cluster; implementations may answer all clusters with logarithmically
    /// many queries against rank-coded active unions.
    fn pad_mask(
        &mut self,
        g: &WeightedGraph,
        clusters: &[Vec<NodeId>],
        radius: f64,
        ledger: &mut RoundLedger,
    ) -> Result<Vec<Vec<bool>>, CoverError> {
        let n = g.node_count();
        let mut out = Vec::with_capacity(clusters.len());
        for members in clusters {
            let mut inside = vec![false; n];
            for &v in members {
                inside[v] = true;
            }
            let outside: Vec<NodeId> = (0..n).filter(|&v| !inside[v]).collect();
            if outside.is_empty() {
                out.push(vec![true; members.len()]);
                continue;
            }
            let boundary = self.forest(g, &outside, radius, ledger)?;
            out.push(members.iter().map(|&v| !boundary.in_forest[v]).collect());
        }
        Ok(out)
    }
}

/// Exact truncated-Dijkstra oracle (zero stretch); the test and bootstrap
/// implementation.
pub struct ExactForestOracle;

impl ForestOracle for ExactForestOracle {
    fn stretch(&self) -> f64 {
        0.0
    }

    fn forest(
        &mut self,
        g: &WeightedGraph,
        sources: &[NodeId],
        radius: f64,
        ledger: &mut RoundLedger,
    ) -> Result<RootedForest, CoverError> {
        ledger.record_oracle("forest");
        let r = radius.min(i64::MAX as f64 / 4.0).floor() as i64;
        let sp = exact::dijkstra_truncated(g, sources, r.max(0));
        ledger.charge((usize::BITS - g.node_count().max(2).leading_zeros()) as u64 + 2);
        Ok(forest_from_parents(g.node_count(), &sp))
    }
}

pub fn forest_from_parents(n: usize, sp: &exact::ShortestPaths) -> RootedForest {
    let mut root_of: Vec<Option<NodeId>> = vec![None; n];
    fn chase(
        v: NodeId,
        parent: &[Option<(NodeId, EdgeId)>],
        root_of: &mut Vec<Option<NodeId>>,
        reached: &[Option<i64>],
    ) -> Option<NodeId> {
        if root_of[v].is_some() {
            return root_of[v];
        }
        reached[v]?;
        let r = match parent[v] {
            None => Some(v),
            Some((p, _)) => chase(p, parent, root_of, reached),
        };
        root_of[v] = r;
        r
    }
    for v in 0..n {
        chase(v, &sp.parent, &mut root_of, &sp.dist);
    }
    RootedForest {
        parent: sp.parent.clone(),
        in_forest: sp.dist.iter().map(|d| d.is_some()).collect(),
        root_of,
        dist: sp.dist.iter().map(|d| d.map(|x| x as f64)).collect(),
    }
}

/// Rooted cluster tree; node set may exceed the member set (Steiner nodes)
/// for weak-radius clusters.
#[derive(Debug, Clone)]
pub struct ClusterTree {
    pub root: NodeId,
    /// child -> (parent, edge).
    pub parents: BTreeMap<NodeId, (NodeId, EdgeId)>,
}

impl ClusterTree {
    pub fn singleton(root: NodeId) -> Self {
        ClusterTree { root, parents: BTreeMap::new() }
    }

    pub fn contains(&self, v: NodeId) -> bool {
        v == self.root || self.parents.contains_key(&v)
    }

    pub fn nodes(&self) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = self.parents.keys().copied().collect();
        out.push(self.root);
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Weighted radius from the root (exact, integer lengths).
    pub fn radius(&self, g: &WeightedGraph) -> i64 {
        let mut depth: BTreeMap<NodeId, i64> = BTreeMap::new();
        depth.insert(self.root, 0);
        let mut best = 0;
        // Parent chains are acyclic; iterate until all resolved.
        let mut pending: Vec<NodeId> = self.parents.keys().copied().collect();
        let mut guard = 0usize;
        while !pending.is_empty() {
            guard += 1;
            if guard > self.parents.len() + 2 {
                return i64::MAX; // malformed tree
            }
            pending.retain(|&v| {
                let (p, e) = self.parents[&v];
                if let Some(&dp) = depth.get(&p) {
                    let d = dp + g.length(e);
                    depth.insert(v, d);
                    best = best.max(d);
                    false
                } else {
                    true
                }
            });
        }
        best
    }
}

/// One pruned oracle forest retained for cluster aggregation.
#[derive(Debug, Clone)]
pub struct PrunedForest {
    /// (child, parent, edge) triples, oriented towards the roots.
    pub parents: Vec<(NodeId, NodeId, EdgeId)>,
    pub roots: Vec<NodeId>,
}

#[derive(Debug, Clone)]
pub struct Cluster {
    pub members: Vec<NodeId>,
    pub center: NodeId,
    /// Identifier inherited from the center's padded node id.
    pub id_code: u64,
    pub tree: ClusterTree,
    pub forest_history: Vec<PrunedForest>,
}

#[derive(Debug, Clone)]
pub struct Clustering {
    pub clusters: Vec<Cluster>,
    /// Declared pairwise separation between distinct clusters.
    pub separation: f64,
    /// Declared radius bound of every cluster tree.
    pub radius_bound: f64,
    /// Strong clusters satisfy V(tree) = members.
    pub strong: bool,
}

impl Clustering {
    pub fn member_count(&self) -> usize {
        self.clusters.iter().map(|c| c.members.len()).sum()
    }

    pub fn cluster_of(&self, n: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; n];
        for (i, c) in self.clusters.iter().enumerate() {
            for &v in &c.members {
                out[v] = Some(i);
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SparseCover {
    pub clusterings: Vec<Clustering>,
    pub covering_radius: f64,
    pub scale: f64,
    pub tree_diameter_bound: f64,
}

/// Weak-radius clustering: bit-phased growing. In phase i the clusters whose
/// i-th identifier bit is 0 are active; each step, growing clusters absorb
/// the oracle-forest trees rooted in them when enough new nodes propose,
/// otherwise the proposers are deleted and the cluster finishes the phase.
pub fn weak_clustering(
    g: &WeightedGraph,
    v_remaining: &[NodeId],
    d: f64,
    delta: f64,
    oracle: &mut dyn ForestOracle,
    params: &CoverParams,
    ledger: &mut RoundLedger,
) -> Result<Clustering, CoverError> {
    let n = g.node_count();
    let b = params.id_bits;
    let eps = params.epsilon_c;
    if oracle.stretch() > eps + 1e-12 {
        return Err(CoverError::OracleContract(format!(
            "oracle stretch {} exceeds the clustering tolerance {eps}",
            oracle.stretch()
        )));
    }

    struct WeakCluster {
        center: NodeId,
        id_code: u64,
        tree: ClusterTree,
        history: Vec<PrunedForest>,
        member_count: usize,
        active: bool,
        growing: bool,
    }

    let mut clusters: Vec<WeakCluster> = Vec::new();
    let mut cluster_of: Vec<Option<usize>> = vec![None; n];
    let mut alive: Vec<bool> = vec![false; n];
    for &v in v_remaining {
        alive[v] = true;
        cluster_of[v] = Some(clusters.len());
        clusters.push(WeakCluster {
            center: v,
            id_code: v as u64,
            tree: ClusterTree::singleton(v),
            history: Vec::new(),
            member_count: 1,
            active: false,
            growing: false,
        });
    }

    let step_cap = params.growth_step_cap(delta) + 2;
    for phase in 1..=b {
        ledger.set_phase("weak-clustering");
        for c in clusters.iter_mut() {
            let bit = (c.id_code >> (b - phase)) & 1;
            c.active = bit == 0 && c.member_count > 0;
            c.growing = c.active;
        }
        let radius = d * (1.0 - eps).powi(phase as i32);
        for _step in 0..step_cap {
            let sources: Vec<NodeId> = (0..n)
                .filter(|&v| {
                    alive[v] && cluster_of[v].map_or(false, |c| clusters[c].growing)
                })
                .collect();
            if sources.is_empty() {
                break;
            }
            let forest = oracle.forest(g, &sources, radius, ledger)?;
            for &s in &sources {
                if forest.root_of[s] != Some(s) {
                    return Err(CoverError::OracleContract(format!(
                        "source {s} is not a root of its oracle tree"
                    )));
                }
            }
            // Proposals per growing cluster: joinable forest nodes grouped by
            // the cluster owning their tree root.
            let mut proposals: Vec<Vec<NodeId>> = vec![Vec::new(); clusters.len()];
            for v in 0..n {
                if !forest.in_forest[v] {
                    continue;
                }
                let joinable = alive[v]
                    && cluster_of[v].map_or(false, |c| !clusters[c].active);
                if !joinable {
                    continue;
                }
                let root = forest.root_of[v]
                    .ok_or_else(|| CoverError::Internal("forest node without root".into()))?;
                if let Some(c) = cluster_of[root] {
                    if clusters[c].growing {
                        proposals[c].push(v);
                    }
                }
            }
            // Forest children lists for pruning.
            let mut children: Vec<Vec<(NodeId, EdgeId)>> = vec![Vec::new(); n];
            for v in 0..n {
                if forest.in_forest[v] {
                    if let Some((p, e)) = forest.parent[v] {
                        children[p].push((v, e));
                    }
                }
            }
            let mut any_progress = false;
            for ci in 0..clusters.len() {
                if !clusters[ci].growing {
                    continue;
                }
                let props = &proposals[ci];
                let threshold = delta / b as f64 * clusters[ci].member_count as f64;
                if !props.is_empty() && props.len() as f64 >= threshold {
                    // Grow: proposers join; the tree gains the pruned forest.
                    any_progress = true;
                    let mut joined: Vec<NodeId> = props.clone();
                    for &v in props {
                        if let Some(old) = cluster_of[v] {
                            clusters[old].member_count -= 1;
                        }
                        cluster_of[v] = Some(ci);
                        clusters[ci].member_count += 1;
                    }
                    // Pruned forest: keep forest nodes (within this cluster's
                    // trees) whose subtree contains a member of the grown
                    // cluster.
                    let mut member_mark: Vec<bool> = vec![false; n];
                    for &v in &joined {
                        member_mark[v] = true;
                    }
                    // Roots of this cluster's trees are members too.
                    let mut keep: Vec<bool> = vec![false; n];
                    let mut pruned = PrunedForest { parents: Vec::new(), roots: Vec::new() };
                    for v in 0..n {
                        if forest.in_forest[v]
                            && forest.root_of[v] == Some(v)
                            && cluster_of[v] == Some(ci)
                            && alive[v]
                        {
                            // Post-order keep-marking from this root.
                            mark_keep(v, &children, &member_mark, &mut keep);
                            if keep[v] {
                                pruned.roots.push(v);
                            }
                        }
                    }
                    for v in 0..n {
                        if keep[v] {
                            if let Some((p, e)) = forest.parent[v] {
                                pruned.parents.push((v, p, e));
                                if !clusters[ci].tree.contains(v) {
                                    clusters[ci].tree.parents.insert(v, (p, e));
                                }
                            }
                        }
                    }
                    joined.sort_unstable();
                    clusters[ci].history.push(pruned);
                } else {
                    // Finish: all proposers are deleted.
                    for &v in props {
                        if let Some(old) = cluster_of[v] {
                            clusters[old].member_count -= 1;
                        }
                        cluster_of[v] = None;
                        alive[v] = false;
                    }
                    clusters[ci].growing = false;
                    if !props.is_empty() {
                        any_progress = true;
                    }
                }
            }
            ledger.charge((usize::BITS - n.max(2).leading_zeros()) as u64 + 4);
            if !any_progress {
                // Every growing cluster saw zero proposals: the phase is done.
                for c in clusters.iter_mut() {
                    c.growing = false;
                }
                break;
            }
        }
        if clusters.iter().any(|c| c.growing) {
            return Err(CoverError::Internal(
                "weak clustering phase exceeded its step budget".into(),
            ));
        }
    }

    // Collect non-empty clusters; members from the assignment map.
    let mut members_of: Vec<Vec<NodeId>> = vec![Vec::new(); clusters.len()];
    for v in 0..n {
        if let Some(c) = cluster_of[v] {
            debug_assert!(alive[v]);
            members_of[c].push(v);
        }
    }
    let mut out = Vec::new();
    for (ci, c) in clusters.into_iter().enumerate() {
        if members_of[ci].is_empty() {
            continue;
        }
        out.push(Cluster {
            members: members_of[ci].clone(),
            center: c.center,
            id_code: c.id_code,
            tree: c.tree,
            forest_history: c.history,
        });
    }
    Ok(Clustering {
        clusters: out,
        separation: params.weak_separation(d),
        radius_bound: params.weak_radius_bound(d, delta),
        strong: false,
    })
}

fn mark_keep(
    root: NodeId,
    children: &[Vec<(NodeId, EdgeId)>],
    member_mark: &[bool],
    keep: &mut [bool],
) {
    // Iterative post-order: keep[v] = member_mark[v] or any kept child.
    let mut stack: Vec<(NodeId, usize)> = vec![(root, 0)];
    while let Some((v, ci)) = stack.pop() {
        if ci < children[v].len() {
            stack.push((v, ci + 1));
            stack.push((children[v][ci].0, 0));
        } else {
            let mut k = member_mark[v] || v == root;
            for &(w, _) in &children[v] {
                k = k || keep[w];
            }
            keep[v] = k;
        }
    }
}

/// Aggregates per-cluster values by folding the stored pruned forests in
/// reverse chronological order (values migrate to the cluster center), then
/// broadcasting the total back to the members.
pub fn cluster_aggregate<T, F>(
    clustering: &Clustering,
    n: usize,
    values: &[T],
    mut combine: F,
    ledger: &mut RoundLedger,
) -> Result<Vec<T>, CoverError>
where
    T: Clone,
    F: FnMut(&T, &T) -> T,
{
    let mut out: Vec<T> = Vec::with_capacity(clustering.clusters.len());
    let mut max_hist = 0usize;
    for cluster in &clustering.clusters {
        let mut vals: BTreeMap<NodeId, T> = BTreeMap::new();
        for &v in &cluster.members {
            vals.insert(v, values[v].clone());
        }
        max_hist = max_hist.max(cluster.forest_history.len());
        for pruned in cluster.forest_history.iter().rev() {
            // Group pruned nodes by their tree root.
            let mut parent: BTreeMap<NodeId, NodeId> = BTreeMap::new();
            for &(c, p, _) in &pruned.parents {
                parent.insert(c, p);
            }
            let root_of = |mut v: NodeId| -> NodeId {
                let mut hops = 0;
                while let Some(&p) = parent.get(&v) {
                    v = p;
                    hops += 1;
                    if hops > n {
                        break;
                    }
                }
                v
            };
            let mut per_tree: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
            for &(c, _, _) in &pruned.parents {
                per_tree.entry(root_of(c)).or_default().push(c);
            }
            for &r in &pruned.roots {
                per_tree.entry(r).or_default();
            }
            for (root, nodes) in per_tree {
                // Carriers fold into the root in ascending node order.
                let mut carriers: Vec<NodeId> = nodes
                    .iter()
                    .copied()
                    .chain(std::iter::once(root))
                    .filter(|v| vals.contains_key(v))
                    .collect();
                carriers.sort_unstable();
                carriers.dedup();
                if carriers.is_empty() {
                    continue;
                }
                let mut acc: Option<T> = None;
                for v in &carriers {
                    let x = vals.remove(v).unwrap();
                    acc = Some(match acc {
                        None => x,
                        Some(a) => combine(&a, &x),
                    });
                }
                vals.insert(root, acc.unwrap());
            }
        }
        // Everything must have funneled to the center.
        if vals.len() != 1 || !vals.contains_key(&cluster.center) {
            return Err(CoverError::Internal(format!(
                "aggregation did not funnel to the center {} (carriers: {:?})",
                cluster.center,
                vals.keys().collect::<Vec<_>>()
            )));
        }
        out.push(vals.remove(&cluster.center).unwrap());
    }
    ledger.charge(2 * max_hist as u64 + 2);
    Ok(out)
}

/// Strong-radius clustering: repeatedly weak-cluster the remaining nodes at
/// geometrically tightened scales; promote any cluster holding more than
/// half of its parent, making its whole Steiner tree the new (strong)
/// cluster, and drop the promoted parents from the remaining set.
pub fn strong_clustering(
    g: &WeightedGraph,
    v_remaining: &[NodeId],
    d: f64,
    oracle: &mut dyn ForestOracle,
    params: &CoverParams,
    ledger: &mut RoundLedger,
) -> Result<Clustering, CoverError> {
    let n = g.node_count();
    let k = params.strong_phases;
    let delta = 1.0 / (3.0 * k as f64);
    let b = params.id_bits as i32;
    let eps = params.epsilon_c;

    let mut rem: Vec<bool> = vec![false; n];
    for &v in v_remaining {
        rem[v] = true;
    }
    // Parent bookkeeping: previous phase's clustering (phase 0: one pseudo
    // cluster holding all of v_remaining).
    let mut prev_cluster_of: Vec<Option<usize>> = (0..n)
        .map(|v| if rem[v] { Some(0) } else { None })
        .collect();
    let mut prev_sizes: Vec<usize> = vec![v_remaining.len()];

    let mut promoted: Vec<Cluster> = Vec::new();
    let mut claimed: Vec<bool> = vec![false; n];

    for phase in 1..=k {
        let rem_nodes: Vec<NodeId> = (0..n).filter(|&v| rem[v]).collect();
        if rem_nodes.is_empty() {
            break;
        }
        let d_phase = 10.0 * d * (1.0 - eps).powi(2 * phase as i32 * b);
        let clustering = weak_clustering(g, &rem_nodes, d_phase, delta, oracle, params, ledger)?;
        let mut promoted_parents: Vec<usize> = Vec::new();
        let mut next_cluster_of: Vec<Option<usize>> = vec![None; n];
        let mut next_sizes: Vec<usize> = Vec::new();
        for (ci, cluster) in clustering.clusters.iter().enumerate() {
            for &v in &cluster.members {
                next_cluster_of[v] = Some(ci);
            }
            next_sizes.push(cluster.members.len());
            let parent = prev_cluster_of[cluster.members[0]]
                .ok_or_else(|| CoverError::Internal("cluster outside the remaining set".into()))?;
            let parent_size = prev_sizes[parent];
            if 2 * cluster.members.len() > parent_size {
                // Promote the full Steiner tree as a strong cluster.
                let tree_nodes = cluster.tree.nodes();
                for &v in &tree_nodes {
                    if claimed[v] {
                        return Err(CoverError::Internal(format!(
                            "promoted trees overlap at node {v}"
                        )));
                    }
                    claimed[v] = true;
                }
                promoted.push(Cluster {
                    members: tree_nodes,
                    center: cluster.tree.root,
                    id_code: cluster.tree.root as u64,
                    tree: cluster.tree.clone(),
                    forest_history: cluster.forest_history.clone(),
                });
                promoted_parents.push(parent);
            }
        }
        // Remaining set for the next phase: clustered nodes whose parent was
        // not consumed by a promotion; promoted tree nodes leave as well.
        for v in 0..n {
            let in_clustering = next_cluster_of[v].is_some();
            let parent_promoted = prev_cluster_of[v]
                .map_or(false, |p| promoted_parents.contains(&p));
            rem[v] = in_clustering && !parent_promoted && !claimed[v];
        }
        prev_cluster_of = next_cluster_of;
        prev_sizes = next_sizes;
    }

    Ok(Clustering {
        clusters: promoted,
        separation: params.strong_separation(d),
        radius_bound: params.strong_radius_bound(d),
        strong: true,
    })
}

/// Sparse neighborhood cover via repeated strong clusterings plus a forest
/// extension of radius s/10 around every cluster.
pub fn sparse_cover(
    g: &WeightedGraph,
    d: f64,
    oracle: &mut dyn ForestOracle,
    params: &CoverParams,
    ledger: &mut RoundLedger,
) -> Result<SparseCover, CoverError> {
    let n = g.node_count();
    let delta_scale = params.sparse_delta(d);
    let s_hat = params.sparse_covering_radius(d);
    let mut rem: Vec<bool> = vec![true; n];
    let mut clusterings: Vec<Clustering> = Vec::new();
    for _round in 0..params.sparse_rounds {
        let rem_nodes: Vec<NodeId> = (0..n).filter(|&v| rem[v]).collect();
        if rem_nodes.is_empty() {
            break;
        }
        ledger.set_phase("sparse-cover");
        let strong = strong_clustering(g, &rem_nodes, delta_scale, oracle, params, ledger)?;
        if strong.clusters.is_empty() {
            return Err(CoverError::Internal(
                "strong clustering made no progress".into(),
            ));
        }
        for c in &strong.clusters {
            for &v in &c.members {
                rem[v] = false;
            }
        }
        // Extend every cluster by the oracle forest of radius s/10 around
        // the clustered nodes.
        let sources: Vec<NodeId> = {
            let mut s: Vec<NodeId> = strong
                .clusters
                .iter()
                .flat_map(|c| c.members.iter().copied())
                .collect();
            s.sort_unstable();
            s.dedup();
            s
        };
        let forest = oracle.forest(g, &sources, s_hat, ledger)?;
        let owner: Vec<Option<usize>> = {
            let cluster_of = strong.cluster_of(n);
            (0..n)
                .map(|v| {
                    if forest.in_forest[v] {
                        forest.root_of[v].and_then(|r| cluster_of[r])
                    } else {
                        None
                    }
                })
                .collect()
        };
        let mut extended: Vec<Cluster> = strong.clusters.clone();
        for v in 0..n {
            if let Some(ci) = owner[v] {
                let cl = &mut extended[ci];
                if !cl.tree.contains(v) {
                    let (p, e) = forest.parent[v].ok_or_else(|| {
                        CoverError::OracleContract(format!(
                            "forest node {v} outside the source set has no parent"
                        ))
                    })?;
                    cl.tree.parents.insert(v, (p, e));
                    cl.members.push(v);
                }
            }
        }
        for cl in extended.iter_mut() {
            cl.members.sort_unstable();
            cl.members.dedup();
        }
        clusterings.push(Clustering {
            clusters: extended,
            separation: s_hat,
            radius_bound: d / 2.0,
            strong: false,
        });
    }
    let remaining = rem.iter().filter(|&&x| x).count();
    if remaining > 0 {
        return Err(CoverError::RoundsExhausted { remaining });
    }
    Ok(SparseCover {
        clusterings,
        covering_radius: s_hat,
        scale: d,
        tree_diameter_bound: d,
    })
}

/// Padded ball-growing cover: every node ends up, in some clustering, in a
/// cluster containing its full `radius`-ball, with cluster trees of diameter
/// at most `diameter_cap`. Ball sizes double along the growth schedule, so
/// the final radius stays within `radius * O(log n)`.
///
/// This is the construction the per-scale pipeline uses: it reaches the
/// covering radius `diameter_cap / tau` directly, at the price of giving no
/// separation guarantee (declared separation 0).
pub fn padded_cover(
    g: &WeightedGraph,
    radius: f64,
    diameter_cap: f64,
    round_cap: usize,
    oracle: &mut dyn ForestOracle,
    ledger: &mut RoundLedger,
) -> Result<SparseCover, CoverError> {
    let n = g.node_count();
    let stretch = oracle.stretch();
    // Tree radius of a cluster grown to rho is at most (1+stretch)(rho + r);
    // cap rho so the diameter bound holds.
    let rho_cap = (diameter_cap / (2.0 * (1.0 + stretch)) - radius).max(radius * 0.25);
    let mut padded: Vec<bool> = vec![false; n];
    let mut clusterings: Vec<Clustering> = Vec::new();
    for _round in 0..round_cap {
        if padded.iter().all(|&x| x) {
            break;
        }
        ledger.set_phase("padded-cover");
        let mut claimed: Vec<bool> = vec![false; n];
        let mut clusters: Vec<Cluster> = Vec::new();
        for c in 0..n {
            if padded[c] || claimed[c] {
                continue;
            }
            // Grow the ball with doubling, then fall back to the minimal
            // radius when the grown ball collides with claimed territory.
            let grow = |rho: f64, oracle: &mut dyn ForestOracle, ledger: &mut RoundLedger|
             -> Result<RootedForest, CoverError> {
                oracle.forest(g, &[c], rho, ledger)
            };
            let mut rho = radius.min(rho_cap.max(radius * 0.25));
            let mut ball = grow(rho + radius, oracle, ledger)?;
            loop {
                if rho + radius > rho_cap {
                    break;
                }
                let bigger = grow(rho + 2.0 * radius, oracle, ledger)?;
                if bigger.node_count() > 2 * ball.node_count() {
                    rho += radius;
                    ball = bigger;
                } else {
                    break;
                }
            }
            let collides =
                (0..n).any(|v| ball.in_forest[v] && claimed[v]);
            let chosen = if !collides {
                Some(ball)
            } else {
                let minimal = grow(radius + radius * 0.25, oracle, ledger)?;
                let min_collides = (0..n).any(|v| minimal.in_forest[v] && claimed[v]);
                if min_collides {
                    None
                } else {
                    Some(minimal)
                }
            };
            let Some(ball) = chosen else { continue };
            let mut members: Vec<NodeId> = (0..n).filter(|&v| ball.in_forest[v]).collect();
            members.sort_unstable();
            let mut tree = ClusterTree::singleton(c);
            for &v in &members {
                claimed[v] = true;
                if v != c {
                    if let Some((p, e)) = ball.parent[v] {
                        tree.parents.insert(v, (p, e));
                    }
                }
            }
            clusters.push(Cluster {
                members,
                center: c,
                id_code: c as u64,
                tree,
                forest_history: Vec::new(),
            });
        }
        if clusters.is_empty() {
            return Err(CoverError::Internal(
                "padded cover round accepted no cluster".into(),
            ));
        }
        // Pad-check: a member is padded when everything outside its cluster
        // stays at distance more than `radius` from it.
        let member_lists: Vec<Vec<NodeId>> =
            clusters.iter().map(|c| c.members.clone()).collect();
        let mask = oracle.pad_mask(g, &member_lists, radius, ledger)?;
        for (cluster, pads) in clusters.iter().zip(&mask) {
            for (&v, &p) in cluster.members.iter().zip(pads) {
                if p {
                    padded[v] = true;
                }
            }
        }
        clusterings.push(Clustering {
            clusters,
            separation: 0.0,
            radius_bound: diameter_cap / 2.0,
            strong: true,
        });
    }
    let remaining = padded.iter().filter(|&&x| !x).count();
    if remaining > 0 {
        return Err(CoverError::RoundsExhausted { remaining });
    }
    Ok(SparseCover {
        clusterings,
        covering_radius: radius,
        scale: diameter_cap,
        tree_diameter_bound: diameter_cap,
    })
}

/// Exhaustive cover validation (test/verify support): ball containment at
/// the declared covering radius, pairwise separation, tree diameters, and
/// disjointness.
pub fn validate_cover(g: &WeightedGraph, cover: &SparseCover) -> Result<(), String> {
    let n = g.node_count();
    // Ball containment.
    let radius = cover.covering_radius;
    for v in 0..n {
        let ball: Vec<NodeId> = {
            let sp = exact::dijkstra_truncated(g, &[v], radius.floor() as i64);
            (0..n).filter(|&u| sp.dist[u].is_some()).collect()
        };
        let mut ok = false;
        'outer: for clustering in &cover.clusterings {
            for cluster in &clustering.clusters {
                if ball.iter().all(|u| cluster.members.binary_search(u).is_ok()) {
                    ok = true;
                    break 'outer;
                }
            }
        }
        if !ok {
            return Err(format!("node {v}: no cluster contains its radius-{radius} ball"));
        }
    }
    for (ci, clustering) in cover.clusterings.iter().enumerate() {
        validate_clustering(g, clustering).map_err(|e| format!("clustering {ci}: {e}"))?;
        for cluster in &clustering.clusters {
            let diam_bound = cover.tree_diameter_bound;
            let r = cluster.tree.radius(g) as f64;
            if 2.0 * r > diam_bound + 1e-9 {
                return Err(format!(
                    "clustering {ci}: tree radius {r} exceeds half the diameter bound {diam_bound}"
                ));
            }
        }
    }
    Ok(())
}

/// Pairwise separation and disjointness of one clustering (exact distances).
pub fn validate_clustering(g: &WeightedGraph, clustering: &Clustering) -> Result<(), String> {
    let n = g.node_count();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for (i, c) in clustering.clusters.iter().enumerate() {
        for &v in &c.members {
            match owner[v] {
                Some(j) if j != i => {
                    return Err(format!("clusters {j} and {i} overlap at node {v}"))
                }
                _ => owner[v] = Some(i),
            }
        }
    }
    if clustering.separation > 0.0 {
        for (i, c) in clustering.clusters.iter().enumerate() {
            let sp = exact::dijkstra_truncated(
                g,
                &c.members,
                clustering.separation.ceil() as i64,
            );
            for u in 0..n {
                if let Some(d) = sp.dist[u] {
                    if let Some(j) = owner[u] {
                        if j != i && (d as f64) < clustering.separation - 1e-9 {
                            return Err(format!(
                                "clusters {i} and {j} at distance {d} < separation {}",
                                clustering.separation
                            ));
                        }
                    }
                }
            }
        }
    }
    // Radius bound.
    for (i, c) in clustering.clusters.iter().enumerate() {
        let r = c.tree.radius(g);
        if r as f64 > clustering.radius_bound + 1e-9 {
            return Err(format!(
                "cluster {i} tree radius {r} exceeds the declared bound {}",
                clustering.radius_bound
            ));
        }
        if clustering.strong {
            let tn = c.tree.nodes();
            if tn != c.members {
                return Err(format!("strong cluster {i} has Steiner nodes outside the member set"));
            }
        }
        for &v in &c.members {
            if !clustering.strong && !c.tree.contains(v) {
                return Err(format!("cluster {i} member {v} missing from its tree"));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen;

    fn desk(n: usize) -> CoverParams {
        CoverParams::desk(n)
    }

    #[test]
    fn weak_clustering_two_far_nodes_stay_separate() {
        // Two nodes at distance 10 * d can never merge.
        let g = WeightedGraph::new(2, vec![(0, 1, 1000)], 0).unwrap();
        let params = desk(2);
        let mut ledger = RoundLedger::new();
        let c = weak_clustering(
            &g,
            &[0, 1],
            100.0,
            0.5,
            &mut ExactForestOracle,
            &params,
            &mut ledger,
        )
        .unwrap();
        assert!(c.clusters.len() >= 1);
        for cl in &c.clusters {
            assert!(cl.members.len() <= 1);
        }
        validate_clustering(&g, &c).unwrap();
    }

    #[test]
    fn weak_clustering_absorbs_small_diameter_graph() {
        // d far above the diameter: one cluster absorbs everything within
        // its first active phase; deletions stay within budget.
        let g = gen::path(10);
        let params = desk(10);
        let mut ledger = RoundLedger::new();
        let v_rem: Vec<usize> = (0..10).collect();
        let c = weak_clustering(
            &g,
            &v_rem,
            1000.0,
            0.5,
            &mut ExactForestOracle,
            &params,
            &mut ledger,
        )
        .unwrap();
        let clustered = c.member_count();
        let deleted = 10 - clustered;
        assert!(deleted as f64 <= 0.5 * 10.0, "deleted {deleted} of 10");
        validate_clustering(&g, &c).unwrap();
    }

    #[test]
    fn weak_clustering_empty_input() {
        let g = gen::path(4);
        let params = desk(4);
        let mut ledger = RoundLedger::new();
        let c = weak_clustering(
            &g,
            &[],
            10.0,
            0.25,
            &mut ExactForestOracle,
            &params,
            &mut ledger,
        )
        .unwrap();
        assert!(c.clusters.is_empty());
    }

    #[test]
    fn weak_clustering_deletion_budget_exact() {
        for seed in 0..5 {
            let g = gen::random_graph(60, 0.08, seed);
            let params = desk(60);
            let mut ledger = RoundLedger::new();
            let v_rem: Vec<usize> = (0..60).collect();
            let delta = 0.3;
            let c = weak_clustering(
                &g,
                &v_rem,
                500.0,
                delta,
                &mut ExactForestOracle,
                &params,
                &mut ledger,
            )
            .unwrap();
            let deleted = 60 - c.member_count();
            assert!(
                deleted as f64 <= delta * 60.0 + 1e-9,
                "seed {seed}: deleted {deleted}"
            );
            validate_clustering(&g, &c).unwrap();
        }
    }

    #[test]
    fn weak_clustering_far_component_containment() {
        // Two 5-cliques joined by nothing: any cluster stays within one side
        // and its Steiner nodes stay close to it.
        let mut edges = Vec::new();
        for u in 0..5 {
            for v in (u + 1)..5 {
                edges.push((u, v, 2i64));
                edges.push((u + 5, v + 5, 2i64));
            }
        }
        let g = WeightedGraph::new(10, edges, 0).unwrap();
        let params = desk(10);
        let mut ledger = RoundLedger::new();
        let v_rem: Vec<usize> = (0..10).collect();
        let c = weak_clustering(
            &g,
            &v_rem,
            8.0,
            0.4,
            &mut ExactForestOracle,
            &params,
            &mut ledger,
        )
        .unwrap();
        for cl in &c.clusters {
            let left = cl.members.iter().all(|&v| v < 5);
            let right = cl.members.iter().all(|&v| v >= 5);
            assert!(left || right, "cluster crosses components: {:?}", cl.members);
            for tv in cl.tree.nodes() {
                assert_eq!(tv < 5, left, "Steiner node on the wrong side");
            }
        }
    }

    #[test]
    fn cluster_aggregate_matches_direct_sums() {
        for seed in 0..4 {
            let g = gen::random_graph(40, 0.1, seed);
            let params = desk(40);
            let mut ledger = RoundLedger::new();
            let v_rem: Vec<usize> = (0..40).collect();
            let c = weak_clustering(
                &g,
                &v_rem,
                2000.0,
                0.4,
                &mut ExactForestOracle,
                &params,
                &mut ledger,
            )
            .unwrap();
            let values: Vec<f64> = (0..40).map(|v| (v * v % 13) as f64).collect();
            let per_cluster =
                cluster_aggregate(&c, 40, &values, |a, b| a + b, &mut ledger).unwrap();
            for (cl, got) in c.clusters.iter().zip(&per_cluster) {
                let want: f64 = cl.members.iter().map(|&v| values[v]).sum();
                assert!((got - want).abs() < 1e-9, "seed {seed}");
            }
        }
    }

    #[test]
    fn singleton_clusters_aggregate_to_own_value() {
        let g = WeightedGraph::new(2, vec![(0, 1, 1000)], 0).unwrap();
        let params = desk(2);
        let mut ledger = RoundLedger::new();
        let c = weak_clustering(
            &g,
            &[0, 1],
            10.0,
            0.5,
            &mut ExactForestOracle,
            &params,
            &mut ledger,
        )
        .unwrap();
        let vals = vec![3.0, 4.0];
        let per_cluster = cluster_aggregate(&c, 2, &vals, |a, b| a + b, &mut ledger).unwrap();
        for (cl, got) in c.clusters.iter().zip(&per_cluster) {
            assert_eq!(*got, vals[cl.members[0]]);
        }
    }

    #[test]
    fn strong_clustering_single_node() {
        let g = WeightedGraph::new(1, vec![], 0).unwrap();
        let params = desk(1);
        let mut ledger = RoundLedger::new();
        let c = strong_clustering(&g, &[0], 5.0, &mut ExactForestOracle, &params, &mut ledger)
            .unwrap();
        assert_eq!(c.clusters.len(), 1);
        assert_eq!(c.clusters[0].members, vec![0]);
        assert!(c.strong);
    }

    #[test]
    fn strong_clustering_two_far_cliques() {
        let mut edges = Vec::new();
        for u in 0..6 {
            for v in (u + 1)..6 {
                edges.push((u, v, 1i64));
                edges.push((u + 6, v + 6, 1i64));
            }
        }
        edges.push((0, 6, 100_000));
        let g = WeightedGraph::new(12, edges, 0).unwrap();
        let params = desk(12);
        let mut ledger = RoundLedger::new();
        let v_rem: Vec<usize> = (0..12).collect();
        let c = strong_clustering(&g, &v_rem, 50.0, &mut ExactForestOracle, &params, &mut ledger)
            .unwrap();
        assert!(c.member_count() >= 12 / 3, "got {}", c.member_count());
        validate_clustering(&g, &c).unwrap();
        // Strong clusters have no Steiner nodes.
        for cl in &c.clusters {
            assert_eq!(cl.tree.nodes(), cl.members);
        }
    }

    #[test]
    fn strong_clustering_empty() {
        let g = gen::path(3);
        let params = desk(3);
        let mut ledger = RoundLedger::new();
        let c = strong_clustering(&g, &[], 5.0, &mut ExactForestOracle, &params, &mut ledger)
            .unwrap();
        assert!(c.clusters.is_empty());
    }

    #[test]
    fn sparse_cover_single_node() {
        let g = WeightedGraph::new(1, vec![], 0).unwrap();
        let params = desk(1);
        let mut ledger = RoundLedger::new();
        let cover =
            sparse_cover(&g, 8.0, &mut ExactForestOracle, &params, &mut ledger).unwrap();
        assert!(!cover.clusterings.is_empty());
        validate_cover(&g, &cover).unwrap();
    }

    #[test]
    fn sparse_cover_path() {
        let g = gen::path(20);
        let params = desk(20);
        let mut ledger = RoundLedger::new();
        let d = 16.0 * 4.0 * 5.0; // comfortably above the diameter
        let cover = sparse_cover(&g, d, &mut ExactForestOracle, &params, &mut ledger).unwrap();
        assert!(cover.clusterings.len() <= params.sparse_rounds);
        validate_cover(&g, &cover).unwrap();
    }

    #[test]
    fn sparse_cover_two_components() {
        let g = WeightedGraph::new(8, vec![(0, 1, 1), (1, 2, 1), (5, 6, 1), (6, 7, 1)], 0)
            .unwrap();
        let params = desk(8);
        let mut ledger = RoundLedger::new();
        let cover = sparse_cover(&g, 60.0, &mut ExactForestOracle, &params, &mut ledger).unwrap();
        validate_cover(&g, &cover).unwrap();
        for clustering in &cover.clusterings {
            for cl in &clustering.clusters {
                let left = cl.members.iter().all(|&v| v <= 2 || (3..=4).contains(&v));
                let right = cl.members.iter().all(|&v| v >= 5 || (3..=4).contains(&v));
                assert!(left || right, "cluster spans components: {:?}", cl.members);
            }
        }
    }

    #[test]
    fn padded_cover_covers_every_ball() {
        for (n, seed) in [(24usize, 0u64), (40, 1), (60, 2)] {
            let g = gen::random_graph(n, 0.1, seed);
            let tau = 4.0 * (n as f64).log2().ceil();
            let diam = 4000.0_f64.max(tau * 8.0);
            let r = diam / tau;
            let mut ledger = RoundLedger::new();
            let cover = padded_cover(
                &g,
                r,
                diam,
                4 * (n as f64).log2().ceil() as usize + 4,
                &mut ExactForestOracle,
                &mut ledger,
            )
            .unwrap();
            validate_cover(&g, &cover).unwrap();
        }
    }

    #[test]
    fn padded_cover_on_path_small_radius() {
        let g = gen::path(50);
        let mut ledger = RoundLedger::new();
        let cover =
            padded_cover(&g, 2.0, 48.0, 40, &mut ExactForestOracle, &mut ledger).unwrap();
        validate_cover(&g, &cover).unwrap();
    }
}
