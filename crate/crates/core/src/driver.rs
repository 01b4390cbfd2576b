//! The local iterative reduction cycle: distance scales, the forest and
//! potential oracles, per-scale distance-structure construction by
//! induction, and the end-to-end solvers.
//!
//! Scale 1 is answered by direct truncated growth (distances there span few
//! hops because edge lengths are bounded below); every higher scale routes
//! through the previous scales' structures: build the augmented-graph
//! router, boost it into a certified tree/potential, and read the oracle
//! answers off that tree.

use thiserror::Error;

use crate::boosting::{self, BoostConfig, BoostError, ExactRounder, PrimalDualPair};
use crate::covers::{self, CoverError, ForestOracle, RootedForest};
use crate::exact;
use crate::graph::{Demand, EdgeId, Flow, NodeId, Potential, WeightedGraph};
use crate::minor_agg::RoundLedger;
use crate::routing::{self, DistanceStructure, RoutingError, StructCluster, StructClustering};

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Boost(#[from] BoostError),
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error("cover: {0}")]
    Cover(String),
    #[error("oracle contract violated: {0}")]
    OracleContract(String),
    #[error("structure validation failed at scale {scale}: {msg}")]
    StructureInvalid { scale: usize, msg: String },
    #[error("demand does not balance within component {component}")]
    UnbalancedComponent { component: usize },
    #[error("parameter error: {0}")]
    Parameter(String),
}

impl From<CoverError> for DriverError {
    fn from(e: CoverError) -> Self {
        DriverError::Cover(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Paper,
    Desk,
}

/// All pipeline constants, derived per preset and node count.
#[derive(Debug, Clone)]
pub struct DriverParams {
    pub preset: Preset,
    pub tau: f64,
    pub beta: f64,
    /// Declared stretch of the forest oracle.
    pub eps_forest: f64,
    /// Tree quality used inside forest-oracle answers.
    pub eps_tree_forest: f64,
    /// Tree quality used inside potential-oracle answers.
    pub eps_tree_potential: f64,
    pub boost: BoostConfig,
    /// Exhaustive oracle post-checks against exact distances.
    pub debug_checks: bool,
}

impl DriverParams {
    pub fn desk(n: usize) -> Self {
        let log2n = (n.max(2) as f64).log2().ceil().max(1.0);
        let tau = 4.0 * log2n;
        let eps_forest = 0.25;
        DriverParams {
            preset: Preset::Desk,
            tau,
            beta: 8.0 * tau,
            eps_forest,
            eps_tree_forest: eps_forest / (tau + 1.0),
            eps_tree_potential: 1.0 / (2.2 * tau),
            boost: BoostConfig::default(),
            debug_checks: false,
        }
    }

    pub fn paper(n: usize) -> Self {
        let log2n = (n.max(2) as f64).log2().ceil().max(1.0);
        let tau = log2n.powi(7);
        let eps_forest = 1.0 / log2n.powi(3);
        DriverParams {
            preset: Preset::Paper,
            tau,
            beta: 8.0 * tau,
            eps_forest,
            eps_tree_forest: 1.0 / (10.0 * log2n.powi(3) * tau),
            eps_tree_potential: 1.0 / (10.0 * tau),
            boost: BoostConfig::default(),
            debug_checks: false,
        }
    }

    pub fn for_preset(p: Preset, n: usize) -> Self {
        match p {
            Preset::Paper => Self::paper(n),
            Preset::Desk => Self::desk(n),
        }
    }
}

/// Oracle post-check accounting (all calls must pass in debug runs).
#[derive(Debug, Clone, Default)]
pub struct OracleStats {
    pub forest_calls: usize,
    pub forest_failures: usize,
    pub potential_calls: usize,
    pub potential_failures: usize,
}

impl OracleStats {
    pub fn merge(&mut self, other: &OracleStats) {
        self.forest_calls += other.forest_calls;
        self.forest_failures += other.forest_failures;
        self.potential_calls += other.potential_calls;
        self.potential_failures += other.potential_failures;
    }
}

/// Forest oracle backed by either direct truncated growth (scale 1) or the
/// boosted tree of the previous scales' router.
pub struct PipelineOracle<'a> {
    base: &'a WeightedGraph,
    structures: &'a [DistanceStructure],
    scale_index: usize,
    scale_d: f64,
    params: &'a DriverParams,
    stats: &'a mut OracleStats,
    /// Boosted trees keyed by source set: the tree answers every radius.
    cache: std::collections::HashMap<Vec<NodeId>, (boosting::SsspTree, crate::graph::AugmentedGraph)>,
}

impl<'a> PipelineOracle<'a> {
    pub fn new(
        base: &'a WeightedGraph,
        structures: &'a [DistanceStructure],
        scale_index: usize,
        scale_d: f64,
        params: &'a DriverParams,
        stats: &'a mut OracleStats,
    ) -> Self {
        PipelineOracle {
            base,
            structures,
            scale_index,
            scale_d,
            params,
            stats,
            cache: std::collections::HashMap::new(),
        }
    }

    fn bootstrap_forest(
        &mut self,
        sources: &[NodeId],
        radius: f64,
        ledger: &mut RoundLedger,
    ) -> RootedForest {
        let r = radius.min(i64::MAX as f64 / 4.0).floor() as i64;
        let sp = exact::dijkstra_truncated(self.base, sources, r.max(0));
        // Rounds: the growth frontier advances at least one minimum length
        // per round, so the hop depth of the truncated tree is the cost.
        let mut depth = vec![0usize; self.base.node_count()];
        let mut max_depth = 1usize;
        let mut order: Vec<NodeId> = (0..self.base.node_count())
            .filter(|&v| sp.dist[v].is_some())
            .collect();
        order.sort_by_key(|&v| sp.dist[v].unwrap());
        for &v in &order {
            if let Some((p, _)) = sp.parent[v] {
                depth[v] = depth[p] + 1;
                max_depth = max_depth.max(depth[v]);
            }
        }
        ledger.charge(max_depth as u64);
        covers::forest_from_parents(self.base.node_count(), &sp)
    }

    fn boosted_tree(
        &mut self,
        sources: &[NodeId],
        ledger: &mut RoundLedger,
    ) -> Result<&(boosting::SsspTree, crate::graph::AugmentedGraph), DriverError> {
        let key: Vec<NodeId> = sources.to_vec();
        if !self.cache.contains_key(&key) {
            let eps_tree = self
                .params
                .eps_tree_forest
                .min(self.params.eps_tree_potential);
            let op = routing::build_router(
                self.base,
                self.structures,
                sources,
                self.scale_index,
                self.scale_d,
                self.params.tau,
                ledger,
            )?;
            let aug = op.augmented().expect("augmented router").clone();
            let tree = boosting::build_sssp_tree(
                &op,
                aug.super_source,
                eps_tree,
                &mut ExactRounder,
                &self.params.boost,
                ledger,
            )?;
            self.cache.insert(key.clone(), (tree, aug));
        }
        Ok(self.cache.get(&key).unwrap())
    }

    /// Potential for the current scale with respect to `sources`: zero on
    /// the set, at least half the covering radius at nodes a covering radius
    /// away, valid everywhere.
    pub fn potential(
        &mut self,
        sources: &[NodeId],
        ledger: &mut RoundLedger,
    ) -> Result<Vec<f64>, DriverError> {
        ledger.record_oracle("potential");
        self.stats.potential_calls += 1;
        let n = self.base.node_count();
        let phi = if sources.is_empty() {
            vec![self.scale_d; n]
        } else if sources.len() == n {
            vec![0.0; n]
        } else if self.scale_index == 1 {
            let r = (2.0 * self.scale_d).min(i64::MAX as f64 / 4.0).ceil() as i64;
            let sp = exact::dijkstra_truncated(self.base, sources, r);
            let mut depth_rounds = 1u64;
            {
                // Same hop-depth accounting as the bootstrap forest.
                let mut order: Vec<NodeId> =
                    (0..n).filter(|&v| sp.dist[v].is_some()).collect();
                order.sort_by_key(|&v| sp.dist[v].unwrap());
                let mut depth = vec![0u64; n];
                for &v in &order {
                    if let Some((p, _)) = sp.parent[v] {
                        depth[v] = depth[p] + 1;
                        depth_rounds = depth_rounds.max(depth[v]);
                    }
                }
            }
            ledger.charge(depth_rounds);
            (0..n)
                .map(|v| match sp.dist[v] {
                    Some(d) => (d as f64).min(2.0 * self.scale_d),
                    None => 2.0 * self.scale_d,
                })
                .collect()
        } else {
            let scale_d = self.scale_d;
            let (tree, _aug) = self.boosted_tree(sources, ledger)?;
            (0..n)
                .map(|v| (tree.potential.values[v] - scale_d).max(0.0))
                .collect()
        };
        if self.params.debug_checks {
            if let Err(msg) = self.check_potential(sources, &phi) {
                self.stats.potential_failures += 1;
                return Err(DriverError::OracleContract(msg));
            }
        }
        Ok(phi)
    }

    fn check_potential(&self, sources: &[NodeId], phi: &[f64]) -> Result<(), String> {
        let pot = Potential { values: phi.to_vec() };
        if let Err(v) = crate::graph::validate_potential_slack(&pot, self.base, 1e-7) {
            return Err(format!("potential not Lipschitz at edge {}", v.edge));
        }
        for &s in sources {
            if phi[s].abs() > 1e-7 * self.scale_d.max(1.0) {
                return Err(format!("potential nonzero ({}) on source {s}", phi[s]));
            }
        }
        if !sources.is_empty() {
            let floor = 0.5 * self.scale_d / self.params.tau;
            let threshold = (self.scale_d / self.params.tau).floor() as i64;
            let dist = exact::dijkstra(self.base, sources).dist;
            for v in 0..self.base.node_count() {
                let far = dist[v].map_or(true, |d| d >= threshold);
                if far && phi[v] < floor - 1e-7 * self.scale_d.max(1.0) {
                    return Err(format!(
                        "node {v} at distance {:?} has potential {} below the floor {floor}",
                        dist[v], phi[v]
                    ));
                }
            }
        }
        Ok(())
    }

    fn check_forest(
        &self,
        sources: &[NodeId],
        radius: f64,
        forest: &RootedForest,
    ) -> Result<(), String> {
        if sources.is_empty() {
            return Ok(());
        }
        let dist = exact::dijkstra(self.base, sources).dist;
        let r = radius.floor() as i64;
        for v in 0..self.base.node_count() {
            if let Some(d) = dist[v] {
                if d <= r && !forest.in_forest[v] {
                    return Err(format!("node {v} at distance {d} <= {r} missing from forest"));
                }
            }
        }
        let stretch_cap = (1.0 + self.stretch()) * radius + 1e-6 * radius.max(1.0);
        for v in 0..self.base.node_count() {
            if forest.in_forest[v] {
                let df = forest.dist[v]
                    .ok_or_else(|| format!("forest node {v} without a distance"))?;
                if df > stretch_cap {
                    return Err(format!(
                        "forest distance {df} at node {v} exceeds the stretched radius {stretch_cap}"
                    ));
                }
            }
        }
        Ok(())
    }
}

impl<'a> ForestOracle for PipelineOracle<'a> {
    fn pad_mask(
        &mut self,
        g: &WeightedGraph,
        clusters: &[Vec<NodeId>],
        radius: f64,
        ledger: &mut RoundLedger,
    ) -> Result<Vec<Vec<bool>>, CoverError> {
        let n = g.node_count();
        let k = clusters.len();
        if self.scale_index == 1 || k <= 2 {
            // Cheap exact path: one complement query per cluster.
            let mut out = Vec::with_capacity(k);
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
            return Ok(out);
        }
        // Rank-coded rounds: in each round the union of active clusters is
        // subtracted from the source set; a member is padded when every
        // round with its cluster active misses it. The source sets coincide
        // with the boundary-potential rounds, so the boosted trees are
        // shared through the cache.
        let rank_bits = (usize::BITS - k.max(2).leading_zeros()) as u32;
        let code_bits = 2 * rank_bits;
        let code = |rank: usize, bit: u32| -> bool {
            if bit < rank_bits {
                (rank >> (rank_bits - 1 - bit)) & 1 == 1
            } else {
                let b = bit - rank_bits;
                (rank >> (rank_bits - 1 - b)) & 1 == 0
            }
        };
        let mut out: Vec<Vec<bool>> = clusters
            .iter()
            .map(|members| vec![true; members.len()])
            .collect();
        for bit in 0..code_bits {
            let mut active = vec![false; n];
            let mut any = false;
            for (rank, members) in clusters.iter().enumerate() {
                if code(rank, bit) {
                    any = true;
                    for &v in members {
                        active[v] = true;
                    }
                }
            }
            if !any {
                continue;
            }
            let sources: Vec<NodeId> = (0..n).filter(|&v| !active[v]).collect();
            if sources.is_empty() {
                continue;
            }
            let boundary = self.forest(g, &sources, radius, ledger)?;
            for (rank, members) in clusters.iter().enumerate() {
                if !code(rank, bit) {
                    continue;
                }
                for (mi, &v) in members.iter().enumerate() {
                    if boundary.in_forest[v] {
                        out[rank][mi] = false;
                    }
                }
            }
        }
        Ok(out)
    }

    fn stretch(&self) -> f64 {
        if self.scale_index == 1 {
            0.0
        } else {
            self.params.eps_forest
        }
    }

    fn forest(
        &mut self,
        g: &WeightedGraph,
        sources: &[NodeId],
        radius: f64,
        ledger: &mut RoundLedger,
    ) -> Result<RootedForest, CoverError> {
        debug_assert_eq!(g.node_count(), self.base.node_count());
        ledger.record_oracle("forest");
        self.stats.forest_calls += 1;
        let n = self.base.node_count();
        if sources.is_empty() {
            return Ok(RootedForest {
                parent: vec![None; n],
                in_forest: vec![false; n],
                root_of: vec![None; n],
                dist: vec![None; n],
            });
        }
        let forest = if self.scale_index == 1 {
            self.bootstrap_forest(sources, radius, ledger)
        } else {
            let base = self.base;
            let scale_d = self.scale_d;
            let eps_tree = self.params.eps_tree_forest.min(self.params.eps_tree_potential);
            let (tree, aug) = self
                .boosted_tree(sources, ledger)
                .map_err(|e| CoverError::Internal(e.to_string()))?;
            forest_from_sssp_tree(base, aug, tree, scale_d, radius, eps_tree)
                .map_err(|e| CoverError::OracleContract(e.to_string()))?
        };
        if self.params.debug_checks {
            if let Err(msg) = self.check_forest(sources, radius, &forest) {
                self.stats.forest_failures += 1;
                return Err(CoverError::OracleContract(msg));
            }
        }
        Ok(forest)
    }
}

/// Reads a forest answer off the boosted tree of the augmented graph: keep
/// base nodes whose tree label is within the stretched budget, cut parents
/// at the source set.
fn forest_from_sssp_tree(
    base: &WeightedGraph,
    aug: &crate::graph::AugmentedGraph,
    tree: &boosting::SsspTree,
    scale_d: f64,
    radius: f64,
    eps_tree: f64,
) -> Result<RootedForest, DriverError> {
    let n = base.node_count();
    let cutoff = (1.0 + eps_tree) * (scale_d + radius) + 1e-9 * scale_d.max(1.0);
    let mut in_forest: Vec<bool> = (0..n).map(|v| tree.label[v] <= cutoff).collect();
    let mut is_source = vec![false; n];
    for &s in &aug.sources {
        is_source[s] = true;
        in_forest[s] = true;
    }
    let mut parent: Vec<Option<(NodeId, EdgeId)>> = vec![None; n];
    for v in 0..n {
        if !in_forest[v] || is_source[v] {
            continue;
        }
        let Some((p, e)) = tree.parent[v] else {
            return Err(DriverError::OracleContract(format!(
                "forest node {v} has no parent in the boosted tree"
            )));
        };
        if p >= n || e >= aug.base_edges {
            return Err(DriverError::OracleContract(format!(
                "forest node {v} hangs off a virtual node"
            )));
        }
        if !in_forest[p] {
            return Err(DriverError::OracleContract(format!(
                "forest parent {p} of node {v} fell outside the cutoff"
            )));
        }
        parent[v] = Some((p, e));
    }
    // Forest distances by walking parent chains.
    let mut dist: Vec<Option<f64>> = vec![None; n];
    let mut root_of: Vec<Option<NodeId>> = vec![None; n];
    fn resolve(
        v: NodeId,
        base: &WeightedGraph,
        parent: &[Option<(NodeId, EdgeId)>],
        in_forest: &[bool],
        is_source: &[bool],
        dist: &mut Vec<Option<f64>>,
        root_of: &mut Vec<Option<NodeId>>,
        depth: usize,
    ) -> Result<(), DriverError> {
        if dist[v].is_some() || depth > base.node_count() + 1 {
            if depth > base.node_count() + 1 {
                return Err(DriverError::OracleContract("forest parent cycle".into()));
            }
            return Ok(());
        }
        if is_source[v] {
            dist[v] = Some(0.0);
            root_of[v] = Some(v);
            return Ok(());
        }
        let Some((p, e)) = parent[v] else {
            return Err(DriverError::OracleContract(format!("node {v} missing parent")));
        };
        resolve(p, base, parent, in_forest, is_source, dist, root_of, depth + 1)?;
        dist[v] = Some(dist[p].unwrap() + base.length(e) as f64);
        root_of[v] = root_of[p];
        Ok(())
    }
    for v in 0..n {
        if in_forest[v] {
            resolve(v, base, &parent, &in_forest, &is_source, &mut dist, &mut root_of, 0)?;
        }
    }
    Ok(RootedForest { parent, in_forest, root_of, dist })
}

/// Builds the distance structure for one scale: a padded ball-growing cover
/// at covering radius D_i / tau, then per-cluster boundary potentials via
/// rank-coded activation rounds (each round asks one potential query against
/// the union of inactive territory).
pub fn build_distance_structure(
    base: &WeightedGraph,
    scale_index: usize,
    scale_d: f64,
    structures: &[DistanceStructure],
    params: &DriverParams,
    stats: &mut OracleStats,
    ledger: &mut RoundLedger,
) -> Result<DistanceStructure, DriverError> {
    let n = base.node_count();
    ledger.set_phase("structure");
    let radius = scale_d / params.tau;
    let round_cap = 4 * (usize::BITS - n.max(2).leading_zeros()) as usize + 8;
    // One oracle for the whole build: its boosted-tree cache is shared by
    // the cover construction, the padding tests, and the potential rounds.
    let mut oracle = PipelineOracle::new(base, structures, scale_index, scale_d, params, stats);
    let cover = covers::padded_cover(base, radius, scale_d, round_cap, &mut oracle, ledger)?;

    let mut clusterings: Vec<StructClustering> = Vec::new();
    for clustering in &cover.clusterings {
        let k = clustering.clusters.len();
        let rank_bits = (usize::BITS - k.max(2).leading_zeros()) as u32;
        let code_bits = 2 * rank_bits;
        let code = |rank: usize, bit: u32| -> bool {
            if bit < rank_bits {
                (rank >> (rank_bits - 1 - bit)) & 1 == 1
            } else {
                let b = bit - rank_bits;
                (rank >> (rank_bits - 1 - b)) & 1 == 0
            }
        };
        let mut dtilde: Vec<Vec<f64>> = clustering
            .clusters
            .iter()
            .map(|c| vec![f64::INFINITY; c.members.len()])
            .collect();
        for bit in 0..code_bits {
            let mut active_nodes = vec![false; n];
            let mut any_active = false;
            for (rank, cluster) in clustering.clusters.iter().enumerate() {
                if code(rank, bit) {
                    any_active = true;
                    for &v in &cluster.members {
                        active_nodes[v] = true;
                    }
                }
            }
            if !any_active {
                continue;
            }
            let sources: Vec<NodeId> = (0..n).filter(|&v| !active_nodes[v]).collect();
            let phi = oracle.potential(&sources, ledger)?;
            for (rank, cluster) in clustering.clusters.iter().enumerate() {
                if !code(rank, bit) {
                    continue;
                }
                for (mi, &v) in cluster.members.iter().enumerate() {
                    dtilde[rank][mi] = dtilde[rank][mi].min(phi[v]);
                }
            }
        }
        let clusters: Vec<StructCluster> = clustering
            .clusters
            .iter()
            .zip(dtilde)
            .map(|(c, dt)| StructCluster {
                members: c.members.clone(),
                dtilde: dt.into_iter().map(|x| x.min(scale_d)).collect(),
                center: c.center,
                tree: c.tree.parents.clone(),
            })
            .collect();
        clusterings.push(StructClustering { clusters });
    }

    let structure = DistanceStructure {
        scale_index,
        scale_d,
        covering_radius: radius,
        clusterings,
    };
    if params.debug_checks {
        routing::validate_structure(base, &structure, params.tau)
            .map_err(|msg| DriverError::StructureInvalid { scale: scale_index, msg })?;
    }
    Ok(structure)
}

/// Builds all scales bottom up.
pub fn build_all_structures(
    base: &WeightedGraph,
    params: &DriverParams,
    stats: &mut OracleStats,
    ledger: &mut RoundLedger,
) -> Result<Vec<DistanceStructure>, DriverError> {
    let scales = routing::scale_values(base, params.tau, params.beta);
    let n = base.node_count().max(1) as f64;
    let needed = (n * base.max_length() as f64) * params.tau;
    if scales.last().copied().unwrap_or(0.0) < needed.min(1e17) {
        return Err(DriverError::Parameter(
            "edge lengths exceed the supported scale range".into(),
        ));
    }
    let mut structures: Vec<DistanceStructure> = Vec::new();
    for (i, d) in scales.into_iter().enumerate() {
        let s = build_distance_structure(base, i + 1, d, &structures, params, stats, ledger)?;
        structures.push(s);
    }
    Ok(structures)
}

/// Shortest-path forest solution over the whole graph.
#[derive(Debug, Clone)]
pub struct SsspSolution {
    /// `parent[v]` = (parent, edge id in the input graph).
    pub parent: Vec<Option<(NodeId, EdgeId)>>,
    /// Distance label per node (None = unreachable from the sources).
    pub label: Vec<Option<f64>>,
    pub potential: Vec<f64>,
    pub stats: OracleStats,
}

struct SubGraph {
    graph: WeightedGraph,
    nodes: Vec<NodeId>,
    edge_map: Vec<EdgeId>,
}

fn induced_subgraph(g: &WeightedGraph, nodes: &[NodeId]) -> SubGraph {
    let mut index = vec![usize::MAX; g.node_count()];
    for (i, &v) in nodes.iter().enumerate() {
        index[v] = i;
    }
    let mut edges = Vec::new();
    let mut edge_map = Vec::new();
    for (e, edge) in g.edges().iter().enumerate() {
        if index[edge.u] != usize::MAX && index[edge.v] != usize::MAX {
            edges.push((index[edge.u], index[edge.v], edge.length));
            edge_map.push(e);
        }
    }
    SubGraph {
        graph: WeightedGraph::new(nodes.len(), edges, g.scale_exp()).unwrap(),
        nodes: nodes.to_vec(),
        edge_map,
    }
}

/// Approximate set-source shortest-path forest; runs per connected
/// component and unions the outputs. Components without a source are left
/// unreached.
pub fn solve_sssp(
    g: &WeightedGraph,
    sources: &[NodeId],
    eps: f64,
    params: &DriverParams,
    ledger: &mut RoundLedger,
) -> Result<SsspSolution, DriverError> {
    if sources.is_empty() {
        return Err(DriverError::Parameter("source set must be nonempty".into()));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(DriverError::Parameter(format!("eps {eps} outside (0, 1]")));
    }
    let n = g.node_count();
    let mut out = SsspSolution {
        parent: vec![None; n],
        label: vec![None; n],
        potential: vec![0.0; n],
        stats: OracleStats::default(),
    };
    let in_sources: Vec<bool> = {
        let mut m = vec![false; n];
        for &s in sources {
            m[s] = true;
        }
        m
    };
    for component in g.components() {
        let comp_sources: Vec<NodeId> = component
            .iter()
            .copied()
            .filter(|&v| in_sources[v])
            .collect();
        if comp_sources.is_empty() {
            continue;
        }
        if component.len() == 1 {
            out.label[component[0]] = Some(0.0);
            continue;
        }
        let sub = induced_subgraph(g, &component);
        let local_sources: Vec<NodeId> = comp_sources
            .iter()
            .map(|&v| component.binary_search(&v).unwrap())
            .collect();
        let solved = solve_component(&sub.graph, &local_sources, eps, params, ledger)?;
        out.stats.merge(&solved.stats);
        for (li, &v) in sub.nodes.iter().enumerate() {
            out.label[v] = solved.label[li];
            out.potential[v] = solved.potential[li];
            if let Some((lp, le)) = solved.parent[li] {
                out.parent[v] = Some((sub.nodes[lp], sub.edge_map[le]));
            }
        }
    }
    Ok(out)
}

/// One connected component: single sources run directly; set sources hang a
/// virtual source off the set with negligible-weight edges (the lengths are
/// pre-scaled up so the virtual weight stays positive and integral).
fn solve_component(
    g: &WeightedGraph,
    sources: &[NodeId],
    eps: f64,
    params: &DriverParams,
    ledger: &mut RoundLedger,
) -> Result<SsspSolution, DriverError> {
    let n = g.node_count();
    let mut stats = OracleStats::default();
    if sources.len() == 1 {
        let structures = build_all_structures(g, params, &mut stats, ledger)?;
        let op =
            routing::build_router_whole_graph(g, &structures, params.tau, params.beta, ledger)?;
        ledger.set_phase("solve");
        let tree = boosting::build_sssp_tree(
            &op,
            sources[0],
            eps,
            &mut ExactRounder,
            &params.boost,
            ledger,
        )?;
        return Ok(SsspSolution {
            parent: tree.parent,
            label: tree.label.iter().map(|&x| Some(x)).collect(),
            potential: tree.potential.values,
            stats,
        });
    }
    // Set source: rescale lengths and attach a virtual source.
    const SHIFT: u32 = 20;
    let factor = 1i64 << SHIFT;
    let tiny = g.min_length();
    let virt = n;
    let mut edges: Vec<(NodeId, NodeId, i64)> = Vec::with_capacity(g.edge_count());
    for e in g.edges() {
        let len = e.length.checked_mul(factor).ok_or_else(|| {
            DriverError::Parameter("edge lengths too large for the set-source rescale".into())
        })?;
        edges.push((e.u, e.v, len));
    }
    let base_edges = edges.len();
    for &s in sources {
        edges.push((s, virt, tiny));
    }
    let h = WeightedGraph::new(n + 1, edges, g.scale_exp() + SHIFT)
        .map_err(|e| DriverError::Parameter(e.to_string()))?;
    let structures = build_all_structures(&h, params, &mut stats, ledger)?;
    let op = routing::build_router_whole_graph(&h, &structures, params.tau, params.beta, ledger)?;
    ledger.set_phase("solve");
    let tree = boosting::build_sssp_tree(
        &op,
        virt,
        eps,
        &mut ExactRounder,
        &params.boost,
        ledger,
    )?;
    // Strip the virtual source: every source node becomes a root.
    let mut parent: Vec<Option<(NodeId, EdgeId)>> = vec![None; n];
    let mut label: Vec<Option<f64>> = vec![None; n];
    let mut in_sources = vec![false; n];
    for &s in sources {
        in_sources[s] = true;
        label[s] = Some(0.0);
    }
    // Rebuild labels from the stripped forest (descale the lengths).
    let mut children: Vec<Vec<(NodeId, EdgeId)>> = vec![Vec::new(); n];
    for v in 0..n {
        if in_sources[v] {
            continue;
        }
        match tree.parent[v] {
            Some((p, e)) if p < n && e < base_edges => {
                parent[v] = Some((p, e));
                children[p].push((v, e));
            }
            _ => {
                return Err(DriverError::OracleContract(format!(
                    "set-source tree hangs node {v} off the virtual source"
                )))
            }
        }
    }
    let mut queue: Vec<NodeId> = sources.to_vec();
    let mut head = 0;
    while head < queue.len() {
        let v = queue[head];
        head += 1;
        for &(w, e) in &children[v] {
            label[w] = Some(label[v].unwrap() + g.length(e) as f64);
            queue.push(w);
        }
    }
    for v in 0..n {
        if label[v].is_none() {
            return Err(DriverError::OracleContract(format!(
                "set-source tree failed to span node {v}"
            )));
        }
    }
    let potential: Vec<f64> = (0..n)
        .map(|v| tree.potential.values[v] / factor as f64)
        .collect();
    Ok(SsspSolution { parent, label, potential, stats })
}

/// Certified (1+eps)-approximate transshipment: builds the ladder and the
/// whole-graph router per component, then boosts.
pub fn solve_transshipment(
    g: &WeightedGraph,
    b: &Demand,
    eps: f64,
    params: &DriverParams,
    ledger: &mut RoundLedger,
) -> Result<(PrimalDualPair, OracleStats), DriverError> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(DriverError::Parameter(format!("eps {eps} outside (0, 1]")));
    }
    let n = g.node_count();
    let mut stats = OracleStats::default();
    let mut flow = Flow::zero(g.edge_count());
    let mut potential = vec![0.0f64; n];
    let mut gap = 0.0f64;
    let mut iterations = 0usize;
    for (ci, component) in g.components().into_iter().enumerate() {
        let bsum: f64 = component.iter().map(|&v| b.values[v]).sum();
        let bl1: f64 = component.iter().map(|&v| b.values[v].abs()).sum();
        if bsum.abs() > 1e-7 * bl1.max(1.0) {
            return Err(DriverError::UnbalancedComponent { component: ci });
        }
        if bl1 == 0.0 || component.len() == 1 {
            continue;
        }
        let sub = induced_subgraph(g, &component);
        let sub_b = Demand {
            values: component.iter().map(|&v| b.values[v]).collect(),
        };
        let structures = build_all_structures(&sub.graph, params, &mut stats, ledger)?;
        let op = routing::build_router_whole_graph(
            &sub.graph,
            &structures,
            params.tau,
            params.beta,
            ledger,
        )?;
        ledger.set_phase("solve");
        let pair = boosting::boost(
            &op,
            &sub_b,
            eps.min(0.49),
            &params.boost,
            None,
            Some(&mut ExactRounder),
            ledger,
        )?;
        for (le, &ge) in sub.edge_map.iter().enumerate() {
            flow.values[ge] += pair.flow.values[le];
        }
        for (li, &v) in sub.nodes.iter().enumerate() {
            potential[v] = pair.potential.values[li];
        }
        gap += pair.certified_gap.max(0.0);
        iterations += pair.iterations;
    }
    Ok((
        PrimalDualPair {
            flow,
            potential: Potential { values: potential },
            certified_gap: gap,
            iterations,
        },
        stats,
    ))
}
