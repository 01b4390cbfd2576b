//! Graph, flow, demand, and potential primitives shared by every other module.
//!
//! Edge lengths are stored as positive scaled integers (the scale exponent is
//! a power of two recorded on the graph). Exactness-sensitive code (flow
//! rounding) works directly on these integers; approximation code treats them
//! as `f64`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type NodeId = usize;
pub type EdgeId = usize;

/// Relative tolerance for conservation / zero-sum checks on float paths.
pub const CONSERVATION_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("edge ({u}, {v}) has non-positive length {len}")]
    NonPositiveLength { u: NodeId, v: NodeId, len: i64 },
    #[error("edge ({u}, {v}) is a self-loop")]
    SelfLoop { u: NodeId, v: NodeId },
    #[error("node id {node} out of range (n = {n})")]
    NodeOutOfRange { node: NodeId, n: usize },
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("vector length {got} does not match expected {want}")]
    LengthMismatch { got: usize, want: usize },
}

/// One undirected edge. Endpoints are stored in canonical orientation
/// (`u < v`); parallel edges are permitted and keep distinct edge ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub u: NodeId,
    pub v: NodeId,
    pub length: i64,
}

impl Edge {
    pub fn other(&self, x: NodeId) -> NodeId {
        if x == self.u {
            self.v
        } else {
            self.u
        }
    }
}

/// Undirected weighted graph with positive integer lengths and an adjacency
/// index. Node ids are `0..n`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<Edge>,
    /// `adj[v]` lists `(neighbor, edge id)` pairs, ascending by edge id.
    adj: Vec<Vec<(NodeId, EdgeId)>>,
    /// Power-of-two exponent relating stored integer lengths to input units.
    scale_exp: u32,
}

impl WeightedGraph {
    pub fn new(n: usize, edges: Vec<(NodeId, NodeId, i64)>, scale_exp: u32) -> Result<Self, GraphError> {
        let mut es = Vec::with_capacity(edges.len());
        for &(u, v, len) in &edges {
            if u >= n {
                return Err(GraphError::NodeOutOfRange { node: u, n });
            }
            if v >= n {
                return Err(GraphError::NodeOutOfRange { node: v, n });
            }
            if u == v {
                return Err(GraphError::SelfLoop { u, v });
            }
            if len <= 0 {
                return Err(GraphError::NonPositiveLength { u, v, len });
            }
            let (a, b) = if u < v { (u, v) } else { (v, u) };
            es.push(Edge { u: a, v: b, length: len });
        }
        let mut adj = vec![Vec::new(); n];
        for (id, e) in es.iter().enumerate() {
            adj[e.u].push((e.v, id));
            adj[e.v].push((e.u, id));
        }
        Ok(WeightedGraph { n, edges: es, adj, scale_exp })
    }

    /// Builds a graph from decimal lengths, snapping them to the finest
    /// power-of-two grid (up to 2^-20) that represents every length.
    pub fn from_decimal(n: usize, edges: &[(NodeId, NodeId, f64)]) -> Result<Self, GraphError> {
        let mut exp = 0u32;
        for &(u, v, len) in edges {
            if !(len > 0.0) || !len.is_finite() {
                return Err(GraphError::NonPositiveLength { u, v, len: len as i64 });
            }
            while exp < 20 {
                let scaled = len * f64::powi(2.0, exp as i32);
                if (scaled - scaled.round()).abs() < 1e-12 * scaled.max(1.0) {
                    break;
                }
                exp += 1;
            }
        }
        let factor = f64::powi(2.0, exp as i32);
        let scaled: Vec<(NodeId, NodeId, i64)> = edges
            .iter()
            .map(|&(u, v, len)| (u, v, (len * factor).round() as i64))
            .collect();
        Self::new(n, scaled, exp)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn length(&self, e: EdgeId) -> i64 {
        self.edges[e].length
    }

    pub fn scale_exp(&self) -> u32 {
        self.scale_exp
    }

    pub fn neighbors(&self, v: NodeId) -> &[(NodeId, EdgeId)] {
        &self.adj[v]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adj[v].len()
    }

    pub fn min_length(&self) -> i64 {
        self.edges.iter().map(|e| e.length).min().unwrap_or(1)
    }

    pub fn max_length(&self) -> i64 {
        self.edges.iter().map(|e| e.length).max().unwrap_or(1)
    }

    /// Number of bits in a node identifier: ceil(log2 n) + 1.
    pub fn id_bits(&self) -> u32 {
        id_bits_for(self.n)
    }

    /// The k-th most significant bit (1-indexed) of v's padded identifier.
    pub fn id_bit(&self, v: NodeId, k: u32) -> bool {
        debug_assert!(k >= 1 && k <= self.id_bits());
        (v >> (self.id_bits() - k)) & 1 == 1
    }

    /// Connected components, each sorted ascending; components ordered by
    /// smallest member.
    pub fn components(&self) -> Vec<Vec<NodeId>> {
        let mut seen = vec![false; self.n];
        let mut out = Vec::new();
        for s in 0..self.n {
            if seen[s] {
                continue;
            }
            let mut comp = vec![s];
            seen[s] = true;
            let mut stack = vec![s];
            while let Some(v) = stack.pop() {
                for &(w, _) in &self.adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        comp.push(w);
                        stack.push(w);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }
}

pub fn id_bits_for(n: usize) -> u32 {
    let log = (usize::BITS - n.max(1).leading_zeros()) as u32;
    // ceil(log2 n) + 1, with n = 1 giving 1 bit.
    if n <= 1 {
        1
    } else if n.is_power_of_two() {
        log - 1 + 1
    } else {
        log + 1
    }
}

/// Signed flow on the canonical edge orientation: positive values flow from
/// the lower-indexed endpoint to the higher-indexed one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub values: Vec<f64>,
}

impl Flow {
    pub fn zero(m: usize) -> Self {
        Flow { values: vec![0.0; m] }
    }

    pub fn from_bidirected(bi: &BiFlow) -> Self {
        let values = bi
            .forward
            .iter()
            .zip(&bi.backward)
            .map(|(f, b)| f - b)
            .collect();
        Flow { values }
    }

    /// Canonical bidirected form: only the net direction carries flow.
    pub fn to_bidirected(&self) -> BiFlow {
        let mut forward = vec![0.0; self.values.len()];
        let mut backward = vec![0.0; self.values.len()];
        for (i, &x) in self.values.iter().enumerate() {
            if x >= 0.0 {
                forward[i] = x;
            } else {
                backward[i] = -x;
            }
        }
        BiFlow { forward, backward }
    }

    pub fn add(&mut self, other: &Flow) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }

}

/// Nonnegative flow values per edge direction (the bidirected representation;
/// both directions of one edge may carry flow simultaneously).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiFlow {
    /// u -> v amounts in canonical orientation.
    pub forward: Vec<f64>,
    /// v -> u amounts.
    pub backward: Vec<f64>,
}

/// Node vector that sums to zero: `b(v)` is the net inflow required at `v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demand {
    pub values: Vec<f64>,
}

impl Demand {
    pub fn zero(n: usize) -> Self {
        Demand { values: vec![0.0; n] }
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|x| x.abs()).sum()
    }

    pub fn is_balanced(&self) -> bool {
        let sum: f64 = compensated_sum(self.values.iter().copied());
        sum.abs() <= CONSERVATION_TOL * self.l1_norm().max(1.0)
    }

    pub fn add(&mut self, other: &Demand) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }
}

/// Node vector satisfying the Lipschitz constraint |phi(u)-phi(v)| <= l(u,v)
/// on every edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialViolation {
    pub edge: EdgeId,
    pub difference: f64,
    pub bound: f64,
}

impl Potential {
    pub fn zero(n: usize) -> Self {
        Potential { values: vec![0.0; n] }
    }

    /// Pointwise maximum; the max of valid potentials is valid.
    pub fn max(a: &Potential, b: &Potential) -> Potential {
        Potential {
            values: a.values.iter().zip(&b.values).map(|(x, y)| x.max(*y)).collect(),
        }
    }

    /// Pointwise minimum; the min of valid potentials is valid.
    pub fn min(a: &Potential, b: &Potential) -> Potential {
        Potential {
            values: a.values.iter().zip(&b.values).map(|(x, y)| x.min(*y)).collect(),
        }
    }
}

/// True iff every edge satisfies the potential constraint; otherwise reports
/// the first violated edge (by edge id).
pub fn validate_potential(phi: &Potential, g: &WeightedGraph) -> Result<(), PotentialViolation> {
    validate_potential_slack(phi, g, 1e-9)
}

/// Potential check with a relative slack for float-computed potentials.
pub fn validate_potential_slack(
    phi: &Potential,
    g: &WeightedGraph,
    rel_slack: f64,
) -> Result<(), PotentialViolation> {
    for (id, e) in g.edges().iter().enumerate() {
        let diff = (phi.values[e.u] - phi.values[e.v]).abs();
        let bound = e.length as f64;
        if diff > bound * (1.0 + rel_slack) + rel_slack {
            return Err(PotentialViolation { edge: id, difference: diff, bound });
        }
    }
    Ok(())
}

/// Transshipment cost of a signed flow: sum over edges of length * |flow|.
pub fn flow_cost(f: &Flow, g: &WeightedGraph) -> f64 {
    compensated_sum(
        f.values
            .iter()
            .zip(g.edges())
            .map(|(x, e)| e.length as f64 * x.abs()),
    )
}

/// Transshipment cost of a bidirected flow: both directions count.
pub fn biflow_cost(f: &BiFlow, g: &WeightedGraph) -> f64 {
    compensated_sum(
        f.forward
            .iter()
            .zip(&f.backward)
            .zip(g.edges())
            .map(|((a, b), e)| e.length as f64 * (a + b)),
    )
}

/// The demand a flow satisfies: b(v) = inflow(v) - outflow(v).
pub fn demand_of_flow(f: &Flow, g: &WeightedGraph) -> Demand {
    let mut b = vec![0.0; g.node_count()];
    for (id, e) in g.edges().iter().enumerate() {
        let x = f.values[id];
        b[e.v] += x;
        b[e.u] -= x;
    }
    Demand { values: b }
}

/// Kahan-compensated summation; used wherever certificates are evaluated.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for x in xs {
        let y = x - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    compensated_sum(a.iter().zip(b).map(|(x, y)| x * y))
}

/// The graph G extended with a hub node adjacent to every base node and a
/// super-source adjacent to exactly the nodes of `sources`, all new edges of
/// length `d`. Distances between base nodes are preserved up to 2d.
#[derive(Debug, Clone)]
pub struct AugmentedGraph {
    pub graph: WeightedGraph,
    pub base_nodes: usize,
    pub base_edges: usize,
    pub hub: NodeId,
    pub super_source: NodeId,
    pub d: i64,
    pub sources: Vec<NodeId>,
}

/// Builds the augmented graph: base edges keep their ids, then hub edges
/// (v, hub) for every base v ascending, then (s, super_source) for s in
/// `sources` ascending.
pub fn build_augmented(
    g: &WeightedGraph,
    sources: &[NodeId],
    d: i64,
) -> Result<AugmentedGraph, GraphError> {
    if d <= 0 {
        return Err(GraphError::Parameter(format!("augmentation length must be positive, got {d}")));
    }
    let n = g.node_count();
    for &s in sources {
        if s >= n {
            return Err(GraphError::NodeOutOfRange { node: s, n });
        }
    }
    let hub = n;
    let super_source = n + 1;
    let mut srcs: Vec<NodeId> = sources.to_vec();
    srcs.sort_unstable();
    srcs.dedup();
    let mut edges: Vec<(NodeId, NodeId, i64)> = g
        .edges()
        .iter()
        .map(|e| (e.u, e.v, e.length))
        .collect();
    for v in 0..n {
        edges.push((v, hub, d));
    }
    for &s in &srcs {
        edges.push((s, super_source, d));
    }
    let graph = WeightedGraph::new(n + 2, edges, g.scale_exp())?;
    Ok(AugmentedGraph {
        graph,
        base_nodes: n,
        base_edges: g.edge_count(),
        hub,
        super_source,
        d,
        sources: srcs,
    })
}
