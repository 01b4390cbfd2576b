//! Boosting a competitive routing operator into certified (1+eps)-approximate
//! transshipment pairs, and the phased construction of approximate
//! shortest-path trees from those pairs.
//!
//! The inner loop is a smoothed primal-dual descent/ascent: the primal flow
//! moves along routing-projected circulations with exact line search (the
//! weighted-median minimizer), the dual potential climbs along supergradient
//! and transposed-routing directions with ratio line search, and the loop
//! exits on the certificate l(f) <= (1+eps) b^T phi. Correctness rests on
//! the certificate, never on the step rule.

use thiserror::Error;

use crate::graph::{
    compensated_sum, demand_of_flow, dot, flow_cost, Demand, EdgeId, Flow, NodeId, Potential,
    WeightedGraph,
};
use crate::minor_agg::RoundLedger;
use crate::rounding::{self, RoundedTree, RoundingError};
use crate::routing::{RoutingError, RoutingOperator};

#[derive(Debug, Error)]
pub enum BoostError {
    #[error("demand does not sum to zero (sum {sum})")]
    Unbalanced { sum: f64 },
    #[error("eps {eps} outside the supported range (0, 0.5)")]
    BadEps { eps: f64 },
    #[error("boosting budget exhausted after {iterations} iterations; best certified gap {best_gap} (primal {cost}, dual {dual})")]
    NonConvergence { iterations: usize, best_gap: f64, cost: f64, dual: f64 },
    #[error("tree phase {phase} made no node happy ({unhappy} remain)")]
    PhaseStall { phase: usize, unhappy: usize },
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error(transparent)]
    Rounding(#[from] RoundingError),
}

/// Budget and tolerance knobs; defaults follow the bench-scale calibration.
#[derive(Debug, Clone)]
pub struct BoostConfig {
    /// Assumed competitiveness of the routing (budget sizing only).
    pub alpha: f64,
    /// Iteration budget factor c_B.
    pub budget_factor: f64,
    /// Phase budget factor c_P for the tree loop.
    pub phase_factor: usize,
    /// Certificates must clear this margin (relative to the flow cost).
    pub margin: f64,
    /// Hard clamp on the iteration budget.
    pub budget_clamp: usize,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            alpha: 32.0,
            budget_factor: 50.0,
            phase_factor: 8,
            margin: 1e-7,
            budget_clamp: 120_000,
        }
    }
}

impl BoostConfig {
    pub fn budget(&self, eps: f64, n: usize) -> usize {
        let logn = (n.max(2) as f64).log2();
        let raw = self.budget_factor * self.alpha * self.alpha / (eps * eps) * logn;
        (raw as usize).clamp(2_000, self.budget_clamp)
    }
}

/// A certified primal-dual transshipment pair.
#[derive(Debug, Clone)]
pub struct PrimalDualPair {
    pub flow: Flow,
    pub potential: Potential,
    /// l(f) - (1+eps) b^T phi; nonpositive on success.
    pub certified_gap: f64,
    pub iterations: usize,
}

/// Outcome of the core loop before the exact-demand fix-up.
#[derive(Debug, Clone)]
pub struct CoreOutcome {
    pub flow: Flow,
    pub potential: Potential,
    pub residual: Demand,
    pub iterations: usize,
}

fn max_violation(g: &WeightedGraph, pi: &[f64]) -> f64 {
    let mut v = 0.0f64;
    for e in g.edges() {
        let x = (pi[e.u] - pi[e.v]).abs() / e.length as f64;
        if x > v {
            v = x;
        }
    }
    v
}

fn feasible_potential(g: &WeightedGraph, pi: &[f64]) -> Vec<f64> {
    let v = max_violation(g, pi);
    if v <= 1.0 {
        pi.to_vec()
    } else {
        pi.iter().map(|x| x / v).collect()
    }
}

/// Softmax machinery over directed edge slacks x = +-(pi_v - pi_u)/l_e.
struct Smoothed {
    theta: f64,
}

impl Smoothed {
    fn new(eps: f64, m: usize) -> Self {
        Smoothed { theta: eps / (4.0 * ((2 * m.max(2)) as f64).ln()) }
    }

    /// Returns (smoothed max violation, per-edge signed softmax weight).
    fn eval(&self, g: &WeightedGraph, pi: &[f64]) -> (f64, Vec<f64>) {
        let m = g.edge_count();
        let mut xs = Vec::with_capacity(m);
        let mut xmax = f64::NEG_INFINITY;
        for e in g.edges() {
            let x = (pi[e.v] - pi[e.u]) / e.length as f64;
            xs.push(x);
            xmax = xmax.max(x.abs());
        }
        if m == 0 || !xmax.is_finite() {
            return (0.0, vec![0.0; m]);
        }
        let th = self.theta;
        let mut z = 0.0f64;
        let mut pos = Vec::with_capacity(m);
        let mut neg = Vec::with_capacity(m);
        for &x in &xs {
            let p = ((x - xmax) / th).exp();
            let q = ((-x - xmax) / th).exp();
            pos.push(p);
            neg.push(q);
            z += p + q;
        }
        let v_smooth = xmax + th * (z.max(1e-300)).ln();
        let sigma: Vec<f64> = pos
            .iter()
            .zip(&neg)
            .map(|(p, q)| (p - q) / z.max(1e-300))
            .collect();
        (v_smooth, sigma)
    }

    /// Gradient of the smoothed violation with respect to pi.
    fn grad(&self, g: &WeightedGraph, sigma: &[f64], n: usize) -> Vec<f64> {
        let mut grad = vec![0.0; n];
        for (e, edge) in g.edges().iter().enumerate() {
            let s = sigma[e] / edge.length as f64;
            grad[edge.v] += s;
            grad[edge.u] -= s;
        }
        grad
    }
}

/// Negative-cycle search on the residual arcs of a signed flow: Bellman-Ford
/// passes from an all-zero start detect any negative closed walk of at most
/// `hops` arcs; the predecessor walk extracts a simple cycle from it.
/// Returns the cycle as a signed circulation plus the number of passes
/// actually executed (the round cost of the probe).
fn negative_cycle(g: &WeightedGraph, f: &[f64], hops: usize) -> (Option<Vec<f64>>, usize) {
    let n = g.node_count();
    let m = g.edge_count();
    let supp_tol = 1e-12 * f.iter().fold(0.0f64, |a, &x| a.max(x.abs())).max(1e-300);
    // Residual arcs: (tail, head, edge, pushes canonical forward?, cost).
    let mut arcs: Vec<(NodeId, NodeId, EdgeId, bool, f64)> = Vec::with_capacity(2 * m);
    for (e, edge) in g.edges().iter().enumerate() {
        let len = edge.length as f64;
        // Forward push u -> v raises f_e: cost +len if f_e >= 0, else -len.
        let cf = if f[e] >= -supp_tol { len } else { -len };
        arcs.push((edge.u, edge.v, e, true, cf));
        let cb = if f[e] <= supp_tol { len } else { -len };
        arcs.push((edge.v, edge.u, e, false, cb));
    }
    let mut dist = vec![0.0f64; n];
    let mut pred: Vec<Option<usize>> = vec![None; n];
    let mut improved_node = None;
    let mut passes = 0usize;
    for _ in 0..hops {
        passes += 1;
        let mut any = false;
        for (ai, &(t, h, _, _, c)) in arcs.iter().enumerate() {
            if dist[t] + c < dist[h] - 1e-9 {
                dist[h] = dist[t] + c;
                pred[h] = Some(ai);
                any = true;
                if dist[h] < -1e-9 {
                    improved_node = Some(h);
                }
            }
        }
        if !any {
            break;
        }
    }
    let Some(mut v) = improved_node else {
        return (None, passes);
    };
    // Walk predecessors until a node repeats; that loop is a negative cycle.
    let mut seen = vec![usize::MAX; n];
    let mut walk: Vec<usize> = Vec::new();
    loop {
        if seen[v] != usize::MAX {
            // Cycle = walk[seen[v]..].
            let mut delta = vec![0.0f64; m];
            for &ai in &walk[seen[v]..] {
                let (_, _, e, fwd, _) = arcs[ai];
                delta[e] += if fwd { 1.0 } else { -1.0 };
            }
            if delta.iter().all(|&x| x == 0.0) {
                return (None, passes);
            }
            return (Some(delta), passes);
        }
        seen[v] = walk.len();
        let Some(ai) = pred[v] else {
            return (None, passes);
        };
        walk.push(ai);
        v = arcs[ai].0;
        if walk.len() > n + 2 {
            return (None, passes);
        }
    }
}

/// Exact minimizer of t -> sum_e l_e |f_e - t d_e| (a weighted median).
fn exact_primal_step(g: &WeightedGraph, f: &[f64], d: &[f64]) -> f64 {
    // Entries with dust-sized direction components produce astronomically
    // large breakpoints that amplify float error into demand violations;
    // drop them from the search.
    let dmax = d.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
    let dust = 1e-9 * dmax;
    let mut points: Vec<(f64, f64)> = Vec::new();
    let mut total = 0.0f64;
    for (e, edge) in g.edges().iter().enumerate() {
        if d[e].abs() > dust {
            let w = edge.length as f64 * d[e].abs();
            points.push((f[e] / d[e], w));
            total += w;
        }
    }
    if points.is_empty() || total == 0.0 {
        return 0.0;
    }
    points.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut acc = 0.0;
    for &(t, w) in &points {
        acc += w;
        if acc >= total / 2.0 {
            return t;
        }
    }
    points.last().unwrap().0
}

/// Ratio line search: maximizes b^T(pi + t d) / max(1e-30, V(pi + t d)) over
/// a deterministic bracket of step sizes; returns the best step (possibly 0).
fn ratio_line_search(
    g: &WeightedGraph,
    b: &[f64],
    pi: &[f64],
    d: &[f64],
) -> (f64, f64) {
    let vd = max_violation(g, d);
    if vd == 0.0 {
        // Direction never violates: push hard along it if it helps.
        let gain = dot(b, d);
        if gain <= 0.0 {
            return (0.0, ratio_value(g, b, pi, d, 0.0));
        }
        // Any multiple works; take a large step relative to pi.
        let t = 1e6;
        return (t, ratio_value(g, b, pi, d, t));
    }
    let t_base = 1.0 / vd;
    let mut best_t = 0.0;
    let mut best = ratio_value(g, b, pi, d, 0.0);
    let mut scale = t_base / 64.0;
    for _ in 0..13 {
        let val = ratio_value(g, b, pi, d, scale);
        if val > best {
            best = val;
            best_t = scale;
        }
        scale *= 2.0;
    }
    // Golden refinement around the best sample.
    let lo = best_t / 2.0;
    let hi = best_t * 2.0;
    let mut a = lo;
    let mut c = hi;
    for _ in 0..12 {
        let m1 = a + (c - a) * 0.382;
        let m2 = a + (c - a) * 0.618;
        let v1 = ratio_value(g, b, pi, d, m1);
        let v2 = ratio_value(g, b, pi, d, m2);
        if v1 >= v2 {
            c = m2;
            if v1 > best {
                best = v1;
                best_t = m1;
            }
        } else {
            a = m1;
            if v2 > best {
                best = v2;
                best_t = m2;
            }
        }
    }
    (best_t, best)
}

fn ratio_value(g: &WeightedGraph, b: &[f64], pi: &[f64], d: &[f64], t: f64) -> f64 {
    let cand: Vec<f64> = pi.iter().zip(d).map(|(p, x)| p + t * x).collect();
    let v = max_violation(g, &cand).max(1e-30);
    let val = dot(b, &cand);
    if v <= 1.0 {
        val
    } else {
        val / v
    }
}

/// Detects single-source-shaped demands (exactly one negative entry) and
/// returns its index.
fn single_source_of(b: &Demand) -> Option<NodeId> {
    let mut src = None;
    for (v, &x) in b.values.iter().enumerate() {
        if x < 0.0 {
            if src.is_some() {
                return None;
            }
            src = Some(v);
        }
    }
    src
}

/// Integrates a potential along the flow support: moving with the flow
/// raises the potential by exactly the edge length, which reproduces the
/// complementary-slack dual when the flow is optimal. Returns the potential
/// plus the support component labels.
fn support_potential(g: &WeightedGraph, f: &[f64], tol: f64) -> (Vec<f64>, Vec<usize>, usize) {
    let n = g.node_count();
    let mut pi = vec![0.0f64; n];
    let mut comp = vec![usize::MAX; n];
    let mut ncomp = 0usize;
    for root in 0..n {
        if comp[root] != usize::MAX {
            continue;
        }
        comp[root] = ncomp;
        let mut queue = vec![root];
        let mut head = 0;
        while head < queue.len() {
            let v = queue[head];
            head += 1;
            for &(w, e) in g.neighbors(v) {
                if comp[w] != usize::MAX || f[e].abs() <= tol {
                    continue;
                }
                let edge = g.edge(e);
                // Positive values flow low -> high endpoint.
                let flow_from_v = (edge.u == v) == (f[e] > 0.0);
                pi[w] = if flow_from_v {
                    pi[v] + edge.length as f64
                } else {
                    pi[v] - edge.length as f64
                };
                comp[w] = ncomp;
                queue.push(w);
            }
        }
        ncomp += 1;
    }
    (pi, comp, ncomp)
}

/// Dual candidate from the primal support: integrate inside each support
/// component, then place the components relative to each other (feasibility
/// repair over the component quotient, then block coordinate ascent on the
/// component offsets).
fn dual_from_support(g: &WeightedGraph, b: &[f64], f: &[f64], tol: f64) -> Vec<f64> {
    let n = g.node_count();
    let (mut pi, comp, ncomp) = support_potential(g, f, tol);
    if ncomp <= 1 {
        return pi;
    }
    // Component placement is a difference-constraint system: every cross
    // edge constrains offset[cu] - offset[cw] to an interval. Bellman-Ford
    // over the constraint arcs solves it exactly when the flow has no
    // negative residual cycle; the quotient is tiny, so also run a few block
    // ascent passes for the pre-optimal stages (block demand is nonzero only
    // while flow still crosses components).
    let mut comp_edges: Vec<Vec<(usize, f64, f64)>> = vec![Vec::new(); ncomp];
    // (other comp, lo, hi): offset[c] - offset[o] must lie in [lo, hi].
    let mut arcs: Vec<(usize, usize, f64)> = Vec::new(); // off[h] <= off[t] + c
    for edge in g.edges() {
        let (cu, cw) = (comp[edge.u], comp[edge.v]);
        if cu == cw {
            continue;
        }
        let len = edge.length as f64;
        // |pi_u + off_cu - pi_w - off_cw| <= len
        let base = pi[edge.v] - pi[edge.u];
        comp_edges[cu].push((cw, base - len, base + len));
        comp_edges[cw].push((cu, -base - len, -base + len));
        arcs.push((cw, cu, base + len));
        arcs.push((cu, cw, -(base - len)));
    }
    let mut offset = vec![0.0f64; ncomp];
    let mut feasible = true;
    for pass in 0..=ncomp {
        let mut any = false;
        for &(t, h, c) in &arcs {
            if offset[t] + c < offset[h] - 1e-9 {
                offset[h] = offset[t] + c;
                any = true;
            }
        }
        if !any {
            break;
        }
        if pass == ncomp {
            feasible = false;
        }
    }
    if !feasible {
        // Pre-optimal flow with inconsistent quotient cycles; fall back to
        // zero offsets and let the feasibility scaling absorb it.
        offset = vec![0.0; ncomp];
    }
    // Block coordinate ascent on the offsets (only effective before the
    // primal is optimal, when block demands are still nonzero).
    let block_b: Vec<f64> = {
        let mut s = vec![0.0; ncomp];
        for v in 0..n {
            s[comp[v]] += b[v];
        }
        s
    };
    if block_b.iter().any(|&x| x.abs() > 1e-12) {
        for _ in 0..2 * ncomp.min(64) {
            let mut changed = false;
            for raise in [true, false] {
                for c in 0..ncomp {
                    let movable = if raise { block_b[c] >= 0.0 } else { block_b[c] <= 0.0 };
                    if !movable || comp_edges[c].is_empty() {
                        continue;
                    }
                    let mut lo = f64::NEG_INFINITY;
                    let mut hi = f64::INFINITY;
                    for &(p, l, h) in &comp_edges[c] {
                        lo = lo.max(offset[p] + l);
                        hi = hi.min(offset[p] + h);
                    }
                    if lo > hi {
                        continue;
                    }
                    let target = if raise { hi } else { lo };
                    if target.is_finite() && (target - offset[c]).abs() > 1e-12 {
                        offset[c] = target;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
    }
    for v in 0..n {
        pi[v] += offset[comp[v]];
    }
    pi
}

/// Sequential coordinate tightening: raise-pass moves every node with
/// nonnegative demand to the top of its feasible interval, lower-pass moves
/// nonpositive-demand nodes to the bottom. Zero-demand nodes move in both
/// passes, which unlocks corridors between demand nodes; each single move
/// preserves feasibility exactly, and the objective never decreases.
fn coordinate_sweep(g: &WeightedGraph, b: &[f64], pi: &mut [f64], raise: bool) -> bool {
    let mut changed = false;
    for v in 0..g.node_count() {
        if g.degree(v) == 0 {
            continue;
        }
        let movable = if raise { b[v] >= 0.0 } else { b[v] <= 0.0 };
        if !movable {
            continue;
        }
        let mut upper = f64::INFINITY;
        let mut lower = f64::NEG_INFINITY;
        for &(w, e) in g.neighbors(v) {
            let len = g.length(e) as f64;
            upper = upper.min(pi[w] + len);
            lower = lower.max(pi[w] - len);
        }
        if lower > upper {
            continue; // neighbors already infeasible among themselves
        }
        let target = if raise { upper } else { lower };
        if (target - pi[v]).abs() > 1e-13 * pi[v].abs().max(1.0)
            && target >= lower - 1e-12
            && target <= upper + 1e-12
        {
            pi[v] = target;
            changed = true;
        }
    }
    changed
}

/// Saturating alternation of raise and lower passes; monotone in b^T pi.
fn tighten(g: &WeightedGraph, b: &[f64], pi: &mut [f64], max_rounds: usize) {
    let mut last_val = dot(b, pi);
    for _ in 0..max_rounds {
        let c1 = coordinate_sweep(g, b, pi, true);
        let c2 = coordinate_sweep(g, b, pi, false);
        if !c1 && !c2 {
            break;
        }
        let val = dot(b, pi);
        if val <= last_val + 1e-12 * last_val.abs().max(1.0) {
            break;
        }
        last_val = val;
    }
}

/// Core loop: returns a flow satisfying a demand within numerical dust of b
/// plus a feasible potential with a certified (1+eps) gap.
pub fn boost_core(
    op: &RoutingOperator,
    b: &Demand,
    eps: f64,
    cfg: &BoostConfig,
    warm_start: Option<&[f64]>,
    mut rounder: Option<&mut dyn RoundOracle>,
    ledger: &mut RoundLedger,
) -> Result<CoreOutcome, BoostError> {
    let g = op.graph();
    let n = g.node_count();
    if !(eps > 0.0 && eps < 0.5) {
        return Err(BoostError::BadEps { eps });
    }
    let sum = compensated_sum(b.values.iter().copied());
    if sum.abs() > 1e-6 * b.l1_norm().max(1.0) {
        return Err(BoostError::Unbalanced { sum });
    }
    if b.l1_norm() == 0.0 {
        return Ok(CoreOutcome {
            flow: Flow::zero(g.edge_count()),
            potential: Potential::zero(n),
            residual: Demand::zero(n),
            iterations: 0,
        });
    }

    let source = single_source_of(b);
    let normalize = |pi: &[f64]| -> Vec<f64> {
        let mut phi = feasible_potential(g, pi);
        if let Some(s) = source {
            let shift = phi[s];
            for x in phi.iter_mut() {
                *x -= shift;
            }
            // Clamping below zero only raises the objective for demands
            // that are nonnegative off-source.
            for x in phi.iter_mut() {
                if *x < 0.0 {
                    *x = 0.0;
                }
            }
        }
        phi
    };

    // Primal: start from the routed flow.
    let f0 = op.apply_r(b, ledger)?;
    let mut f = f0.clone();
    let mut cost = flow_cost(&f, g);

    // Dual state.
    let mut pi: Vec<f64> = warm_start
        .map(|w| w.to_vec())
        .unwrap_or_else(|| vec![0.0; n]);
    if pi.len() != n {
        pi = vec![0.0; n];
    }
    let smoother = Smoothed::new(eps, g.edge_count());
    let mut phi = normalize(&pi);
    let mut best_val = dot(&b.values, &phi);
    let mut best_phi = phi.clone();

    let budget = cfg.budget(eps, n);
    let mut stall = 0usize;
    let mut iterations = 0usize;
    let mut deep_probes = false;
    for t in 0..budget {
        iterations = t + 1;
        let margin = cfg.margin * cost.abs().max(1.0);
        if cost <= (1.0 + eps) * best_val - margin {
            break;
        }
        let mut progress = false;
        let consider_point = |cand: Vec<f64>,
                                  pi: &mut Vec<f64>,
                                  best_val: &mut f64,
                                  best_phi: &mut Vec<f64>|
         -> bool {
            let cand_phi = normalize(&cand);
            let cand_val = dot(&b.values, &cand_phi);
            if cand_val > *best_val + 1e-14 * best_val.abs().max(1.0) {
                *pi = cand;
                *best_val = cand_val;
                *best_phi = cand_phi;
                true
            } else {
                false
            }
        };

        // Primal candidates: circulation directions tried with exact line
        // search (each step takes the 1-d global minimizer, so the cost is
        // monotone).
        let demand_tol = 1e-7 * b.l1_norm().max(1.0);
        let try_direction = |delta: &[f64], f: &mut Flow, cost: &mut f64| -> bool {
            let step = exact_primal_step(g, &f.values, delta);
            if step == 0.0 || !step.is_finite() {
                return false;
            }
            let cand: Vec<f64> =
                f.values.iter().zip(delta).map(|(x, d)| x - step * d).collect();
            let cand_flow = Flow { values: cand };
            let cand_cost = flow_cost(&cand_flow, g);
            if cand_cost >= *cost - 1e-13 * cost.abs().max(1.0) {
                return false;
            }
            // Directions are circulations in exact arithmetic; reject any
            // step that amplifies float dust into a real demand change.
            let got = demand_of_flow(&cand_flow, g);
            let dev = got
                .values
                .iter()
                .zip(&b.values)
                .map(|(a, c)| (a - c).abs())
                .fold(0.0f64, f64::max);
            if dev > demand_tol {
                return false;
            }
            f.values = cand_flow.values;
            *cost = cand_cost;
            true
        };
        // Rip-up-and-reroute: remove the flow riding edges with large dual
        // slack and offer its rerouting as a direction.
        let slack_of = |e: usize| -> f64 {
            let edge = g.edge(e);
            let d = (best_phi[edge.u] - best_phi[edge.v]).abs();
            (edge.length as f64 - d) / edge.length as f64
        };
        let mut rip_candidates: Vec<Vec<usize>> = Vec::new();
        {
            let mut slacked: Vec<usize> = (0..g.edge_count())
                .filter(|&e| f.values[e] != 0.0 && slack_of(e) > 1e-9)
                .collect();
            slacked.sort_by(|&a, &b| {
                slack_of(b).partial_cmp(&slack_of(a)).unwrap().then(a.cmp(&b))
            });
            if !slacked.is_empty() {
                rip_candidates.push(vec![slacked[0]]);
                if slacked.len() > 1 {
                    rip_candidates.push(slacked.iter().copied().take(4).collect());
                }
                rip_candidates.push(slacked.clone());
            }
        }
        for rip in &rip_candidates {
            let mut part = vec![0.0; g.edge_count()];
            for &e in rip {
                part[e] = f.values[e];
            }
            let part_flow = Flow { values: part.clone() };
            let part_demand = demand_of_flow(&part_flow, g);
            let rerouted = op.apply_r(&part_demand, ledger)?;
            let delta: Vec<f64> = part
                .iter()
                .zip(&rerouted.values)
                .map(|(a, r)| a - r)
                .collect();
            if try_direction(&delta, &mut f, &mut cost) {
                progress = true;
            }
        }
        // Cycle canceling to local exhaustion: sparse, targeted descent
        // along negative residual cycles. Each Bellman-Ford pass is one
        // round and only executed passes are charged. Probes stay shallow
        // here; a full-depth probe runs below only when the iteration would
        // otherwise stall, so long cycles (the whole girth on ring-like
        // graphs) are still found without deep scans on every step.
        let shallow = if deep_probes {
            n + 2
        } else {
            4 * (usize::BITS - n.max(2).leading_zeros()) as usize + 4
        };
        for _ in 0..64 {
            let (found, passes) = negative_cycle(g, &f.values, shallow);
            ledger.charge(passes as u64);
            let Some(cycle) = found else { break };
            if !try_direction(&cycle, &mut f, &mut cost) {
                break;
            }
            progress = true;
        }

        // Rounding-assisted candidates for single-source demands: the tree
        // flow never costs more than the flow it was rounded from, and its
        // distance labels are a dual candidate after feasibility scaling.
        if let (Some(src), Some(r)) = (source, rounder.as_deref_mut()) {
            if t % 8 == 0 {
                if let Ok(tree) = r.round(g, &f, src, ledger) {
                    let mut tree_flow = vec![0.0f64; g.edge_count()];
                    let mut labels = vec![0.0f64; n];
                    let mut ok = true;
                    for v in 0..n {
                        if v == src || b.values[v] == 0.0 {
                            continue;
                        }
                        match tree.tree_dist(g, v) {
                            Some(_) => {}
                            None => {
                                ok = false;
                                break;
                            }
                        }
                    }
                    if ok {
                        // Push each demand down its root path.
                        for v in 0..n {
                            if let Some(l) = tree.label[v] {
                                labels[v] = l as f64;
                            }
                            if v == src || b.values[v] == 0.0 {
                                continue;
                            }
                            let mut u = v;
                            let mut hops = 0;
                            while u != src {
                                let Some((p, e)) = tree.parent[u] else { ok = false; break };
                                let sign = if g.edge(e).u == p { 1.0 } else { -1.0 };
                                tree_flow[e] += sign * b.values[v];
                                u = p;
                                hops += 1;
                                if hops > n {
                                    ok = false;
                                    break;
                                }
                            }
                            if !ok {
                                break;
                            }
                        }
                    }
                    if ok {
                        let cand_cost = flow_cost(&Flow { values: tree_flow.clone() }, g);
                        if cand_cost < cost - 1e-13 * cost.abs().max(1.0) {
                            f.values = tree_flow;
                            cost = cand_cost;
                            progress = true;
                        }
                        if consider_point(labels, &mut pi, &mut best_val, &mut best_phi) {
                            progress = true;
                        }
                    }
                }
            }
        }

        // Smoothed-subgradient circulation.
        let sign_grad: Vec<f64> = f
            .values
            .iter()
            .zip(g.edges())
            .map(|(x, e)| {
                let s = if *x > 0.0 { 1.0 } else if *x < 0.0 { -1.0 } else { 0.0 };
                s * e.length as f64
            })
            .collect();
        let grad_flow = Flow { values: sign_grad.clone() };
        let grad_demand = demand_of_flow(&grad_flow, g);
        let routed_grad = op.apply_r(&grad_demand, ledger)?;
        let delta: Vec<f64> = sign_grad
            .iter()
            .zip(&routed_grad.values)
            .map(|(a, r)| a - r)
            .collect();
        if try_direction(&delta, &mut f, &mut cost) {
            progress = true;
        }
        // Rebalance toward the plain routed flow.
        let delta2: Vec<f64> = f.values.iter().zip(&f0.values).map(|(x, y)| x - y).collect();
        if try_direction(&delta2, &mut f, &mut cost) {
            progress = true;
        }


        // Dual candidate point: integrate along the primal support; exact
        // complementary-slack dual once the primal is optimal.
        let mut improved_dual = false;
        let supp_tol = 1e-9 * f.values.iter().fold(0.0f64, |a, &x| a.max(x.abs())).max(1e-300);
        let integrated = dual_from_support(g, &b.values, &f.values, supp_tol);
        if consider_point(integrated.clone(), &mut pi, &mut best_val, &mut best_phi) {
            improved_dual = true;
        }
        // Saturating tightening on the feasibility-scaled integrated point
        // and on the scaled current iterate.
        let mut integrated_feas = feasible_potential(g, &integrated);
        tighten(g, &b.values, &mut integrated_feas, (2 * n).min(64));
        if consider_point(integrated_feas, &mut pi, &mut best_val, &mut best_phi) {
            improved_dual = true;
        }
        let mut swept = feasible_potential(g, &pi);
        tighten(g, &b.values, &mut swept, (2 * n).min(64));
        if consider_point(swept, &mut pi, &mut best_val, &mut best_phi) {
            improved_dual = true;
        }

        // Directional candidates: annealed smoothed supergradient and
        // transposed-routing directions.
        let anneal = match t % 3 {
            0 => 32.0,
            1 => 4.0,
            _ => 1.0,
        };
        let smoother_t = Smoothed { theta: smoother.theta * anneal };
        let (_v_smooth, sigma) = smoother_t.eval(g, &pi);
        let grad_v = smoother_t.grad(g, &sigma, n);
        let d1: Vec<f64> = b
            .values
            .iter()
            .zip(&grad_v)
            .map(|(bb, gg)| bb - cost.max(1.0) * gg)
            .collect();
        let sigma_scaled: Vec<f64> = sigma
            .iter()
            .zip(g.edges())
            .map(|(s, e)| s * e.length as f64)
            .collect();
        let d2 = op.apply_rt(&sigma_scaled, ledger)?;
        // Dual candidate from the primal's own tight geometry.
        let primal_cost_vec: Vec<f64> = f
            .values
            .iter()
            .zip(g.edges())
            .map(|(x, e)| {
                let s = if *x > 0.0 { 1.0 } else if *x < 0.0 { -1.0 } else { 0.0 };
                s * e.length as f64
            })
            .collect();
        let d3 = op.apply_rt(&primal_cost_vec, ledger)?;
        for d in [&d1, &d2, &d3, &b.values] {
            let (step, _) = ratio_line_search(g, &b.values, &pi, d);
            if step > 0.0 {
                let cand: Vec<f64> = pi.iter().zip(d.iter()).map(|(p, x)| p + step * x).collect();
                if consider_point(cand, &mut pi, &mut best_val, &mut best_phi) {
                    improved_dual = true;
                    break;
                }
            }
        }
        if improved_dual {
            progress = true;
        }
        ledger.charge(2);

        if !progress && !deep_probes {
            // Last resort before declaring a stall: full-depth cycle probes
            // catch negative cycles longer than the shallow budget. Stay
            // deep for the rest of this call once they prove necessary.
            for _ in 0..64 {
                let (found, passes) = negative_cycle(g, &f.values, n + 2);
                ledger.charge(passes as u64);
                let Some(cycle) = found else { break };
                if !try_direction(&cycle, &mut f, &mut cost) {
                    break;
                }
                progress = true;
                deep_probes = true;
            }
        }
        if progress {
            stall = 0;
        } else {
            stall += 1;
            if stall > 80 {
                break;
            }
        }
    }
    phi = best_phi;
    let margin = cfg.margin * cost.abs().max(1.0);
    if cost > (1.0 + eps) * best_val - margin {
        return Err(BoostError::NonConvergence {
            iterations,
            best_gap: cost - (1.0 + eps) * best_val,
            cost,
            dual: best_val,
        });
    }
    let residual_demand = {
        let got = demand_of_flow(&f, g);
        Demand {
            values: b.values.iter().zip(&got.values).map(|(want, have)| want - have).collect(),
        }
    };
    Ok(CoreOutcome {
        flow: f,
        potential: Potential { values: phi },
        residual: residual_demand,
        iterations,
    })
}

/// Full boosting: the core loop plus the exact-demand fix-up (routing the
/// residual), returning a certified pair whose flow satisfies b exactly up
/// to numerical dust.
pub fn boost(
    op: &RoutingOperator,
    b: &Demand,
    eps: f64,
    cfg: &BoostConfig,
    warm_start: Option<&[f64]>,
    rounder: Option<&mut dyn RoundOracle>,
    ledger: &mut RoundLedger,
) -> Result<PrimalDualPair, BoostError> {
    let g = op.graph();
    if b.l1_norm() == 0.0 {
        return Ok(PrimalDualPair {
            flow: Flow::zero(g.edge_count()),
            potential: Potential::zero(g.node_count()),
            certified_gap: 0.0,
            iterations: 0,
        });
    }
    let core = boost_core(op, b, eps.min(0.49), cfg, warm_start, rounder, ledger)?;
    let mut flow = core.flow;
    if core.residual.l1_norm() > 0.0 {
        let fix = op.apply_r(&core.residual, ledger)?;
        flow.add(&fix);
    }
    let cost = flow_cost(&flow, g);
    let val = dot(&b.values, &core.potential.values);
    Ok(PrimalDualPair {
        flow,
        potential: core.potential,
        certified_gap: cost - (1.0 + eps) * val,
        iterations: core.iterations,
    })
}

/// Tree-rounding oracle interface used by the tree loop.
pub trait RoundOracle {
    fn round(
        &mut self,
        g: &WeightedGraph,
        flow: &Flow,
        source: NodeId,
        ledger: &mut RoundLedger,
    ) -> Result<RoundedTree, BoostError>;
}

/// The exact rounding implementation (zero rounding loss).
pub struct ExactRounder;

impl RoundOracle for ExactRounder {
    fn round(
        &mut self,
        g: &WeightedGraph,
        flow: &Flow,
        source: NodeId,
        ledger: &mut RoundLedger,
    ) -> Result<RoundedTree, BoostError> {
        Ok(rounding::round_flow(g, flow, source, ledger)?)
    }
}

/// Approximate shortest-path tree with a matching potential.
#[derive(Debug, Clone)]
pub struct SsspTree {
    /// phi(source) = 0 and dist_T(v) <= (1+eps) phi(v) for every node.
    pub potential: Potential,
    pub parent: Vec<Option<(NodeId, EdgeId)>>,
    /// Distance labels dominating the tree distances.
    pub label: Vec<f64>,
    pub phases: usize,
    /// Per-phase diagnostics: the unhappy set targeted by the phase and the
    /// per-node distances of the phase tree (for nodes it spans).
    pub phase_log: Vec<PhaseRecord>,
}

#[derive(Debug, Clone)]
pub struct PhaseRecord {
    pub unhappy: Vec<NodeId>,
    pub tree_dist: Vec<Option<f64>>,
}

/// Happy/unhappy phase loop: each phase boosts the residual unhappy demand,
/// rounds the flow into a tree, marks nodes whose tree distance certifies
/// their potential, and finally merges all phases into a common potential
/// (pointwise max) and a common tree (distance-label merge).
pub fn build_sssp_tree(
    op: &RoutingOperator,
    source: NodeId,
    eps: f64,
    rounder: &mut dyn RoundOracle,
    cfg: &BoostConfig,
    ledger: &mut RoundLedger,
) -> Result<SsspTree, BoostError> {
    let g = op.graph();
    let n = g.node_count();
    if n <= 1 {
        return Ok(SsspTree {
            potential: Potential::zero(n),
            parent: vec![None; n],
            label: vec![0.0; n],
            phases: 0,
            phase_log: Vec::new(),
        });
    }
    let logn = (usize::BITS - n.max(2).leading_zeros()) as usize;
    let phase_cap = cfg.phase_factor * logn + 4;
    let mut unhappy: Vec<bool> = (0..n).map(|v| v != source).collect();
    let mut trees: Vec<RoundedTree> = Vec::new();
    let mut potentials: Vec<Vec<f64>> = Vec::new();
    let mut warm: Option<Vec<f64>> = None;
    let mut phases = 0usize;
    let mut phase_log: Vec<PhaseRecord> = Vec::new();
    for phase in 0..phase_cap {
        let count = unhappy.iter().filter(|&&x| x).count();
        if count == 0 {
            break;
        }
        phases = phase + 1;
        ledger.set_phase("sssp-tree");
        let mut b = Demand::zero(n);
        for v in 0..n {
            if unhappy[v] {
                b.values[v] = 1.0;
            }
        }
        b.values[source] -= count as f64;
        let eps_b = (eps / 2.0).min(0.45);
        let pair = boost(op, &b, eps_b, cfg, warm.as_deref(), Some(&mut *rounder), ledger)?;
        let mut phi = pair.potential.values.clone();
        let shift = phi[source];
        for x in phi.iter_mut() {
            *x -= shift;
        }
        let tree = rounder.round(g, &pair.flow, source, ledger)?;
        phase_log.push(PhaseRecord {
            unhappy: (0..n).filter(|&v| unhappy[v]).collect(),
            tree_dist: (0..n).map(|v| tree.tree_dist(g, v).map(|d| d as f64)).collect(),
        });
        let mut got_happy = 0usize;
        for v in 0..n {
            if !unhappy[v] {
                continue;
            }
            if let Some(d) = tree.tree_dist(g, v) {
                let d = d as f64;
                if d <= (1.0 + eps) * phi[v] + 1e-9 * phi[v].abs().max(1.0) {
                    unhappy[v] = false;
                    got_happy += 1;
                }
            }
        }
        if got_happy == 0 {
            return Err(BoostError::PhaseStall { phase, unhappy: count });
        }
        warm = Some(pair.potential.values.clone());
        trees.push(tree);
        potentials.push(phi);
    }
    let remaining = unhappy.iter().filter(|&&x| x).count();
    if remaining > 0 {
        return Err(BoostError::PhaseStall { phase: phase_cap, unhappy: remaining });
    }

    // Common potential: pointwise max.
    let mut potential = vec![0.0f64; n];
    for phi in &potentials {
        for v in 0..n {
            potential[v] = potential[v].max(phi[v]);
        }
    }
    // Common tree: replay trees in phase order, lowering distance labels.
    let mut label = vec![f64::INFINITY; n];
    let mut parent: Vec<Option<(NodeId, EdgeId)>> = vec![None; n];
    label[source] = 0.0;
    for tree in &trees {
        // BFS order from the source inside this tree.
        let mut children: Vec<Vec<(NodeId, EdgeId)>> = vec![Vec::new(); n];
        for v in 0..n {
            if let Some((p, e)) = tree.parent[v] {
                children[p].push((v, e));
            }
        }
        let mut queue = vec![source];
        let mut head = 0;
        while head < queue.len() {
            let v = queue[head];
            head += 1;
            for &(w, e) in &children[v] {
                let cand = label[v] + g.length(e) as f64;
                if cand < label[w] {
                    label[w] = cand;
                    parent[w] = Some((v, e));
                }
                queue.push(w);
            }
        }
        ledger.charge(2);
    }
    Ok(SsspTree {
        potential: Potential { values: potential },
        parent,
        label,
        phases,
        phase_log,
    })
}
