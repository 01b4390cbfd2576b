//! Machine-readable verification reports: every acceptance loop (stretch,
//! conservation, certificates, cover properties, rounding exactness) closes
//! through these checks against the exact oracles.

use serde::Serialize;

use crate::covers::{self, SparseCover};
use crate::driver::SsspSolution;
use crate::exact;
use crate::graph::{
    demand_of_flow, dot, flow_cost, validate_potential_slack, Demand, Flow, NodeId, Potential,
    WeightedGraph,
};
use crate::rounding::RoundedTree;

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub status: bool,
    pub measured: f64,
    pub bound: f64,
    /// Node or edge id witnessing a failure, if any.
    pub witness: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
}

impl VerificationReport {
    pub fn push(&mut self, name: &str, status: bool, measured: f64, bound: f64, witness: Option<usize>) {
        self.checks.push(Check { name: name.to_string(), status, measured, bound, witness });
    }

    pub fn all_ok(&self) -> bool {
        self.checks.iter().all(|c| c.status)
    }

    pub fn exit_code(&self) -> i32 {
        if self.all_ok() {
            0
        } else {
            2
        }
    }

    pub fn merge(&mut self, other: VerificationReport) {
        self.checks.extend(other.checks);
    }
}

/// Stretch and structure checks of a shortest-path forest solution.
pub fn verify_sssp(
    g: &WeightedGraph,
    sources: &[NodeId],
    sol: &SsspSolution,
    eps: f64,
) -> VerificationReport {
    let mut rep = VerificationReport::default();
    let dist = exact::dijkstra(g, sources).dist;
    let mut max_stretch = 1.0f64;
    let mut witness = None;
    let mut coverage_ok = true;
    let mut lower_ok = true;
    for v in 0..g.node_count() {
        match (dist[v], sol.label[v]) {
            (Some(d), Some(l)) => {
                if d > 0 {
                    let s = l / d as f64;
                    if s > max_stretch {
                        max_stretch = s;
                        witness = Some(v);
                    }
                }
                if l + 1e-6 < d as f64 {
                    lower_ok = false;
                    witness = Some(v);
                }
            }
            (None, None) => {}
            _ => {
                coverage_ok = false;
                witness = Some(v);
            }
        }
    }
    rep.push(
        "sssp-stretch",
        max_stretch <= 1.0 + eps + 1e-6,
        max_stretch,
        1.0 + eps,
        witness,
    );
    rep.push("sssp-reaches-exactly-the-reachable", coverage_ok, 0.0, 0.0, witness);
    rep.push("sssp-labels-dominate-distances", lower_ok, 0.0, 0.0, witness);
    // Parent pointers form a forest consistent with the labels.
    let mut tree_ok = true;
    let mut tw = None;
    for v in 0..g.node_count() {
        if let Some((p, e)) = sol.parent[v] {
            let (Some(lv), Some(lp)) = (sol.label[v], sol.label[p]) else {
                tree_ok = false;
                tw = Some(v);
                continue;
            };
            if lp + g.length(e) as f64 > lv + 1e-6 * lv.max(1.0) {
                tree_ok = false;
                tw = Some(v);
            }
        }
    }
    rep.push("sssp-parents-consistent", tree_ok, 0.0, 0.0, tw);
    rep
}

/// Conservation, feasibility, certificate, and (when the exact oracle
/// applies) the true approximation ratio of a transshipment pair.
pub fn verify_transshipment(
    g: &WeightedGraph,
    b: &Demand,
    flow: &Flow,
    potential: &Potential,
    eps: f64,
) -> VerificationReport {
    let mut rep = VerificationReport::default();
    let got = demand_of_flow(flow, g);
    let mut conservation = 0.0f64;
    let mut witness = None;
    for v in 0..g.node_count() {
        let r = (got.values[v] - b.values[v]).abs();
        if r > conservation {
            conservation = r;
            witness = Some(v);
        }
    }
    let tol = 1e-9 * b.l1_norm().max(1.0);
    rep.push("flow-conservation", conservation <= tol, conservation, tol, witness);
    let pot_ok = validate_potential_slack(potential, g, 1e-7);
    rep.push(
        "potential-valid",
        pot_ok.is_ok(),
        0.0,
        0.0,
        pot_ok.err().map(|v| v.edge),
    );
    let cost = flow_cost(flow, g);
    let val = dot(&b.values, &potential.values);
    rep.push(
        "certificate",
        cost <= (1.0 + eps) * val + 1e-6 * val.abs().max(1.0),
        cost,
        (1.0 + eps) * val,
        None,
    );
    if g.node_count() <= exact::EXACT_TRANSSHIPMENT_CAP {
        if let Ok(opt) = exact::exact_transshipment(g, b) {
            rep.push(
                "ratio-vs-optimum",
                cost <= (1.0 + eps) * opt.cost + 1e-6 * opt.cost.max(1.0),
                if opt.cost > 0.0 { cost / opt.cost } else { 1.0 },
                1.0 + eps,
                None,
            );
            rep.push(
                "dual-below-optimum",
                val <= opt.cost + 1e-6 * opt.cost.max(1.0),
                val,
                opt.cost,
                None,
            );
        }
    }
    rep
}

/// Exhaustive cover verification at the declared parameters.
pub fn verify_cover(g: &WeightedGraph, cover: &SparseCover, max_clusterings: usize) -> VerificationReport {
    let mut rep = VerificationReport::default();
    let res = covers::validate_cover(g, cover);
    rep.push("cover-properties", res.is_ok(), 0.0, 0.0, None);
    if let Err(msg) = res {
        rep.push(&format!("cover-failure: {msg}"), false, 0.0, 0.0, None);
    }
    rep.push(
        "cover-clustering-count",
        cover.clusterings.len() <= max_clusterings,
        cover.clusterings.len() as f64,
        max_clusterings as f64,
        None,
    );
    rep
}

/// Rounded-tree verification: exact cost domination, spanning, label
/// consistency.
pub fn verify_rounding(
    g: &WeightedGraph,
    tree: &RoundedTree,
    b: &Demand,
) -> VerificationReport {
    let mut rep = VerificationReport::default();
    rep.push(
        "tree-cost-below-flow-cost",
        tree.tree_cost_scaled <= tree.flow_cost_scaled,
        tree.tree_cost_scaled as f64,
        tree.flow_cost_scaled as f64,
        None,
    );
    let mut spans = true;
    let mut witness = None;
    for v in 0..g.node_count() {
        if v != tree.root && b.values[v] != 0.0 && tree.label[v].is_none() {
            spans = false;
            witness = Some(v);
        }
    }
    rep.push("tree-spans-demand", spans, 0.0, 0.0, witness);
    let mut labels_ok = true;
    let mut lw = None;
    for v in 0..g.node_count() {
        if let Some(l) = tree.label[v] {
            match tree.tree_dist(g, v) {
                Some(d) if d <= l => {}
                other => {
                    labels_ok = false;
                    lw = Some(v);
                    let _ = other;
                }
            }
        }
    }
    rep.push("tree-labels-dominate", labels_ok, 0.0, 0.0, lw);
    let phases_ok = tree.phase_checks.iter().all(|c| c.all_ok());
    rep.push("phase-invariants", phases_ok, 0.0, 0.0, None);
    rep
}
