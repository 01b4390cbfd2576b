//! Text and JSON file formats: graphs, demands, flows, trees, covers, and
//! round reports.
//!
//! Graph file (text): first line `n m scale`, then m lines `u v length` with
//! lengths in scaled integer units; 0-indexed; `#` starts a comment.
//! Demand file: lines `v value`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Demand, EdgeId, Flow, NodeId, WeightedGraph};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("graph error: {0}")]
    Graph(#[from] crate::graph::GraphError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

pub fn parse_graph(text: &str) -> Result<WeightedGraph, IoError> {
    let mut header: Option<(usize, usize, u32)> = None;
    let mut edges: Vec<(NodeId, NodeId, i64)> = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parse = |s: &str, what: &str| -> Result<i64, IoError> {
            s.parse::<i64>().map_err(|_| IoError::Parse {
                line: no + 1,
                msg: format!("bad {what}: {s:?}"),
            })
        };
        if header.is_none() {
            if fields.len() != 3 {
                return Err(IoError::Parse {
                    line: no + 1,
                    msg: "expected header `n m scale`".into(),
                });
            }
            header = Some((
                parse(fields[0], "node count")? as usize,
                parse(fields[1], "edge count")? as usize,
                parse(fields[2], "scale")? as u32,
            ));
        } else {
            if fields.len() != 3 {
                return Err(IoError::Parse {
                    line: no + 1,
                    msg: "expected edge `u v length`".into(),
                });
            }
            edges.push((
                parse(fields[0], "endpoint")? as usize,
                parse(fields[1], "endpoint")? as usize,
                parse(fields[2], "length")?,
            ));
        }
    }
    let Some((n, m, scale)) = header else {
        return Err(IoError::Parse { line: 0, msg: "empty graph file".into() });
    };
    if edges.len() != m {
        return Err(IoError::Parse {
            line: 0,
            msg: format!("header declares {m} edges, found {}", edges.len()),
        });
    }
    Ok(WeightedGraph::new(n, edges, scale)?)
}

pub fn read_graph(path: &Path) -> Result<WeightedGraph, IoError> {
    parse_graph(&std::fs::read_to_string(path)?)
}

pub fn format_graph(g: &WeightedGraph) -> String {
    let mut out = format!("{} {} {}\n", g.node_count(), g.edge_count(), g.scale_exp());
    for e in g.edges() {
        out.push_str(&format!("{} {} {}\n", e.u, e.v, e.length));
    }
    out
}

pub fn write_graph(path: &Path, g: &WeightedGraph) -> Result<(), IoError> {
    Ok(std::fs::write(path, format_graph(g))?)
}

pub fn parse_demand(text: &str, n: usize) -> Result<Demand, IoError> {
    let mut b = vec![0.0; n];
    for (no, raw) in text.lines().enumerate() {
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(IoError::Parse { line: no + 1, msg: "expected `v value`".into() });
        }
        let v: usize = fields[0]
            .parse()
            .map_err(|_| IoError::Parse { line: no + 1, msg: format!("bad node {:?}", fields[0]) })?;
        let x: f64 = fields[1]
            .parse()
            .map_err(|_| IoError::Parse { line: no + 1, msg: format!("bad value {:?}", fields[1]) })?;
        if v >= n {
            return Err(IoError::Parse {
                line: no + 1,
                msg: format!("node {v} out of range (n = {n})"),
            });
        }
        b[v] += x;
    }
    Ok(Demand { values: b })
}

pub fn read_demand(path: &Path, n: usize) -> Result<Demand, IoError> {
    parse_demand(&std::fs::read_to_string(path)?, n)
}

/// JSON flow artifact: signed values on canonical edge ids.
#[derive(Debug, Serialize, Deserialize)]
pub struct FlowJson {
    pub edge_count: usize,
    pub values: Vec<f64>,
}

impl FlowJson {
    pub fn from_flow(f: &Flow) -> Self {
        FlowJson { edge_count: f.values.len(), values: f.values.clone() }
    }
    pub fn to_flow(&self) -> Flow {
        Flow { values: self.values.clone() }
    }
}

/// JSON tree artifact: parent pointers plus distance labels from the root.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeJson {
    pub root: NodeId,
    /// (node, parent, edge id) triples for every non-root tree node.
    pub parents: Vec<(NodeId, NodeId, EdgeId)>,
    /// Distance label per tree node (same order as `parents`, root excluded).
    pub labels: Vec<f64>,
}

/// JSON cover artifact.
#[derive(Debug, Serialize, Deserialize)]
pub struct CoverJson {
    pub covering_radius: f64,
    pub scale: f64,
    pub clusterings: Vec<ClusteringJson>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ClusteringJson {
    pub separation: f64,
    pub clusters: Vec<ClusterJson>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ClusterJson {
    pub center: NodeId,
    pub members: Vec<NodeId>,
    /// (child, parent, edge id) triples of the cluster tree.
    pub tree: Vec<(NodeId, NodeId, EdgeId)>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    Ok(std::fs::write(path, serde_json::to_string_pretty(value)?)?)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
