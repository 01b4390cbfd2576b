//! Command-line front end: approximate shortest-path forests, approximate
//! minimum transshipment, sparse covers, oblivious routing, flow rounding,
//! Eulerian orientation, and output verification.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use transship_core::covers::{self, CoverParams, ExactForestOracle};
use transship_core::driver::{self, DriverParams};
use transship_core::euler;
use transship_core::exact;
use transship_core::graph::{flow_cost, NodeId};
use transship_core::io::{self, ClusterJson, ClusteringJson, CoverJson, FlowJson, TreeJson};
use transship_core::minor_agg::RoundLedger;
use transship_core::rounding;
use transship_core::routing;
use transship_core::verify;

#[derive(Parser)]
#[command(name = "transship-kit", version, about = "Approximate shortest paths and minimum transshipment on undirected graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Parameter preset.
    #[arg(long, global = true, value_enum, default_value_t = PresetArg::Desk)]
    preset: PresetArg,
    /// Seed for instance generation utilities (the algorithms themselves are
    /// deterministic).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the round-accounting report to this JSON file.
    #[arg(long, global = true)]
    rounds_report: Option<PathBuf>,
    /// Abort when a simulated message exceeds the size bound.
    #[arg(long, global = true)]
    strict_model: bool,
    /// Simulated message-size bound in bits.
    #[arg(long, global = true, default_value_t = 4096)]
    message_bound: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Paper,
    Desk,
}

#[derive(Subcommand)]
enum Command {
    /// Approximate shortest-path forest from a source set.
    Sssp(SsspArgs),
    /// Certified approximate minimum transshipment.
    Transship(TransshipArgs),
    /// Sparse neighborhood cover of a graph.
    Cover(CoverArgs),
    /// Route a demand through the cluster-hierarchy routing operator.
    Route(RouteArgs),
    /// Round a single-source fractional flow into a distance-labeled tree.
    RoundFlow(RoundFlowArgs),
    /// Orient an even-degree graph so in-degree equals out-degree.
    EulerOrient(EulerArgs),
    /// Re-verify an artifact against the exact oracles.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct SsspArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Source nodes (repeatable).
    #[arg(long, required = true)]
    source: Vec<NodeId>,
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run the exhaustive oracle post-checks during the computation.
    #[arg(long)]
    debug_checks: bool,
}

#[derive(Args)]
struct TransshipArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    demand: PathBuf,
    #[arg(long, default_value_t = 0.25)]
    eps: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CoverArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Cover scale D.
    #[arg(long)]
    scale: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RouteArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    demand: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the competitive ratio against the exact optimum.
    #[arg(long)]
    report_ratio: bool,
}

#[derive(Args)]
struct RoundFlowArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Flow JSON (signed values on canonical edge ids).
    #[arg(long)]
    flow: PathBuf,
    #[arg(long)]
    source: NodeId,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print per-phase invariant checks.
    #[arg(long)]
    verbose: bool,
}

#[derive(Args)]
struct EulerArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    graph: PathBuf,
    /// What to verify the artifact as.
    #[arg(long, value_enum)]
    against: VerifyKind,
    /// Input demand (transship) or sources as a demand-style file (sssp).
    #[arg(long)]
    input: Option<PathBuf>,
    /// The artifact to verify (JSON produced by this tool).
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    eps: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyKind {
    Sssp,
    Transship,
    Cover,
    Round,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}

fn driver_params(preset: PresetArg, n: usize, debug_checks: bool) -> DriverParams {
    let mut p = match preset {
        PresetArg::Paper => DriverParams::paper(n),
        PresetArg::Desk => DriverParams::desk(n),
    };
    p.debug_checks = debug_checks;
    p
}

fn run(cli: Cli) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let mut ledger = RoundLedger::new();
    let code = match &cli.command {
        Command::Sssp(a) => {
            let g = io::read_graph(&a.graph)?;
            let params = driver_params(cli.preset, g.node_count(), a.debug_checks);
            let sol = driver::solve_sssp(&g, &a.source, a.eps, &params, &mut ledger)?;
            let rep = verify::verify_sssp(&g, &a.source, &sol, a.eps);
            let tree = TreeJson {
                root: a.source[0],
                parents: (0..g.node_count())
                    .filter_map(|v| sol.parent[v].map(|(p, e)| (v, p, e)))
                    .collect(),
                labels: (0..g.node_count())
                    .filter_map(|v| sol.parent[v].map(|_| sol.label[v].unwrap_or(f64::NAN)))
                    .collect(),
            };
            if let Some(out) = &a.out {
                io::write_json(out, &tree)?;
            }
            println!("{}", serde_json::to_string_pretty(&rep)?);
            ExitCode::from(rep.exit_code() as u8)
        }
        Command::Transship(a) => {
            let g = io::read_graph(&a.graph)?;
            let b = io::read_demand(&a.demand, g.node_count())?;
            let params = driver_params(cli.preset, g.node_count(), false);
            let (pair, _stats) =
                driver::solve_transshipment(&g, &b, a.eps, &params, &mut ledger)?;
            let rep = verify::verify_transshipment(&g, &b, &pair.flow, &pair.potential, a.eps);
            if let Some(out) = &a.out {
                io::write_json(
                    out,
                    &serde_json::json!({
                        "flow": FlowJson::from_flow(&pair.flow),
                        "potential": pair.potential.values,
                        "cost": flow_cost(&pair.flow, &g),
                    }),
                )?;
            }
            println!("{}", serde_json::to_string_pretty(&rep)?);
            ExitCode::from(rep.exit_code() as u8)
        }
        Command::Cover(a) => {
            let g = io::read_graph(&a.graph)?;
            let kind = match cli.preset {
                PresetArg::Paper => covers::PresetKind::Paper,
                PresetArg::Desk => covers::PresetKind::Desk,
            };
            let params = CoverParams::for_preset(kind, g.node_count());
            let cover =
                covers::sparse_cover(&g, a.scale, &mut ExactForestOracle, &params, &mut ledger)?;
            let rep = verify::verify_cover(&g, &cover, params.sparse_rounds);
            if let Some(out) = &a.out {
                let json = CoverJson {
                    covering_radius: cover.covering_radius,
                    scale: cover.scale,
                    clusterings: cover
                        .clusterings
                        .iter()
                        .map(|cl| ClusteringJson {
                            separation: cl.separation,
                            clusters: cl
                                .clusters
                                .iter()
                                .map(|c| ClusterJson {
                                    center: c.center,
                                    members: c.members.clone(),
                                    tree: c
                                        .tree
                                        .parents
                                        .iter()
                                        .map(|(&v, &(p, e))| (v, p, e))
                                        .collect(),
                                })
                                .collect(),
                        })
                        .collect(),
                };
                io::write_json(out, &json)?;
            }
            println!("{}", serde_json::to_string_pretty(&rep)?);
            ExitCode::from(rep.exit_code() as u8)
        }
        Command::Route(a) => {
            let g = io::read_graph(&a.graph)?;
            let b = io::read_demand(&a.demand, g.node_count())?;
            let n = g.node_count();
            let tau = 4.0 * (n.max(2) as f64).log2().ceil();
            let beta = 8.0 * tau;
            let ladder = routing::synthetic_ladder(&g, tau, beta, &mut ledger)?;
            let op = routing::build_router_whole_graph(&g, &ladder, tau, beta, &mut ledger)?;
            let flow = op.apply_r(&b, &mut ledger)?;
            let cost = flow_cost(&flow, &g);
            if let Some(out) = &a.out {
                io::write_json(out, &FlowJson::from_flow(&flow))?;
            }
            let mut report = serde_json::json!({ "routed_cost": cost });
            if a.report_ratio && n <= exact::EXACT_TRANSSHIPMENT_CAP {
                let opt = exact::exact_transshipment(&g, &b)?;
                report["optimal_cost"] = opt.cost.into();
                report["ratio"] = (if opt.cost > 0.0 { cost / opt.cost } else { 1.0 }).into();
            }
            println!("{}", serde_json::to_string_pretty(&report)?);
            ExitCode::SUCCESS
        }
        Command::RoundFlow(a) => {
            let g = io::read_graph(&a.graph)?;
            let fj: FlowJson = io::read_json(&a.flow)?;
            let flow = fj.to_flow();
            let tree = rounding::round_flow(&g, &flow, a.source, &mut ledger)?;
            if a.verbose {
                for (i, c) in tree.phase_checks.iter().enumerate() {
                    println!("phase {i}: {c:?}");
                }
            }
            let b = transship_core::graph::demand_of_flow(&flow, &g);
            let rep = verify::verify_rounding(&g, &tree, &b);
            if let Some(out) = &a.out {
                let json = TreeJson {
                    root: tree.root,
                    parents: (0..g.node_count())
                        .filter_map(|v| tree.parent[v].map(|(p, e)| (v, p, e)))
                        .collect(),
                    labels: (0..g.node_count())
                        .filter_map(|v| tree.parent[v].map(|_| tree.label[v].unwrap_or(0) as f64))
                        .collect(),
                };
                io::write_json(out, &json)?;
            }
            println!("{}", serde_json::to_string_pretty(&rep)?);
            ExitCode::from(rep.exit_code() as u8)
        }
        Command::EulerOrient(a) => {
            let g = io::read_graph(&a.graph)?;
            let o = euler::orient(&g, &mut ledger)?;
            let directed: Vec<(NodeId, NodeId)> = (0..g.edge_count())
                .map(|e| {
                    let edge = g.edge(e);
                    if o.forward[e] {
                        (edge.u, edge.v)
                    } else {
                        (edge.v, edge.u)
                    }
                })
                .collect();
            if let Some(out) = &a.out {
                io::write_json(out, &directed)?;
            } else {
                for (u, v) in &directed {
                    println!("{u} {v}");
                }
            }
            ExitCode::SUCCESS
        }
        Command::Verify(a) => {
            let g = io::read_graph(&a.graph)?;
            let rep = match a.against {
                VerifyKind::Sssp => {
                    let tree: TreeJson = io::read_json(&a.output)?;
                    let sources = match &a.input {
                        Some(p) => {
                            let d = io::read_demand(p, g.node_count())?;
                            (0..g.node_count()).filter(|&v| d.values[v] != 0.0).collect()
                        }
                        None => vec![tree.root],
                    };
                    let mut sol = driver::SsspSolution {
                        parent: vec![None; g.node_count()],
                        label: vec![None; g.node_count()],
                        potential: vec![0.0; g.node_count()],
                        stats: Default::default(),
                    };
                    for &s in &sources {
                        sol.label[s] = Some(0.0);
                    }
                    for ((v, p, e), l) in tree.parents.iter().zip(&tree.labels) {
                        sol.parent[*v] = Some((*p, *e));
                        sol.label[*v] = Some(*l);
                    }
                    verify::verify_sssp(&g, &sources, &sol, a.eps)
                }
                VerifyKind::Transship => {
                    let artifact: serde_json::Value = io::read_json(&a.output)?;
                    let fj: FlowJson = serde_json::from_value(artifact["flow"].clone())?;
                    let flow = fj.to_flow();
                    let potential = transship_core::graph::Potential {
                        values: serde_json::from_value(artifact["potential"].clone())?,
                    };
                    let input = a
                        .input
                        .as_ref()
                        .ok_or("verify transship requires --input demand")?;
                    let b = io::read_demand(input, g.node_count())?;
                    verify::verify_transshipment(&g, &b, &flow, &potential, a.eps)
                }
                VerifyKind::Cover => {
                    let json: CoverJson = io::read_json(&a.output)?;
                    let cover = covers::SparseCover {
                        covering_radius: json.covering_radius,
                        scale: json.scale,
                        tree_diameter_bound: json.scale,
                        clusterings: json
                            .clusterings
                            .iter()
                            .map(|cl| covers::Clustering {
                                separation: cl.separation,
                                radius_bound: json.scale / 2.0,
                                strong: false,
                                clusters: cl
                                    .clusters
                                    .iter()
                                    .map(|c| covers::Cluster {
                                        members: c.members.clone(),
                                        center: c.center,
                                        id_code: c.center as u64,
                                        tree: covers::ClusterTree {
                                            root: c.center,
                                            parents: c
                                                .tree
                                                .iter()
                                                .map(|&(v, p, e)| (v, (p, e)))
                                                .collect(),
                                        },
                                        forest_history: Vec::new(),
                                    })
                                    .collect(),
                            })
                            .collect(),
                    };
                    verify::verify_cover(&g, &cover, usize::MAX)
                }
                VerifyKind::Round => {
                    let tree: TreeJson = io::read_json(&a.output)?;
                    let input = a
                        .input
                        .as_ref()
                        .ok_or("verify round requires --input flow json")?;
                    let fj: FlowJson = io::read_json(input)?;
                    let flow = fj.to_flow();
                    let rounded = rounding::round_flow(&g, &flow, tree.root, &mut ledger)?;
                    let b = transship_core::graph::demand_of_flow(&flow, &g);
                    verify::verify_rounding(&g, &rounded, &b)
                }
            };
            println!("{}", serde_json::to_string_pretty(&rep)?);
            ExitCode::from(rep.exit_code() as u8)
        }
    };
    if let Some(path) = &cli.rounds_report {
        std::fs::write(path, serde_json::to_string_pretty(&ledger.report())?)?;
    }
    if cli.strict_model && ledger.message_warnings > 0 {
        eprintln!(
            "error: {} simulated messages exceeded the {}-bit bound",
            ledger.message_warnings, cli.message_bound
        );
        return Ok(ExitCode::from(3));
    }
    Ok(code)
}

