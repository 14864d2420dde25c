use serde::{Deserialize, Serialize};

use super::{GraphError, QuestionGraph, UnionFind};

/// Shape of the subgraph left after dropping edges lighter than `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub tau: f64,
    pub n_nodes: usize,
    pub n_edges: usize,
    pub n_components: usize,
    /// Independent cycles, `|E| - |V| + components`.
    pub cycle_rank: usize,
    pub has_cycle: bool,
    /// `|E|` over the `|V|(|V|-1)/2` possible edges.
    pub density: f64,
    pub largest_component: usize,
}

/// Keeps edges with `weight >= tau` and describes what remains.
pub fn threshold_filter(
    graph: &QuestionGraph,
    tau: f64,
) -> Result<(QuestionGraph, ThresholdReport), GraphError> {
    if !tau.is_finite() {
        return Err(GraphError::OutOfRange { name: "tau", value: tau });
    }
    let endpoints = graph.edge_endpoints()?;
    let n = graph.nodes.len();
    let mut uf = UnionFind::new(n);
    let mut kept = Vec::new();
    for (edge, &(a, b)) in graph.edges.iter().zip(&endpoints) {
        if edge.weight >= tau {
            uf.union(a, b);
            kept.push(edge.clone());
        }
    }
    let groups = uf.groups();
    let possible = n * n.saturating_sub(1) / 2;
    let cycle_rank = kept.len() + groups.len() - n;
    let report = ThresholdReport {
        tau,
        n_nodes: n,
        n_edges: kept.len(),
        n_components: groups.len(),
        cycle_rank,
        has_cycle: cycle_rank > 0,
        density: if possible == 0 {
            0.0
        } else {
            kept.len() as f64 / possible as f64
        },
        largest_component: groups.iter().map(Vec::len).max().unwrap_or(0),
    };
    let subgraph = QuestionGraph {
        lambda: graph.lambda,
        nodes: graph.nodes.clone(),
        edges: kept,
        merge_log: graph.merge_log.clone(),
    };
    Ok((subgraph, report))
}
