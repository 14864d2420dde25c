use super::{GraphError, QuestionGraph, UnionFind};

/// Kruskal's algorithm on negated weights: the indices of `edges` forming a
/// maximum-weight spanning tree, in selection order. Equal weights are taken
/// in order of `key`. Fails with the connected components (node indices)
/// when no spanning tree exists.
pub fn kruskal_max<K: Ord>(
    n: usize,
    edges: &[(usize, usize, f64)],
    key: impl Fn(usize) -> K,
) -> Result<Vec<usize>, Vec<Vec<usize>>> {
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by(|&x, &y| {
        let (wx, wy) = (-edges[x].2, -edges[y].2);
        wx.total_cmp(&wy).then_with(|| key(x).cmp(&key(y))).then(x.cmp(&y))
    });
    let mut uf = UnionFind::new(n);
    let mut chosen = Vec::with_capacity(n.saturating_sub(1));
    for e in order {
        let (a, b, _) = edges[e];
        if uf.union(a, b) {
            chosen.push(e);
            if chosen.len() + 1 == n {
                break;
            }
        }
    }
    if uf.count() > 1 {
        return Err(uf.groups());
    }
    Ok(chosen)
}

/// Prunes `graph` to its maximum spanning tree. Node data and the merge log
/// are kept; edges come back sorted by endpoint ids.
pub fn max_spanning_tree(graph: &QuestionGraph) -> Result<QuestionGraph, GraphError> {
    if graph.nodes.is_empty() {
        return Err(GraphError::TooFewNodes { needed: 1, got: 0 });
    }
    let endpoints = graph.edge_endpoints()?;
    let mut weighted = Vec::with_capacity(endpoints.len());
    for (e, &(a, b)) in graph.edges.iter().zip(&endpoints) {
        if !e.weight.is_finite() {
            return Err(GraphError::OutOfRange {
                name: "weight",
                value: e.weight,
            });
        }
        weighted.push((a, b, e.weight));
    }
    let key = |i: usize| {
        let e = &graph.edges[i];
        if e.a <= e.b {
            (e.a.as_str(), e.b.as_str())
        } else {
            (e.b.as_str(), e.a.as_str())
        }
    };
    let chosen = kruskal_max(graph.nodes.len(), &weighted, key).map_err(|groups| {
        GraphError::Disconnected(
            groups
                .into_iter()
                .map(|g| g.into_iter().map(|i| graph.nodes[i].node_id.clone()).collect())
                .collect(),
        )
    })?;
    let mut edges: Vec<_> = chosen.into_iter().map(|i| graph.edges[i].clone()).collect();
    edges.sort_by(|x, y| (&x.a, &x.b).cmp(&(&y.a, &y.b)));
    Ok(QuestionGraph {
        lambda: graph.lambda,
        nodes: graph.nodes.clone(),
        edges,
        merge_log: graph.merge_log.clone(),
    })
}
