use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Direction, GraphError, QuestionGraph};

/// How a path step relates to the next one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathLink {
    /// The next question is more specific.
    Narrower,
    /// The next question is more general.
    Broader,
    Unoriented,
}

impl PathLink {
    pub fn arrow(self) -> &'static str {
        match self {
            PathLink::Narrower => "->",
            PathLink::Broader => "<-",
            PathLink::Unoriented => "--",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathStep {
    pub node_id: String,
    pub question: String,
    /// Link to the following step; `None` on the last one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub link: Option<PathLink>,
}

struct Adjacency {
    /// Neighbour index and the direction of the joining edge as seen from this node.
    lists: Vec<Vec<(usize, PathLink)>>,
}

impl Adjacency {
    fn of_tree(tree: &QuestionGraph) -> Result<Self, GraphError> {
        if !tree.is_spanning_tree()? {
            return Err(GraphError::NotATree(format!(
                "{} nodes, {} edges",
                tree.nodes.len(),
                tree.edges.len()
            )));
        }
        let mut lists = vec![Vec::new(); tree.nodes.len()];
        for (edge, (a, b)) in tree.edges.iter().zip(tree.edge_endpoints()?) {
            let (from_a, from_b) = match edge.direction {
                Direction::AToB => (PathLink::Narrower, PathLink::Broader),
                Direction::BToA => (PathLink::Broader, PathLink::Narrower),
                Direction::Undirected => (PathLink::Unoriented, PathLink::Unoriented),
            };
            lists[a].push((b, from_a));
            lists[b].push((a, from_b));
        }
        for l in &mut lists {
            l.sort_by_key(|&(v, _)| v);
        }
        Ok(Self { lists })
    }

    /// Hop distances and BFS parents from `root`.
    fn bfs(&self, root: usize) -> (Vec<usize>, Vec<usize>) {
        let n = self.lists.len();
        let mut dist = vec![usize::MAX; n];
        let mut parent = vec![usize::MAX; n];
        dist[root] = 0;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &self.lists[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        (dist, parent)
    }
}

/// Number of nodes on the longest simple path of `tree`.
pub fn tree_diameter(tree: &QuestionGraph) -> Result<usize, GraphError> {
    let adj = Adjacency::of_tree(tree)?;
    if tree.nodes.is_empty() {
        return Ok(0);
    }
    let (d0, _) = adj.bfs(0);
    let far = (0..d0.len()).max_by_key(|&v| (d0[v], std::cmp::Reverse(v))).unwrap();
    let (d1, _) = adj.bfs(far);
    Ok(d1.into_iter().max().unwrap() + 1)
}

/// Picks a simple path of `k` nodes uniformly at random among all such paths
/// in `tree`, in a uniformly random orientation.
pub fn sample_path(tree: &QuestionGraph, k: usize, seed: u64) -> Result<Vec<PathStep>, GraphError> {
    if k < 2 {
        return Err(GraphError::PathTooShort(k));
    }
    let adj = Adjacency::of_tree(tree)?;
    let n = tree.nodes.len();
    let mut endpoints = Vec::new();
    let mut diameter = 0;
    for u in 0..n {
        let (dist, _) = adj.bfs(u);
        for (v, &d) in dist.iter().enumerate().skip(u + 1) {
            diameter = diameter.max(d + 1);
            if d + 1 == k {
                endpoints.push((u, v));
            }
        }
    }
    if endpoints.is_empty() {
        return Err(GraphError::PathTooLong {
            requested: k,
            diameter: diameter.max(n.min(1)),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut u, mut v) = endpoints[rng.gen_range(0..endpoints.len())];
    if rng.gen_bool(0.5) {
        std::mem::swap(&mut u, &mut v);
    }

    // Walk parents from v back to the root u, then reverse.
    let (_, parent) = adj.bfs(u);
    let mut order = vec![v];
    while *order.last().unwrap() != u {
        order.push(parent[*order.last().unwrap()]);
    }
    order.reverse();

    Ok(order
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let link = order.get(i + 1).map(|&next| {
                adj.lists[x]
                    .iter()
                    .find(|&&(y, _)| y == next)
                    .map(|&(_, l)| l)
                    .expect("consecutive path nodes are adjacent")
            });
            PathStep {
                node_id: tree.nodes[x].node_id.clone(),
                question: tree.nodes[x].question.clone(),
                link,
            }
        })
        .collect())
}
