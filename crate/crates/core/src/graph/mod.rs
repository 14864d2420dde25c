//! The question graph: node merging, the complete weighted graph, threshold
//! diagnostics, maximum spanning tree pruning, path sampling and export.

mod export;
mod merge;
mod mst;
mod path;
mod threshold;
mod union_find;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scoring::{
    clamp_similarity, specificity_confidence, Embedding, QaRef, ScoringError, SpecificityClassifier,
};
use crate::section::{Relation, SectionId};

pub use export::{embeddings_jsonl, export_graph, from_json, to_dot, to_graphml, to_json, ExportFormat};
pub use merge::reduce_nodes;
pub use mst::{kruskal_max, max_spanning_tree};
pub use path::{sample_path, tree_diameter, PathLink, PathStep};
pub use threshold::{threshold_filter, ThresholdReport};
pub use union_find::UnionFind;

pub const DEFAULT_LAMBDA: f64 = 0.3;
pub const DEFAULT_TAU: f64 = 0.7;
pub const DEFAULT_TARGET_NODES: usize = 300;

/// Pairs sent to the classifier per call while building the complete graph.
const CLASSIFY_BATCH: usize = 1024;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("{name} = {value} is outside [0, 1]")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("target of {target} nodes is not in 1..={available}")]
    InvalidTarget { target: usize, available: usize },
    #[error("node {0} has no embedding")]
    MissingEmbedding(String),
    #[error("duplicate node id {0}")]
    DuplicateNode(String),
    #[error("edge refers to unknown node {0}")]
    UnknownNode(String),
    #[error("need at least {needed} nodes, got {got}")]
    TooFewNodes { needed: usize, got: usize },
    #[error("graph is disconnected into {} components: {}", .0.len(), format_components(.0))]
    Disconnected(Vec<Vec<String>>),
    #[error("graph is not a tree: {0}")]
    NotATree(String),
    #[error("path length must be at least 2, got {0}")]
    PathTooShort(usize),
    #[error("no path with {requested} nodes: the tree diameter spans {diameter} nodes")]
    PathTooLong { requested: usize, diameter: usize },
    #[error("unknown export format `{0}` (expected dot, graphml or json)")]
    UnknownFormat(String),
    #[error("{context}")]
    Scoring {
        context: String,
        #[source]
        source: ScoringError,
    },
    #[error("invalid graph json")]
    Json(#[from] serde_json::Error),
}

fn format_components(components: &[Vec<String>]) -> String {
    components
        .iter()
        .map(|c| format!("[{}]", c.join(", ")))
        .collect::<Vec<_>>()
        .join(" ")
}

/// A generated question bound to the chunk it was generated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionNode {
    pub node_id: String,
    pub question: String,
    pub context: String,
    pub chunk_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub section_id: Option<SectionId>,
    /// Ids of nodes merged into this one, in merge order.
    #[serde(default)]
    pub absorbed: Vec<String>,
    #[serde(skip)]
    pub embedding: Option<Embedding>,
}

impl QuestionNode {
    pub fn as_ref(&self) -> QaRef<'_> {
        QaRef {
            id: &self.node_id,
            question: &self.question,
            context: &self.context,
            section: self.section_id.as_ref(),
        }
    }

    fn embedding(&self) -> Result<&Embedding, GraphError> {
        self.embedding
            .as_ref()
            .ok_or_else(|| GraphError::MissingEmbedding(self.node_id.clone()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// `a` is the more general question.
    AToB,
    BToA,
    Undirected,
}

impl Direction {
    pub fn from_relation(label: Relation) -> Self {
        match label {
            Relation::General => Direction::AToB,
            Relation::Specific => Direction::BToA,
            Relation::Other => Direction::Undirected,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedEdge {
    pub a: String,
    pub b: String,
    pub eta: f64,
    pub xi: f64,
    pub weight: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeRecord {
    pub survivor: String,
    pub absorbed: String,
    pub similarity: f64,
    pub label: Relation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionGraph {
    pub lambda: f64,
    pub nodes: Vec<QuestionNode>,
    pub edges: Vec<WeightedEdge>,
    #[serde(default)]
    pub merge_log: Vec<MergeRecord>,
}

impl QuestionGraph {
    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.node_id == id)
    }

    /// Index pairs for every edge, checking that endpoints exist.
    pub(crate) fn edge_endpoints(&self) -> Result<Vec<(usize, usize)>, GraphError> {
        let index: std::collections::HashMap<&str, usize> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.node_id.as_str(), i))
            .collect();
        self.edges
            .iter()
            .map(|e| {
                let a = *index.get(e.a.as_str()).ok_or_else(|| GraphError::UnknownNode(e.a.clone()))?;
                let b = *index.get(e.b.as_str()).ok_or_else(|| GraphError::UnknownNode(e.b.clone()))?;
                Ok((a, b))
            })
            .collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Connected components of the undirected graph, as sorted node id lists.
    pub fn components(&self) -> Result<Vec<Vec<String>>, GraphError> {
        let mut uf = UnionFind::new(self.nodes.len());
        for (a, b) in self.edge_endpoints()? {
            uf.union(a, b);
        }
        Ok(uf
            .groups()
            .into_iter()
            .map(|g| g.into_iter().map(|i| self.nodes[i].node_id.clone()).collect())
            .collect())
    }

    /// True when the graph is connected, acyclic and has `|V| - 1` edges.
    pub fn is_spanning_tree(&self) -> Result<bool, GraphError> {
        if self.nodes.is_empty() {
            return Ok(self.edges.is_empty());
        }
        if self.edges.len() != self.nodes.len() - 1 {
            return Ok(false);
        }
        let mut uf = UnionFind::new(self.nodes.len());
        for (a, b) in self.edge_endpoints()? {
            if !uf.union(a, b) {
                return Ok(false);
            }
        }
        Ok(uf.count() == 1)
    }
}

fn check_unit(name: &'static str, value: f64) -> Result<(), GraphError> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(GraphError::OutOfRange { name, value })
    }
}

/// `w = lambda * eta + (1 - lambda) * xi`.
pub fn edge_weight(eta: f64, xi: f64, lambda: f64) -> Result<f64, GraphError> {
    check_unit("eta", eta)?;
    check_unit("xi", xi)?;
    check_unit("lambda", lambda)?;
    Ok(lambda * eta + (1.0 - lambda) * xi)
}

pub(crate) fn sorted_unique(mut nodes: Vec<QuestionNode>) -> Result<Vec<QuestionNode>, GraphError> {
    nodes.sort_by(|a, b| a.node_id.cmp(&b.node_id));
    let mut seen = HashSet::new();
    for n in &nodes {
        if !seen.insert(n.node_id.as_str()) {
            return Err(GraphError::DuplicateNode(n.node_id.clone()));
        }
    }
    Ok(nodes)
}

/// Connects every pair of nodes. `eta` comes from the classifier, `xi` from
/// the node embeddings; the edge points from the more general question when
/// the classifier's top label is `general` or `specific` and is undirected
/// otherwise. Nodes are ordered by id and each edge has `a < b`.
pub fn build_weighted_graph(
    nodes: Vec<QuestionNode>,
    classifier: &dyn SpecificityClassifier,
    lambda: f64,
    merge_log: Vec<MergeRecord>,
) -> Result<QuestionGraph, GraphError> {
    check_unit("lambda", lambda)?;
    let nodes = sorted_unique(nodes)?;
    if nodes.len() < 2 {
        return Err(GraphError::TooFewNodes {
            needed: 2,
            got: nodes.len(),
        });
    }
    let embeddings = nodes
        .iter()
        .map(QuestionNode::embedding)
        .collect::<Result<Vec<_>, _>>()?;

    let index_pairs: Vec<(usize, usize)> = (0..nodes.len())
        .flat_map(|i| (i + 1..nodes.len()).map(move |j| (i, j)))
        .collect();

    let mut edges = Vec::with_capacity(index_pairs.len());
    for batch in index_pairs.chunks(CLASSIFY_BATCH) {
        let refs: Vec<_> = batch
            .iter()
            .map(|&(i, j)| (nodes[i].as_ref(), nodes[j].as_ref()))
            .collect();
        let dists = classifier.classify(&refs).map_err(|source| {
            let (i, j) = match source {
                ScoringError::MissingSectionMetadata { index } if index < batch.len() => batch[index],
                _ => batch[0],
            };
            GraphError::Scoring {
                context: format!(
                    "classifying pair ({}, {})",
                    nodes[i].node_id, nodes[j].node_id
                ),
                source,
            }
        })?;
        if dists.len() != batch.len() {
            return Err(GraphError::Scoring {
                context: "classifying pairs".into(),
                source: ScoringError::LengthMismatch {
                    expected: batch.len(),
                    got: dists.len(),
                },
            });
        }
        for (&(i, j), dist) in batch.iter().zip(dists) {
            let cosine = embeddings[i].cosine(embeddings[j]).map_err(|source| GraphError::Scoring {
                context: format!("similarity of ({}, {})", nodes[i].node_id, nodes[j].node_id),
                source,
            })?;
            let xi = clamp_similarity(cosine);
            let eta = specificity_confidence(&dist);
            edges.push(WeightedEdge {
                a: nodes[i].node_id.clone(),
                b: nodes[j].node_id.clone(),
                eta,
                xi,
                weight: edge_weight(eta, xi, lambda)?,
                direction: Direction::from_relation(dist.label()),
            });
        }
    }

    Ok(QuestionGraph {
        lambda,
        nodes,
        edges,
        merge_log,
    })
}
