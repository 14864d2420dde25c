use std::thread;

use super::{sorted_unique, GraphError, MergeRecord, QuestionNode};
use crate::scoring::{clamp_similarity, classify_specificity, ScoringError, SpecificityClassifier};

/// Clamped pairwise similarities, stored as the strict upper triangle.
struct SimilarityMatrix {
    rows: Vec<Vec<f64>>,
}

impl SimilarityMatrix {
    fn build(nodes: &[QuestionNode]) -> Result<Self, GraphError> {
        let embeddings = nodes
            .iter()
            .map(QuestionNode::embedding)
            .collect::<Result<Vec<_>, _>>()?;
        let n = embeddings.len();
        if let Some(bad) = embeddings.iter().position(|e| e.dim() != embeddings[0].dim()) {
            return Err(GraphError::Scoring {
                context: format!("similarity of ({}, {})", nodes[0].node_id, nodes[bad].node_id),
                source: ScoringError::DimensionMismatch {
                    left: embeddings[0].dim(),
                    right: embeddings[bad].dim(),
                },
            });
        }
        let workers = thread::available_parallelism().map_or(1, |p| p.get()).min(n.max(1));
        let computed: Vec<Vec<(usize, Vec<f64>)>> = thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let embeddings = &embeddings;
                    scope.spawn(move || {
                        (w..n)
                            .step_by(workers)
                            .map(|i| {
                                let row = (i + 1..n)
                                    .map(|j| {
                                        let dot: f64 = embeddings[i]
                                            .values()
                                            .iter()
                                            .zip(embeddings[j].values())
                                            .map(|(x, y)| x * y)
                                            .sum();
                                        clamp_similarity(dot.clamp(-1.0, 1.0))
                                    })
                                    .collect();
                                (i, row)
                            })
                            .collect()
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("similarity worker panicked"))
                .collect()
        });
        let mut rows = vec![Vec::new(); n];
        for (i, row) in computed.into_iter().flatten() {
            rows[i] = row;
        }
        Ok(Self { rows })
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        self.rows[lo][hi - lo - 1]
    }
}

/// Candidate merge `(similarity, lo, hi)`; higher similarity wins, ties go
/// to the lexicographically smaller id pair.
fn better(candidate: (f64, usize, usize), current: Option<(f64, usize, usize)>) -> bool {
    match current {
        None => true,
        Some((s, lo, hi)) => {
            candidate.0 > s || (candidate.0 == s && (candidate.1, candidate.2) < (lo, hi))
        }
    }
}

fn best_partner(sim: &SimilarityMatrix, active: &[bool], i: usize) -> Option<usize> {
    let mut best: Option<(f64, usize, usize)> = None;
    let mut partner = None;
    for j in (0..active.len()).filter(|&j| j != i && active[j]) {
        let candidate = (sim.get(i, j), i.min(j), i.max(j));
        if better(candidate, best) {
            best = Some(candidate);
            partner = Some(j);
        }
    }
    partner
}

/// True when `a` (the smaller id) survives a merge with `b`.
fn a_survives(a: &QuestionNode, b: &QuestionNode, general: f64, specific: f64) -> bool {
    if general != specific {
        return general > specific;
    }
    let depth = |n: &QuestionNode| n.section_id.as_ref().map_or(usize::MAX, |s| s.depth());
    depth(a) <= depth(b)
}

/// Greedily merges the most similar pair of live nodes until `target` remain.
///
/// The survivor of each merge is the question the classifier rates more
/// general; when it cannot tell, the node from the shallower section, then
/// the smaller id, survives. The survivor inherits the absorbed node and
/// everything that node had absorbed. Nodes are returned in id order along
/// with the merge log.
pub fn reduce_nodes(
    nodes: Vec<QuestionNode>,
    target: usize,
    classifier: &dyn SpecificityClassifier,
) -> Result<(Vec<QuestionNode>, Vec<MergeRecord>), GraphError> {
    let nodes = sorted_unique(nodes)?;
    let n = nodes.len();
    if target == 0 || target > n {
        return Err(GraphError::InvalidTarget {
            target,
            available: n,
        });
    }
    if target == n {
        return Ok((nodes, Vec::new()));
    }
    let sim = SimilarityMatrix::build(&nodes)?;
    let mut nodes: Vec<Option<QuestionNode>> = nodes.into_iter().map(Some).collect();
    let mut active = vec![true; n];
    let mut best: Vec<Option<usize>> = (0..n).map(|i| best_partner(&sim, &active, i)).collect();
    let mut log = Vec::with_capacity(n - target);

    for _ in target..n {
        let mut pick: Option<(f64, usize, usize)> = None;
        for i in (0..n).filter(|&i| active[i]) {
            if let Some(j) = best[i] {
                let candidate = (sim.get(i, j), i.min(j), i.max(j));
                if better(candidate, pick) {
                    pick = Some(candidate);
                }
            }
        }
        let (similarity, lo, hi) = pick.expect("at least two live nodes remain");
        let (a, b) = (nodes[lo].as_ref().unwrap(), nodes[hi].as_ref().unwrap());
        let dist = classify_specificity(a.as_ref(), b.as_ref(), classifier).map_err(|source| {
            GraphError::Scoring {
                context: format!("classifying merge pair ({}, {})", a.node_id, b.node_id),
                source,
            }
        })?;
        let (keep, drop) = if a_survives(a, b, dist.general, dist.specific) {
            (lo, hi)
        } else {
            (hi, lo)
        };
        let loser = nodes[drop].take().unwrap();
        active[drop] = false;
        let survivor = nodes[keep].as_mut().unwrap();
        log.push(MergeRecord {
            survivor: survivor.node_id.clone(),
            absorbed: loser.node_id.clone(),
            similarity,
            label: dist.label(),
        });
        survivor.absorbed.push(loser.node_id);
        survivor.absorbed.extend(loser.absorbed);

        for i in 0..n {
            if active[i] && (best[i] == Some(drop) || i == keep) {
                best[i] = best_partner(&sim, &active, i);
            }
        }
    }

    Ok((nodes.into_iter().flatten().collect(), log))
}
