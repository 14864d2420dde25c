use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    QaRef, ScoringError, SpecificityClassifier, SpecificityDistribution, WIRE_DISTRIBUTION_TOLERANCE,
};

/// One line of a precomputed score file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecomputedScore {
    pub id_a: String,
    pub id_b: String,
    pub general: f64,
    pub specific: f64,
    pub other: f64,
}

/// Specificity scores computed offline and keyed by `(id_a, id_b)`.
///
/// A pair missing in one order is answered from the reverse entry with
/// `general` and `specific` exchanged.
#[derive(Debug, Clone, Default)]
pub struct PrecomputedScores {
    scores: HashMap<(String, String), SpecificityDistribution>,
}

impl PrecomputedScores {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ScoringError> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn from_reader(reader: impl BufRead) -> Result<Self, ScoringError> {
        let mut scores = HashMap::new();
        for (line_no, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: PrecomputedScore = serde_json::from_str(&line).map_err(|e| {
                ScoringError::InvalidDistribution(format!("line {}: {e}", line_no + 1))
            })?;
            let dist = SpecificityDistribution::checked(
                row.general,
                row.specific,
                row.other,
                WIRE_DISTRIBUTION_TOLERANCE,
            )?;
            scores.insert((row.id_a, row.id_b), dist);
        }
        Ok(Self { scores })
    }

    pub fn insert(&mut self, id_a: &str, id_b: &str, dist: SpecificityDistribution) {
        self.scores.insert((id_a.to_string(), id_b.to_string()), dist);
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    fn lookup(&self, a: &str, b: &str) -> Option<SpecificityDistribution> {
        self.scores
            .get(&(a.to_string(), b.to_string()))
            .copied()
            .or_else(|| {
                self.scores
                    .get(&(b.to_string(), a.to_string()))
                    .map(SpecificityDistribution::swapped)
            })
    }
}

impl SpecificityClassifier for PrecomputedScores {
    fn classify(
        &self,
        pairs: &[(QaRef<'_>, QaRef<'_>)],
    ) -> Result<Vec<SpecificityDistribution>, ScoringError> {
        pairs
            .iter()
            .map(|(a, b)| {
                self.lookup(a.id, b.id).ok_or_else(|| ScoringError::MissingScore {
                    id_a: a.id.to_string(),
                    id_b: b.id.to_string(),
                })
            })
            .collect()
    }
}
