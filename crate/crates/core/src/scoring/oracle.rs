use super::{QaRef, ScoringError, SpecificityClassifier, SpecificityDistribution};
use crate::section::section_relationship;

/// Test classifier that reads the answer off the source section ids:
/// 0.98 on the true relation, 0.01 on the others.
#[derive(Debug, Clone, Copy, Default)]
pub struct HierarchyOracle;

impl SpecificityClassifier for HierarchyOracle {
    fn classify(
        &self,
        pairs: &[(QaRef<'_>, QaRef<'_>)],
    ) -> Result<Vec<SpecificityDistribution>, ScoringError> {
        pairs
            .iter()
            .enumerate()
            .map(|(index, (a, b))| match (a.section, b.section) {
                (Some(sa), Some(sb)) => Ok(SpecificityDistribution::peaked(section_relationship(sa, sb))),
                _ => Err(ScoringError::MissingSectionMetadata { index }),
            })
            .collect()
    }
}

/// Classifier with no information: every pair gets 1/3 on each label.
#[derive(Debug, Clone, Copy, Default)]
pub struct UniformClassifier;

impl SpecificityClassifier for UniformClassifier {
    fn classify(
        &self,
        pairs: &[(QaRef<'_>, QaRef<'_>)],
    ) -> Result<Vec<SpecificityDistribution>, ScoringError> {
        let third = 1.0 / 3.0;
        Ok(vec![
            SpecificityDistribution {
                general: third,
                specific: third,
                other: third,
            };
            pairs.len()
        ])
    }
}
