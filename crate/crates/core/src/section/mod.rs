//! Textbook structure: section ids, the heading outline, section relationships
//! and section-confined chunking.

mod chunk;
mod id;
mod outline;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chunk::{chunk_sections, split_paragraphs, Chunk, ChunkingConfig, Paragraph};
pub use id::{SectionId, MAX_DEPTH, MAX_SEGMENT};
pub use outline::{parse_outline, Outline, OutlineWarning, SectionNode};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SectionError {
    #[error("section path is empty")]
    EmptyPath,
    #[error("section path has depth {depth}, at most {} levels fit in a section code", MAX_DEPTH)]
    TooDeep { depth: usize },
    #[error("segment {position} has value {value}, expected 1..=99")]
    SegmentOutOfRange { position: usize, value: u32 },
    #[error("malformed section code `{code}`: {reason}")]
    MalformedCode { code: String, reason: String },
    #[error(
        "malformed section code `{code}`: segment {position} is zero but segment {next_nonzero} is not"
    )]
    InteriorZero {
        code: String,
        position: usize,
        next_nonzero: usize,
    },
    #[error("more than {} sections at depth {depth} under one parent", MAX_SEGMENT)]
    TooManySiblings { depth: usize },
}

/// Half-open byte range `[start, end)` into the source document.
///
/// Serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span(pub usize, pub usize);

impl Span {
    pub fn start(&self) -> usize {
        self.0
    }

    pub fn end(&self) -> usize {
        self.1
    }

    pub fn len(&self) -> usize {
        self.1 - self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == self.1
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.0 <= other.0 && other.1 <= self.1
    }
}

/// Specificity label of an ordered pair: is the first item more general than,
/// more specific than, or unrelated to the second.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Relation {
    General,
    Specific,
    Other,
}

impl Relation {
    pub const ALL: [Relation; 3] = [Relation::General, Relation::Specific, Relation::Other];

    pub fn as_str(&self) -> &'static str {
        match self {
            Relation::General => "general",
            Relation::Specific => "specific",
            Relation::Other => "other",
        }
    }

    /// Label of the same pair with its arguments swapped.
    pub fn swapped(self) -> Relation {
        match self {
            Relation::General => Relation::Specific,
            Relation::Specific => Relation::General,
            Relation::Other => Relation::Other,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Relation::General => 0,
            Relation::Specific => 1,
            Relation::Other => 2,
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("unknown relation label `{0}`")]
pub struct UnknownRelation(pub String);

impl FromStr for Relation {
    type Err = UnknownRelation;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "general" => Ok(Relation::General),
            "specific" => Ok(Relation::Specific),
            "other" => Ok(Relation::Other),
            _ => Err(UnknownRelation(s.to_string())),
        }
    }
}

/// Labels the ordered pair `(a, b)` from section positions alone.
///
/// Only direct parent/child pairs are related; grandparents, siblings and
/// identical sections are `Other`.
pub fn section_relationship(a: &SectionId, b: &SectionId) -> Relation {
    if a.is_direct_parent_of(b) {
        Relation::General
    } else if b.is_direct_parent_of(a) {
        Relation::Specific
    } else {
        Relation::Other
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn id(path: &[u8]) -> SectionId {
        SectionId::new(path.to_vec()).unwrap()
    }

    #[test]
    fn parent_then_child_is_general() {
        assert_eq!(section_relationship(&id(&[1, 4]), &id(&[1, 4, 3])), Relation::General);
    }

    #[test]
    fn child_then_parent_is_specific() {
        assert_eq!(section_relationship(&id(&[1, 4, 3]), &id(&[1, 4])), Relation::Specific);
    }

    #[test]
    fn non_adjacent_levels_are_other() {
        assert_eq!(section_relationship(&id(&[1, 4]), &id(&[1, 4, 3, 1])), Relation::Other);
        assert_eq!(section_relationship(&id(&[1, 4]), &id(&[1, 4])), Relation::Other);
        assert_eq!(section_relationship(&id(&[1, 4]), &id(&[1, 5])), Relation::Other);
        assert_eq!(section_relationship(&id(&[1]), &id(&[2, 1])), Relation::Other);
    }

    #[test]
    fn relation_labels_parse() {
        for r in Relation::ALL {
            assert_eq!(r.as_str().parse::<Relation>().unwrap(), r);
        }
        assert!("parent".parse::<Relation>().is_err());
        assert_eq!(serde_json::to_string(&Relation::Specific).unwrap(), "\"specific\"");
    }

    fn arb_id() -> impl Strategy<Value = SectionId> {
        prop::collection::vec(1u8..=3, 1..=4).prop_map(|p| SectionId::new(p).unwrap())
    }

    proptest! {
        #[test]
        fn swapping_arguments_swaps_label(a in arb_id(), b in arb_id()) {
            prop_assert_eq!(section_relationship(&b, &a), section_relationship(&a, &b).swapped());
        }
    }
}
