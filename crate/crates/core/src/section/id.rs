use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::SectionError;

/// Number of hierarchy levels the fixed-width code can hold.
pub const MAX_DEPTH: usize = 5;
/// Largest section number a single two-digit level can hold.
pub const MAX_SEGMENT: u8 = 99;

const PREFIX: &str = "SECTION";
const CODE_DIGITS: usize = MAX_DEPTH * 2;

/// A position in the textbook hierarchy, e.g. `[1, 4, 3]` for Section 1.4.3.
///
/// The canonical text form is `SECTION` followed by ten digits, two per level,
/// with unused trailing levels written as `00`: Section 1.4.3 is
/// `SECTION0104030000`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SectionId(Vec<u8>);

impl SectionId {
    /// Builds an id from a section path, validating depth and segment range.
    pub fn new(segments: impl Into<Vec<u8>>) -> Result<Self, SectionError> {
        let segments = segments.into();
        if segments.is_empty() {
            return Err(SectionError::EmptyPath);
        }
        if segments.len() > MAX_DEPTH {
            return Err(SectionError::TooDeep { depth: segments.len() });
        }
        for (position, &value) in segments.iter().enumerate() {
            if value == 0 || value > MAX_SEGMENT {
                return Err(SectionError::SegmentOutOfRange {
                    position,
                    value: value as u32,
                });
            }
        }
        Ok(Self(segments))
    }

    /// Like [`SectionId::new`] but for paths coming from wider integer types.
    pub fn from_path(path: &[u32]) -> Result<Self, SectionError> {
        let mut segments = Vec::with_capacity(path.len());
        for (position, &value) in path.iter().enumerate() {
            if value == 0 || value > MAX_SEGMENT as u32 {
                return Err(SectionError::SegmentOutOfRange { position, value });
            }
            segments.push(value as u8);
        }
        Self::new(segments)
    }

    /// Parses a `SECTION` code. Codes shorter than ten digits (an even number
    /// of them) are accepted and treated as zero-padded.
    pub fn from_code(code: &str) -> Result<Self, SectionError> {
        let malformed = |reason: &str| SectionError::MalformedCode {
            code: code.to_string(),
            reason: reason.to_string(),
        };
        let digits = code
            .strip_prefix(PREFIX)
            .ok_or_else(|| malformed("missing `SECTION` prefix"))?;
        if digits.is_empty() || digits.len() > CODE_DIGITS || digits.len() % 2 != 0 {
            return Err(malformed("expected an even number of digits, at most 10"));
        }
        if !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(malformed("non-digit character after prefix"));
        }

        let pairs: Vec<u8> = digits
            .as_bytes()
            .chunks(2)
            .map(|pair| (pair[0] - b'0') * 10 + (pair[1] - b'0'))
            .collect();
        let depth = pairs.iter().take_while(|&&v| v != 0).count();
        if let Some(offset) = pairs[depth..].iter().position(|&v| v != 0) {
            return Err(SectionError::InteriorZero {
                code: code.to_string(),
                position: depth,
                next_nonzero: depth + offset,
            });
        }
        if depth == 0 {
            return Err(malformed("all segments are zero"));
        }
        Ok(Self(pairs[..depth].to_vec()))
    }

    /// The canonical 10-digit code.
    pub fn code(&self) -> String {
        let mut out = String::with_capacity(PREFIX.len() + CODE_DIGITS);
        out.push_str(PREFIX);
        for level in 0..MAX_DEPTH {
            let value = self.0.get(level).copied().unwrap_or(0);
            out.push_str(&format!("{value:02}"));
        }
        out
    }

    pub fn segments(&self) -> &[u8] {
        &self.0
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }

    /// The enclosing section, or `None` for a chapter.
    pub fn parent(&self) -> Option<SectionId> {
        if self.0.len() > 1 {
            Some(Self(self.0[..self.0.len() - 1].to_vec()))
        } else {
            None
        }
    }

    /// True when `other` sits exactly one level below `self`.
    pub fn is_direct_parent_of(&self, other: &SectionId) -> bool {
        other.0.len() == self.0.len() + 1 && other.0.starts_with(&self.0)
    }

    /// Dotted form, `1.4.3`.
    pub fn dotted(&self) -> String {
        self.0
            .iter()
            .map(|s| s.to_string())
            .collect::<Vec<_>>()
            .join(".")
    }
}

impl fmt::Display for SectionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

impl FromStr for SectionId {
    type Err = SectionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_code(s)
    }
}

impl Serialize for SectionId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.code())
    }
}

impl<'de> Deserialize<'de> for SectionId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let code = String::deserialize(deserializer)?;
        Self::from_code(&code).map_err(serde::de::Error::custom)
    }
}
