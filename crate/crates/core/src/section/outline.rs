use serde::{Deserialize, Serialize};

use super::{SectionError, SectionId, Span, MAX_DEPTH, MAX_SEGMENT};

/// One heading-delimited section of the source document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SectionNode {
    pub id: SectionId,
    pub title: String,
    pub parent: Option<SectionId>,
    /// From the start of the heading line to the next heading of any level.
    pub span: Span,
    /// The part of `span` after the heading line.
    pub body_span: Span,
    /// Inserted to fill a skipped heading level; has an empty title and span.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub synthesized: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutlineWarning {
    /// A heading skipped one or more levels; the missing levels were synthesized.
    DepthJump { line: usize, from: usize, to: usize },
    /// Headings deeper than the section code can express are kept as body text.
    HeadingTooDeep { line: usize, level: usize },
    /// Text before the first heading is not assigned to any section.
    FrontMatterSkipped { span: Span },
}

impl std::fmt::Display for OutlineWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OutlineWarning::DepthJump { line, from, to } => write!(
                f,
                "line {line}: heading jumps from level {from} to {to}; missing levels synthesized"
            ),
            OutlineWarning::HeadingTooDeep { line, level } => {
                write!(f, "line {line}: level-{level} heading kept as body text")
            }
            OutlineWarning::FrontMatterSkipped { span } => write!(
                f,
                "bytes {}..{} before the first heading are not part of any section",
                span.start(),
                span.end()
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outline {
    /// Sections in document order.
    pub sections: Vec<SectionNode>,
    pub front_matter: Option<Span>,
    pub warnings: Vec<OutlineWarning>,
}

impl Outline {
    pub fn get(&self, id: &SectionId) -> Option<&SectionNode> {
        self.sections.iter().find(|s| &s.id == id)
    }

    pub fn children<'a>(&'a self, id: &'a SectionId) -> impl Iterator<Item = &'a SectionNode> + 'a {
        self.sections
            .iter()
            .filter(move |s| s.parent.as_ref() == Some(id))
    }
}

struct Heading<'a> {
    level: usize,
    title: &'a str,
}

/// Recognizes an ATX heading line (`#` through `######`).
fn atx_heading(line: &str) -> Option<Heading<'_>> {
    let indent = line.len() - line.trim_start_matches(' ').len();
    if indent > 3 {
        return None;
    }
    let rest = &line[indent..];
    let level = rest.len() - rest.trim_start_matches('#').len();
    if !(1..=6).contains(&level) {
        return None;
    }
    let rest = &rest[level..];
    if !(rest.is_empty() || rest.starts_with(' ') || rest.starts_with('\t')) {
        return None;
    }
    let mut title = rest.trim();
    // optional closing sequence: `## Title ##`
    let without_closing = title.trim_end_matches('#');
    if without_closing.is_empty() {
        title = "";
    } else if without_closing.len() != title.len()
        && (without_closing.ends_with(' ') || without_closing.ends_with('\t'))
    {
        title = without_closing.trim_end();
    }
    Some(Heading { level, title })
}

fn fence_marker(line: &str) -> Option<&'static str> {
    let trimmed = line.trim_start_matches(' ');
    if line.len() - trimmed.len() > 3 {
        return None;
    }
    if trimmed.starts_with("```") {
        Some("```")
    } else if trimmed.starts_with("~~~") {
        Some("~~~")
    } else {
        None
    }
}

struct RawSection {
    id: SectionId,
    title: String,
    start: usize,
    body_start: usize,
    synthesized: bool,
}

/// Parses ATX headings into a numbered section outline.
///
/// Sections are numbered by order of appearance within their parent; numbers
/// written in the heading text are ignored. A document without headings
/// becomes a single implicit section `[1]` spanning the whole text.
pub fn parse_outline(markdown: &str) -> Result<Outline, SectionError> {
    let mut raw: Vec<RawSection> = Vec::new();
    let mut warnings = Vec::new();
    let mut counters: Vec<u8> = Vec::new();
    let mut open_fence: Option<&'static str> = None;

    let mut offset = 0;
    for (line_no, line_with_end) in markdown.split_inclusive('\n').enumerate() {
        let line_start = offset;
        offset += line_with_end.len();
        let line = line_with_end.trim_end_matches(['\n', '\r']);

        if let Some(marker) = open_fence {
            if line.trim_start().starts_with(marker) {
                open_fence = None;
            }
            continue;
        }
        if let Some(marker) = fence_marker(line) {
            open_fence = Some(marker);
            continue;
        }

        let Some(heading) = atx_heading(line) else {
            continue;
        };
        if heading.level > MAX_DEPTH {
            warnings.push(OutlineWarning::HeadingTooDeep {
                line: line_no + 1,
                level: heading.level,
            });
            continue;
        }

        let level = heading.level;
        if counters.len() >= level {
            counters.truncate(level);
            let last = counters.last_mut().expect("level >= 1");
            if *last >= MAX_SEGMENT {
                return Err(SectionError::TooManySiblings { depth: level });
            }
            *last += 1;
        } else {
            if counters.len() + 1 < level {
                warnings.push(OutlineWarning::DepthJump {
                    line: line_no + 1,
                    from: counters.len(),
                    to: level,
                });
            }
            while counters.len() + 1 < level {
                counters.push(1);
                raw.push(RawSection {
                    id: SectionId::new(counters.clone())?,
                    title: String::new(),
                    start: line_start,
                    body_start: line_start,
                    synthesized: true,
                });
            }
            counters.push(1);
        }

        raw.push(RawSection {
            id: SectionId::new(counters.clone())?,
            title: heading.title.to_string(),
            start: line_start,
            body_start: offset,
            synthesized: false,
        });
    }

    if raw.is_empty() {
        let whole = Span(0, markdown.len());
        return Ok(Outline {
            sections: vec![SectionNode {
                id: SectionId::new(vec![1])?,
                title: String::new(),
                parent: None,
                span: whole,
                body_span: whole,
                synthesized: false,
            }],
            front_matter: None,
            warnings,
        });
    }

    let first_start = raw[0].start;
    let front_matter = if markdown[..first_start].trim().is_empty() {
        None
    } else {
        let span = Span(0, first_start);
        warnings.push(OutlineWarning::FrontMatterSkipped { span });
        Some(span)
    };

    let ends: Vec<usize> = raw
        .iter()
        .skip(1)
        .map(|r| r.start)
        .chain(std::iter::once(markdown.len()))
        .collect();

    let sections = raw
        .into_iter()
        .zip(ends)
        .map(|(r, end)| {
            let end = if r.synthesized { r.start } else { end };
            SectionNode {
                parent: r.id.parent(),
                id: r.id,
                title: r.title,
                span: Span(r.start, end),
                body_span: Span(r.body_start.min(end), end),
                synthesized: r.synthesized,
            }
        })
        .collect();

    Ok(Outline {
        sections,
        front_matter,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paths(outline: &Outline) -> Vec<Vec<u8>> {
        outline
            .sections
            .iter()
            .map(|s| s.id.segments().to_vec())
            .collect()
    }

    #[test]
    fn numbers_by_appearance() {
        let doc = "# A\ntext\n## B\nmore\n## C\n# D\nend\n";
        let outline = parse_outline(doc).unwrap();
        assert_eq!(paths(&outline), vec![vec![1], vec![1, 1], vec![1, 2], vec![2]]);
        let titles: Vec<_> = outline.sections.iter().map(|s| s.title.as_str()).collect();
        assert_eq!(titles, ["A", "B", "C", "D"]);
        assert_eq!(outline.sections[1].parent, Some(SectionId::new(vec![1]).unwrap()));
        assert!(outline.warnings.is_empty());
    }

    #[test]
    fn depth_jump_synthesizes_missing_level() {
        let doc = "# A\nintro\n### C\nbody of c\n";
        let outline = parse_outline(doc).unwrap();
        assert_eq!(paths(&outline), vec![vec![1], vec![1, 1], vec![1, 1, 1]]);
        let synth = &outline.sections[1];
        assert!(synth.synthesized);
        assert!(synth.title.is_empty());
        assert!(synth.span.is_empty());
        assert_eq!(outline.sections[2].title, "C");
        assert_eq!(outline.sections[2].parent, Some(synth.id.clone()));
        assert!(matches!(
            outline.warnings[0],
            OutlineWarning::DepthJump { line: 3, from: 1, to: 3 }
        ));
    }

    #[test]
    fn empty_document_is_one_root() {
        let outline = parse_outline("").unwrap();
        assert_eq!(paths(&outline), vec![vec![1]]);
        assert_eq!(outline.sections[0].body_span, Span(0, 0));
        assert_eq!(outline.front_matter, None);
    }

    #[test]
    fn headingless_document_is_one_root() {
        let doc = "just a paragraph\n\nand another\n";
        let outline = parse_outline(doc).unwrap();
        assert_eq!(paths(&outline), vec![vec![1]]);
        assert_eq!(outline.sections[0].body_span, Span(0, doc.len()));
    }

    #[test]
    fn heading_numbers_in_text_are_ignored() {
        let doc = "# 7 Scoring\n## 7.3 Weights\n";
        let outline = parse_outline(doc).unwrap();
        assert_eq!(paths(&outline), vec![vec![1], vec![1, 1]]);
        assert_eq!(outline.sections[1].title, "7.3 Weights");
    }

    #[test]
    fn spans_tile_the_document() {
        let doc = "preface text\n\n# A\nalpha\n## B\nbeta\n# C\ngamma";
        let outline = parse_outline(doc).unwrap();
        assert_eq!(outline.front_matter, Some(Span(0, 14)));
        let mut cursor = 14;
        for s in &outline.sections {
            assert_eq!(s.span.start(), cursor);
            cursor = s.span.end();
        }
        assert_eq!(cursor, doc.len());
        assert_eq!(&doc[outline.sections[0].body_span.0..outline.sections[0].body_span.1], "alpha\n");
        assert_eq!(&doc[outline.sections[2].body_span.0..outline.sections[2].body_span.1], "gamma");
        assert!(outline
            .warnings
            .iter()
            .any(|w| matches!(w, OutlineWarning::FrontMatterSkipped { .. })));
    }

    #[test]
    fn not_headings() {
        let doc = "# A\n#hashtag\n    # indented code\n```\n# in fence\n```\n###### six\n## B\n";
        let outline = parse_outline(doc).unwrap();
        assert_eq!(paths(&outline), vec![vec![1], vec![1, 1]]);
        assert!(matches!(
            outline.warnings[0],
            OutlineWarning::HeadingTooDeep { line: 7, level: 6 }
        ));
    }

    #[test]
    fn closing_hashes_are_stripped() {
        let outline = parse_outline("## Title ##\n# C#\n").unwrap();
        assert_eq!(outline.sections[1].title, "Title");
        assert_eq!(outline.sections[2].title, "C#");
    }

    #[test]
    fn too_many_siblings() {
        let doc: String = (0..100).map(|i| format!("# S{i}\n")).collect();
        assert_eq!(
            parse_outline(&doc).unwrap_err(),
            SectionError::TooManySiblings { depth: 1 }
        );
    }
}
