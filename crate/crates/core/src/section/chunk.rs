use serde::{Deserialize, Serialize};

use super::{Outline, SectionId, Span};
use crate::scoring::{Embedder, ScoringError};
use crate::text::has_word;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChunkingConfig {
    /// Adjacent paragraphs whose similarity falls below this percentile of
    /// the section's adjacent similarities start a new chunk.
    pub percentile: f64,
    /// A chunk is closed before it would grow past this many characters.
    pub max_chars: usize,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        Self {
            percentile: 25.0,
            max_chars: 2000,
        }
    }
}

/// A section-confined run of paragraphs, the context a question is generated from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: String,
    pub section_id: SectionId,
    pub text: String,
    pub span: Span,
}

pub fn chunk_id(ordinal: usize) -> String {
    format!("chk_{ordinal:05}")
}

/// A blank-line separated block, trimmed to its non-whitespace extent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Paragraph {
    pub span: Span,
}

/// Splits `source[body]` into paragraphs. Blocks without any word character
/// (rules, lone symbols) are folded into the preceding paragraph, or the
/// following one when they open the body.
pub fn split_paragraphs(source: &str, body: Span) -> Vec<Paragraph> {
    let mut blocks: Vec<Span> = Vec::new();
    let mut current: Option<Span> = None;
    let mut offset = body.start();
    for line in source[body.start()..body.end()].split_inclusive('\n') {
        let line_start = offset;
        offset += line.len();
        let trimmed_start = line.len() - line.trim_start().len();
        let content = line.trim();
        if content.is_empty() {
            if let Some(span) = current.take() {
                blocks.push(span);
            }
            continue;
        }
        let start = line_start + trimmed_start;
        let end = start + content.len();
        current = Some(match current {
            Some(Span(s, _)) => Span(s, end),
            None => Span(start, end),
        });
    }
    if let Some(span) = current {
        blocks.push(span);
    }

    let mut paragraphs: Vec<Paragraph> = Vec::new();
    let mut pending: Option<Span> = None;
    for span in blocks {
        let wordy = has_word(&source[span.start()..span.end()]);
        if !wordy {
            if let Some(last) = paragraphs.last_mut() {
                last.span.1 = span.end();
            } else {
                pending = Some(match pending {
                    Some(p) => Span(p.start(), span.end()),
                    None => span,
                });
            }
            continue;
        }
        let start = pending.take().map_or(span.start(), |p| p.start());
        paragraphs.push(Paragraph {
            span: Span(start, span.end()),
        });
    }
    if let Some(p) = pending {
        paragraphs.push(Paragraph { span: p });
    }
    paragraphs
}

/// Linear-interpolated percentile (`p` in 0..=100) of `values`.
pub(crate) fn percentile(values: &[f64], p: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = (p / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lower = rank.floor() as usize;
    let upper = rank.ceil() as usize;
    let frac = rank - lower as f64;
    sorted[lower] + (sorted[upper] - sorted[lower]) * frac
}

/// Paragraph indices after which a new chunk starts.
pub(crate) fn breakpoints(
    source: &str,
    paragraphs: &[Paragraph],
    similarities: &[f64],
    config: &ChunkingConfig,
) -> Vec<usize> {
    let threshold = percentile(similarities, config.percentile);
    let mut cuts = Vec::new();
    let mut chunk_start = match paragraphs.first() {
        Some(p) => p.span.start(),
        None => return cuts,
    };
    for i in 1..paragraphs.len() {
        let semantic_break = similarities[i - 1] < threshold;
        let grown = source[chunk_start..paragraphs[i].span.end()].chars().count();
        if semantic_break || grown > config.max_chars {
            cuts.push(i - 1);
            chunk_start = paragraphs[i].span.start();
        }
    }
    cuts
}

/// Splits every section body into chunks that never cross a section boundary.
///
/// Paragraph boundaries are the candidate breakpoints. Text before the first
/// heading (front matter) is not chunked. Chunk ids are assigned in document
/// order.
pub fn chunk_sections(
    source: &str,
    outline: &Outline,
    embedder: &dyn Embedder,
    config: &ChunkingConfig,
) -> Result<Vec<Chunk>, ScoringError> {
    let per_section: Vec<(&SectionId, Vec<Paragraph>)> = outline
        .sections
        .iter()
        .map(|s| (&s.id, split_paragraphs(source, s.body_span)))
        .collect();

    // One embedding call for every paragraph that has a neighbour.
    let texts: Vec<&str> = per_section
        .iter()
        .filter(|(_, ps)| ps.len() > 1)
        .flat_map(|(_, ps)| ps.iter().map(|p| &source[p.span.start()..p.span.end()]))
        .collect();
    let embeddings = if texts.is_empty() {
        Vec::new()
    } else {
        embedder.embed(&texts)?
    };
    if embeddings.len() != texts.len() {
        return Err(ScoringError::LengthMismatch {
            expected: texts.len(),
            got: embeddings.len(),
        });
    }

    let mut chunks = Vec::new();
    let mut cursor = 0;
    for (section_id, paragraphs) in per_section {
        if paragraphs.is_empty() {
            continue;
        }
        let cuts = if paragraphs.len() > 1 {
            let vectors = &embeddings[cursor..cursor + paragraphs.len()];
            cursor += paragraphs.len();
            let similarities = vectors
                .windows(2)
                .map(|w| w[0].cosine(&w[1]))
                .collect::<Result<Vec<_>, _>>()?;
            breakpoints(source, &paragraphs, &similarities, config)
        } else {
            Vec::new()
        };

        let mut first = 0;
        for last in cuts.into_iter().chain(std::iter::once(paragraphs.len() - 1)) {
            let span = Span(paragraphs[first].span.start(), paragraphs[last].span.end());
            chunks.push(Chunk {
                chunk_id: chunk_id(chunks.len()),
                section_id: section_id.clone(),
                text: source[span.start()..span.end()].to_string(),
                span,
            });
            first = last + 1;
        }
    }
    Ok(chunks)
}
