//! Labeled context pairs for training the specificity classifier.
//!
//! Every ordered pair of chunks whose sections are parent and direct child
//! is labeled `general`; the same pairs swapped are `specific`; an equal
//! number of pairs with no parent/child relation in either order is sampled
//! as `other`.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::section::{section_relationship, Chunk, Relation, SectionId};

/// Identifies the sampling procedure recorded in dataset headers.
pub const PRNG_ID: &str = "chacha8(rand_chacha 0.3, seed_from_u64)+partial-fisher-yates";

#[derive(Debug, Error)]
pub enum PairError {
    #[error("degenerate hierarchy: no chunks in sections with a direct parent-child relation")]
    DegenerateHierarchy,
    #[error("need {needed} `other` pairs but only {available} candidates exist")]
    InsufficientOther { needed: usize, available: usize },
    #[error("pair file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid split ratios: {0}")]
    InvalidSplit(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairExample {
    pub context_a: String,
    pub context_b: String,
    pub section_a: SectionId,
    pub section_b: SectionId,
    pub label: Relation,
    /// Source chunk ids; not part of the on-disk format.
    #[serde(skip)]
    pub chunk_a: String,
    #[serde(skip)]
    pub chunk_b: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairHeader {
    pub seed: u64,
    pub prng: String,
    pub n_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PairDatasetStats {
    pub n_chunks: usize,
    pub n_pairs: usize,
    pub n_general: usize,
    pub n_specific: usize,
    pub n_other: usize,
    /// Distinct top-level sections that carry chunks.
    pub n_chapters: usize,
    /// Distinct sections below chapter level that carry chunks.
    pub n_sections: usize,
    /// Mean section depth over chunks.
    pub depth_avg: f64,
    pub depth_max: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairDataset {
    pub header: PairHeader,
    pub pairs: Vec<PairExample>,
    pub stats: PairDatasetStats,
}

fn example(a: &Chunk, b: &Chunk, label: Relation) -> PairExample {
    PairExample {
        context_a: a.text.clone(),
        context_b: b.text.clone(),
        section_a: a.section_id.clone(),
        section_b: b.section_id.clone(),
        label,
        chunk_a: a.chunk_id.clone(),
        chunk_b: b.chunk_id.clone(),
    }
}

/// Builds the balanced three-class pair dataset. Output order is all
/// `general` pairs, their swaps, then the sampled `other` pairs; it depends
/// only on the chunk order and `seed`.
pub fn build_pair_dataset(chunks: &[Chunk], seed: u64) -> Result<PairDataset, PairError> {
    let mut general = Vec::new();
    let mut other_candidates: Vec<(u32, u32)> = Vec::new();
    for (i, a) in chunks.iter().enumerate() {
        for (j, b) in chunks.iter().enumerate() {
            if i == j || a.chunk_id == b.chunk_id {
                continue;
            }
            match section_relationship(&a.section_id, &b.section_id) {
                Relation::General => general.push((i, j)),
                Relation::Specific => {}
                Relation::Other => other_candidates.push((i as u32, j as u32)),
            }
        }
    }

    let p = general.len();
    if p == 0 {
        return Err(PairError::DegenerateHierarchy);
    }
    if other_candidates.len() < p {
        return Err(PairError::InsufficientOther {
            needed: p,
            available: other_candidates.len(),
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..p {
        let pick = rng.gen_range(k..other_candidates.len());
        other_candidates.swap(k, pick);
    }
    let mut sampled = other_candidates[..p].to_vec();
    sampled.sort_unstable();

    let mut pairs = Vec::with_capacity(3 * p);
    pairs.extend(general.iter().map(|&(i, j)| example(&chunks[i], &chunks[j], Relation::General)));
    pairs.extend(general.iter().map(|&(i, j)| example(&chunks[j], &chunks[i], Relation::Specific)));
    pairs.extend(
        sampled
            .iter()
            .map(|&(i, j)| example(&chunks[i as usize], &chunks[j as usize], Relation::Other)),
    );

    let stats = dataset_stats(chunks, &pairs);
    Ok(PairDataset {
        header: PairHeader {
            seed,
            prng: PRNG_ID.to_string(),
            n_pairs: pairs.len(),
        },
        pairs,
        stats,
    })
}

pub fn dataset_stats(chunks: &[Chunk], pairs: &[PairExample]) -> PairDatasetStats {
    let count = |label| pairs.iter().filter(|p| p.label == label).count();
    let chapters: BTreeSet<u8> = chunks.iter().map(|c| c.section_id.segments()[0]).collect();
    let sections: BTreeSet<&SectionId> = chunks
        .iter()
        .map(|c| &c.section_id)
        .filter(|s| s.depth() > 1)
        .collect();
    let depth_sum: usize = chunks.iter().map(|c| c.section_id.depth()).sum();
    PairDatasetStats {
        n_chunks: chunks.len(),
        n_pairs: pairs.len(),
        n_general: count(Relation::General),
        n_specific: count(Relation::Specific),
        n_other: count(Relation::Other),
        n_chapters: chapters.len(),
        n_sections: sections.len(),
        depth_avg: if chunks.is_empty() {
            0.0
        } else {
            depth_sum as f64 / chunks.len() as f64
        },
        depth_max: chunks.iter().map(|c| c.section_id.depth()).max().unwrap_or(0),
    }
}

impl PairDatasetStats {
    /// Plain-text summary in the layout of a corpus statistics table.
    pub fn table(&self) -> String {
        let rows = [
            ("# of chunks", group_thousands(self.n_chunks)),
            ("# of pair examples", group_thousands(self.n_pairs)),
            (
                "# of chapters / sections",
                format!("{} / {}", self.n_chapters, self.n_sections),
            ),
            (
                "depth (avg / max)",
                format!("{:.1} / {}", self.depth_avg, self.depth_max),
            ),
        ];
        let mut out = format!("{:<26}{:>12}\n", "Description", "Value");
        for (name, value) in rows {
            out.push_str(&format!("{name:<26}{value:>12}\n"));
        }
        out
    }
}

fn group_thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// Writes the header line followed by one line per pair.
pub fn write_pairs_jsonl(
    mut writer: impl Write,
    header: &PairHeader,
    pairs: &[PairExample],
) -> Result<(), PairError> {
    let to_io = |e: serde_json::Error| PairError::Io(e.into());
    serde_json::to_writer(&mut writer, header).map_err(to_io)?;
    writer.write_all(b"\n")?;
    for pair in pairs {
        serde_json::to_writer(&mut writer, pair).map_err(to_io)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_pairs_jsonl(reader: impl BufRead) -> Result<(PairHeader, Vec<PairExample>), PairError> {
    let mut lines = reader.lines().enumerate().filter(|(_, l)| {
        l.as_ref().map_or(true, |l| !l.trim().is_empty())
    });
    let parse_err = |line: usize, e: serde_json::Error| PairError::Parse {
        line: line + 1,
        message: e.to_string(),
    };
    let (n, first) = lines.next().ok_or(PairError::Parse {
        line: 1,
        message: "missing header line".into(),
    })?;
    let header: PairHeader = serde_json::from_str(&first?).map_err(|e| parse_err(n, e))?;
    let mut pairs = Vec::with_capacity(header.n_pairs);
    for (n, line) in lines {
        pairs.push(serde_json::from_str(&line?).map_err(|e| parse_err(n, e))?);
    }
    if pairs.len() != header.n_pairs {
        return Err(PairError::Parse {
            line: 1,
            message: format!("header announces {} pairs, found {}", header.n_pairs, pairs.len()),
        });
    }
    Ok((header, pairs))
}

/// Seeded shuffle into train / validation / test parts. The test part takes
/// whatever the two ratios leave over.
pub fn split_pairs(
    pairs: &[PairExample],
    train: f64,
    validation: f64,
    seed: u64,
) -> Result<[Vec<PairExample>; 3], PairError> {
    if !(0.0..=1.0).contains(&train) || !(0.0..=1.0).contains(&validation) || train + validation > 1.0 {
        return Err(PairError::InvalidSplit(format!(
            "train {train} and validation {validation} must be in [0, 1] and sum to at most 1"
        )));
    }
    let mut shuffled = pairs.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = shuffled.len();
    let n_train = (train * n as f64).round() as usize;
    let n_val = ((validation * n as f64).round() as usize).min(n - n_train);
    let test = shuffled.split_off(n_train + n_val);
    let val = shuffled.split_off(n_train);
    Ok([shuffled, val, test])
}
