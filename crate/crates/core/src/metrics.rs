//! Text-generation metrics (BLEU, ROUGE-L) and classification reports.
//!
//! Text is tokenized with [`crate::text::word_tokens`] throughout.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::section::Relation;
use crate::text::{word_tokens, TOKENIZER_ID};

pub const DEFAULT_ROUGE_BETA: f64 = 1.2;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("gold has {gold} labels but predictions have {predicted}")]
    LengthMismatch { gold: usize, predicted: usize },
    #[error("no labels to score")]
    Empty,
    #[error("unknown label `{label}` at position {index}")]
    UnknownLabel { index: usize, label: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BleuOptions {
    pub max_n: usize,
    /// Add one to the numerator and denominator of every n >= 2 precision.
    pub smoothing: bool,
}

impl Default for BleuOptions {
    fn default() -> Self {
        Self {
            max_n: 4,
            smoothing: true,
        }
    }
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped n-gram matches and candidate n-gram total for one sentence.
fn clipped(candidate: &[String], references: &[Vec<String>], n: usize) -> (usize, usize) {
    let cand = ngram_counts(candidate, n);
    let mut max_ref: HashMap<&[String], usize> = HashMap::new();
    for r in references {
        for (gram, count) in ngram_counts(r, n) {
            let slot = max_ref.entry(gram).or_insert(0);
            *slot = (*slot).max(count);
        }
    }
    let matches = cand
        .iter()
        .map(|(gram, &count)| count.min(max_ref.get(gram).copied().unwrap_or(0)))
        .sum();
    (matches, candidate.len().saturating_sub(n - 1))
}

/// Length of the reference closest to `len`, preferring the shorter on ties.
fn closest_ref_len(len: usize, references: &[Vec<String>]) -> usize {
    references
        .iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(len), r))
        .unwrap_or(0)
}

fn combine(matches: &[usize], totals: &[usize], cand_len: usize, ref_len: usize, opts: &BleuOptions) -> f64 {
    let mut log_sum = 0.0;
    for (i, (&m, &t)) in matches.iter().zip(totals).enumerate() {
        let (m, t) = if opts.smoothing && i >= 1 {
            (m as f64 + 1.0, t as f64 + 1.0)
        } else {
            (m as f64, t as f64)
        };
        if m == 0.0 || t == 0.0 {
            return 0.0;
        }
        log_sum += (m / t).ln();
    }
    let bp = if cand_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    };
    (bp * (log_sum / matches.len() as f64).exp()).clamp(0.0, 1.0)
}

/// Sentence BLEU: geometric mean of clipped n-gram precisions times the
/// brevity penalty against the closest reference length.
pub fn bleu(candidate: &str, references: &[&str], opts: &BleuOptions) -> f64 {
    corpus_bleu(&[candidate], &[references.to_vec()], opts)
}

/// Corpus BLEU: n-gram matches and lengths are pooled over all sentences
/// before the precisions and brevity penalty are taken.
pub fn corpus_bleu(candidates: &[&str], references: &[Vec<&str>], opts: &BleuOptions) -> f64 {
    let max_n = opts.max_n.max(1);
    let mut matches = vec![0; max_n];
    let mut totals = vec![0; max_n];
    let (mut cand_len, mut ref_len) = (0, 0);
    for (i, (cand, refs)) in candidates.iter().zip(references).enumerate() {
        let cand = word_tokens(cand);
        let refs: Vec<Vec<String>> = refs.iter().map(|r| word_tokens(r)).filter(|r| !r.is_empty()).collect();
        if cand.is_empty() || refs.is_empty() {
            log::warn!("bleu: sentence {i} has an empty candidate or no references; scored as 0");
        }
        if refs.is_empty() {
            continue;
        }
        cand_len += cand.len();
        ref_len += closest_ref_len(cand.len(), &refs);
        for n in 1..=max_n {
            let (m, t) = clipped(&cand, &refs, n);
            matches[n - 1] += m;
            totals[n - 1] += t;
        }
    }
    if cand_len == 0 {
        return 0.0;
    }
    combine(&matches, &totals, cand_len, ref_len, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeL {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0; b.len() + 1];
    let mut cur = vec![0; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS-based precision, recall and F-beta.
pub fn rouge_l(candidate: &str, reference: &str, beta: f64) -> RougeL {
    let (c, r) = (word_tokens(candidate), word_tokens(reference));
    if c.is_empty() || r.is_empty() {
        log::warn!("rouge_l: empty candidate or reference; scored as 0");
        return RougeL {
            precision: 0.0,
            recall: 0.0,
            f: 0.0,
        };
    }
    let lcs = lcs_len(&c, &r) as f64;
    let precision = lcs / c.len() as f64;
    let recall = lcs / r.len() as f64;
    let b2 = beta * beta;
    let f = if lcs == 0.0 {
        0.0
    } else {
        (1.0 + b2) * precision * recall / (recall + b2 * precision)
    };
    RougeL { precision, recall, f }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: Relation,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub accuracy: f64,
    /// Rows are gold labels, columns predictions, both in general/specific/other order.
    pub confusion: [[usize; 3]; 3],
    pub total: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn parse_labels<S: AsRef<str>>(labels: &[S]) -> Result<Vec<Relation>, MetricsError> {
    labels
        .iter()
        .enumerate()
        .map(|(index, l)| {
            l.as_ref().parse().map_err(|_| MetricsError::UnknownLabel {
                index,
                label: l.as_ref().to_string(),
            })
        })
        .collect()
}

/// Per-class and macro-averaged precision, recall and F1. A class that is
/// never predicted (or never gold) gets precision (or recall) 0.
pub fn classification_report(
    gold: &[Relation],
    predicted: &[Relation],
) -> Result<ClassificationReport, MetricsError> {
    if gold.len() != predicted.len() {
        return Err(MetricsError::LengthMismatch {
            gold: gold.len(),
            predicted: predicted.len(),
        });
    }
    if gold.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut confusion = [[0usize; 3]; 3];
    for (g, p) in gold.iter().zip(predicted) {
        confusion[g.index()][p.index()] += 1;
    }
    let per_class: Vec<ClassMetrics> = Relation::ALL
        .iter()
        .map(|&label| {
            let k = label.index();
            let tp = confusion[k][k];
            let support: usize = confusion[k].iter().sum();
            let predicted_k: usize = confusion.iter().map(|row| row[k]).sum();
            let precision = ratio(tp, predicted_k);
            let recall = ratio(tp, support);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                label,
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect();
    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / per_class.len() as f64;
    let trace: usize = (0..3).map(|k| confusion[k][k]).sum();
    Ok(ClassificationReport {
        macro_precision: mean(|c| c.precision),
        macro_recall: mean(|c| c.recall),
        macro_f1: mean(|c| c.f1),
        accuracy: ratio(trace, gold.len()),
        per_class,
        confusion,
        total: gold.len(),
    })
}

fn title_case(label: Relation) -> &'static str {
    match label {
        Relation::General => "General",
        Relation::Specific => "Specific",
        Relation::Other => "Other",
    }
}

/// Formats one row per class and an `Average` row, three decimals each.
pub fn format_metrics_table<'a>(
    rows: impl IntoIterator<Item = (&'a str, f64, f64, f64)>,
    average: (f64, f64, f64),
) -> String {
    let mut out = format!("{:<10}{:>11}{:>9}{:>11}\n", "", "Precision", "Recall", "F1-Score");
    for (name, p, r, f) in rows {
        let _ = writeln!(out, "{name:<10}{p:>11.3}{r:>9.3}{f:>11.3}");
    }
    let _ = writeln!(out, "{}", "-".repeat(41));
    let (p, r, f) = average;
    let _ = writeln!(out, "{:<10}{p:>11.3}{r:>9.3}{f:>11.3}", "Average");
    out
}

impl ClassificationReport {
    /// Precision/recall/F1 table followed by the confusion matrix.
    pub fn table(&self) -> String {
        let mut out = format_metrics_table(
            self.per_class
                .iter()
                .map(|c| (title_case(c.label), c.precision, c.recall, c.f1)),
            (self.macro_precision, self.macro_recall, self.macro_f1),
        );
        let _ = writeln!(out, "\nConfusion (rows gold, columns predicted)");
        let _ = writeln!(out, "{:<10}{:>10}{:>10}{:>10}", "", "General", "Specific", "Other");
        for label in Relation::ALL {
            let row = self.confusion[label.index()];
            let _ = writeln!(out, "{:<10}{:>10}{:>10}{:>10}", title_case(label), row[0], row[1], row[2]);
        }
        let _ = writeln!(out, "\nAccuracy {:.3} over {} pairs", self.accuracy, self.total);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationScores {
    pub n: usize,
    pub corpus_bleu: f64,
    pub rouge_l_precision: f64,
    pub rouge_l_recall: f64,
    pub rouge_l_f: f64,
}

/// Corpus BLEU and mean ROUGE-L of generated questions against references.
pub fn generation_scores(
    candidates: &[&str],
    references: &[Vec<&str>],
    bleu_opts: &BleuOptions,
    beta: f64,
) -> GenerationScores {
    let n = candidates.len().min(references.len());
    let mut sums = (0.0, 0.0, 0.0);
    for (c, refs) in candidates.iter().zip(references) {
        // ROUGE-L against the best-matching reference
        let best = refs
            .iter()
            .map(|r| rouge_l(c, r, beta))
            .max_by(|a, b| a.f.total_cmp(&b.f))
            .unwrap_or(RougeL {
                precision: 0.0,
                recall: 0.0,
                f: 0.0,
            });
        sums.0 += best.precision;
        sums.1 += best.recall;
        sums.2 += best.f;
    }
    let mean = |s: f64| if n == 0 { 0.0 } else { s / n as f64 };
    GenerationScores {
        n,
        corpus_bleu: corpus_bleu(&candidates[..n], &references[..n], bleu_opts),
        rouge_l_precision: mean(sums.0),
        rouge_l_recall: mean(sums.1),
        rouge_l_f: mean(sums.2),
    }
}

/// Everything the `eval` stage reports, with the settings that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub tokenizer: String,
    pub bleu: BleuOptions,
    pub rouge_beta: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generation: Option<GenerationScores>,
}

impl MetricReport {
    pub fn new(bleu: BleuOptions, rouge_beta: f64) -> Self {
        Self {
            tokenizer: TOKENIZER_ID.to_string(),
            bleu,
            rouge_beta,
            classification: None,
            generation: None,
        }
    }

    pub fn text(&self) -> String {
        let mut out = String::new();
        if let Some(c) = &self.classification {
            out.push_str("Specificity classification\n\n");
            out.push_str(&c.table());
        }
        if let Some(g) = &self.generation {
            if !out.is_empty() {
                out.push('\n');
            }
            let _ = writeln!(out, "Question generation ({} references)", g.n);
            let _ = writeln!(
                out,
                "BLEU-{} {:.4} ({})",
                self.bleu.max_n,
                g.corpus_bleu,
                if self.bleu.smoothing { "add-one smoothing for n >= 2" } else { "unsmoothed" }
            );
            let _ = writeln!(
                out,
                "ROUGE-L P {:.4} R {:.4} F(beta={}) {:.4}",
                g.rouge_l_precision, g.rouge_l_recall, self.rouge_beta, g.rouge_l_f
            );
        }
        let _ = writeln!(out, "\nTokenizer: {}", self.tokenizer);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EPS: f64 = 1e-9;

    #[test]
    fn bleu_brevity_example() {
        let score = bleu("the cat sat", &["the cat sat down"], &BleuOptions::default());
        // all smoothed precisions are 1, so only BP = exp(1 - 4/3) remains
        let expected = (1.0f64 - 4.0 / 3.0).exp();
        assert!((score - expected).abs() < EPS);
        assert!((score - 0.716_531_3).abs() < 1e-7);
    }

    #[test]
    fn bleu_identity_and_disjoint() {
        let opts = BleuOptions::default();
        assert!((bleu("What is the capital of France?", &["what is the capital of france"], &opts) - 1.0).abs() < EPS);
        assert_eq!(bleu("alpha beta", &["gamma delta"], &opts), 0.0);
        assert_eq!(bleu("", &["gamma delta"], &opts), 0.0);
        assert_eq!(bleu("?!", &["gamma"], &opts), 0.0);
    }

    #[test]
    fn bleu_clips_repeated_words() {
        let opts = BleuOptions {
            max_n: 1,
            smoothing: false,
        };
        // "the" appears twice in the reference, so 2 of 7 unigrams match
        let score = bleu("the the the the the the the", &["the cat is on the mat"], &opts);
        assert!((score - 2.0 / 7.0).abs() < EPS);
    }

    #[test]
    fn bleu_unsmoothed_short_sentence_is_zero() {
        let opts = BleuOptions {
            max_n: 4,
            smoothing: false,
        };
        assert_eq!(bleu("the cat sat", &["the cat sat"], &opts), 0.0);
    }

    #[test]
    fn bleu_picks_closest_reference_length() {
        let opts = BleuOptions {
            max_n: 1,
            smoothing: false,
        };
        // closest reference has 3 tokens, no brevity penalty
        let score = bleu("a b c", &["a b c d e f", "a b c"], &opts);
        assert!((score - 1.0).abs() < EPS);
    }

    #[test]
    fn corpus_bleu_pools_counts() {
        let opts = BleuOptions {
            max_n: 1,
            smoothing: false,
        };
        let score = corpus_bleu(&["a b", "c d"], &[vec!["a b"], vec!["c x"]], &opts);
        assert!((score - 0.75).abs() < EPS);
    }

    #[test]
    fn rouge_examples() {
        let r = rouge_l("the cat", "the cat sat", DEFAULT_ROUGE_BETA);
        assert!((r.precision - 1.0).abs() < EPS);
        assert!((r.recall - 2.0 / 3.0).abs() < EPS);
        let b2 = 1.44;
        let expected = (1.0 + b2) * (2.0 / 3.0) / (2.0 / 3.0 + b2);
        assert!((r.f - expected).abs() < EPS);

        let same = rouge_l("a b c", "a b c", DEFAULT_ROUGE_BETA);
        assert_eq!((same.precision, same.recall, same.f), (1.0, 1.0, 1.0));
        let none = rouge_l("a b", "c d", DEFAULT_ROUGE_BETA);
        assert_eq!((none.precision, none.recall, none.f), (0.0, 0.0, 0.0));
        assert_eq!(rouge_l("", "c d", DEFAULT_ROUGE_BETA).f, 0.0);
    }

    #[test]
    fn lcs_is_not_substring() {
        let r = rouge_l("a x b y c", "a b c", 1.0);
        assert!((r.recall - 1.0).abs() < EPS);
        assert!((r.precision - 0.6).abs() < EPS);
    }

    #[test]
    fn all_general_predictions() {
        use Relation::*;
        let gold = [General, General, General, Specific, Specific, Specific, Other, Other, Other];
        let report = classification_report(&gold, &[General; 9]).unwrap();
        let g = &report.per_class[0];
        assert!((g.precision - 1.0 / 3.0).abs() < EPS);
        assert_eq!(g.recall, 1.0);
        assert!((g.f1 - 0.5).abs() < EPS);
        assert_eq!(report.per_class[1].recall, 0.0);
        assert_eq!(report.per_class[2].f1, 0.0);
        assert!((report.macro_f1 - 1.0 / 6.0).abs() < EPS);
        assert!((report.accuracy - 1.0 / 3.0).abs() < EPS);
        assert_eq!(report.confusion, [[3, 0, 0], [3, 0, 0], [3, 0, 0]]);
    }

    #[test]
    fn perfect_predictions() {
        use Relation::*;
        let gold = [General, Specific, Other, Other];
        let report = classification_report(&gold, &gold).unwrap();
        assert_eq!(report.macro_f1, 1.0);
        assert_eq!(report.accuracy, 1.0);
        for c in &report.per_class {
            assert_eq!((c.precision, c.recall, c.f1), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn label_errors() {
        assert!(matches!(
            parse_labels(&["general", "broader"]),
            Err(MetricsError::UnknownLabel { index: 1, .. })
        ));
        assert!(matches!(
            classification_report(&[Relation::General], &[]),
            Err(MetricsError::LengthMismatch { gold: 1, predicted: 0 })
        ));
        assert!(matches!(classification_report(&[], &[]), Err(MetricsError::Empty)));
    }

    #[test]
    fn table_layout() {
        let table = format_metrics_table(
            [
                ("General", 0.941, 0.970, 0.955),
                ("Specific", 0.882, 0.909, 0.896),
                ("Other", 0.871, 0.818, 0.844),
            ],
            (0.899, 0.899, 0.899),
        );
        let expected = concat!(
            "            Precision   Recall   F1-Score\n",
            "General         0.941    0.970      0.955\n",
            "Specific        0.882    0.909      0.896\n",
            "Other           0.871    0.818      0.844\n",
            "-----------------------------------------\n",
            "Average         0.899    0.899      0.899\n",
        );
        assert_eq!(table, expected);
    }

    fn label() -> impl Strategy<Value = Relation> {
        prop_oneof![Just(Relation::General), Just(Relation::Specific), Just(Relation::Other)]
    }

    proptest! {
        #[test]
        fn report_invariants(pairs in prop::collection::vec((label(), label()), 1..60)) {
            let (gold, pred): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
            let r = classification_report(&gold, &pred).unwrap();
            let mean_f1 = r.per_class.iter().map(|c| c.f1).sum::<f64>() / 3.0;
            prop_assert!((r.macro_f1 - mean_f1).abs() < EPS);
            let trace: usize = (0..3).map(|k| r.confusion[k][k]).sum();
            prop_assert!((r.accuracy - trace as f64 / gold.len() as f64).abs() < EPS);
            for c in &r.per_class {
                let row: usize = r.confusion[c.label.index()].iter().sum();
                prop_assert_eq!(row, gold.iter().filter(|&&g| g == c.label).count());
                prop_assert_eq!(row, c.support);
                for v in [c.precision, c.recall, c.f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }

        #[test]
        fn self_scores_are_perfect(words in prop::collection::vec("[a-z]{1,8}", 1..20)) {
            let s = words.join(" ");
            prop_assert!((bleu(&s, &[&s], &BleuOptions::default()) - 1.0).abs() < EPS);
            let r = rouge_l(&s, &s, DEFAULT_ROUGE_BETA);
            prop_assert_eq!((r.precision, r.recall, r.f), (1.0, 1.0, 1.0));
        }

        #[test]
        fn scores_stay_in_unit_interval(
            a in prop::collection::vec("[a-d]{1,2}", 1..15),
            b in prop::collection::vec("[a-d]{1,2}", 1..15),
        ) {
            let (a, b) = (a.join(" "), b.join(" "));
            let s = bleu(&a, &[&b], &BleuOptions::default());
            prop_assert!((0.0..=1.0).contains(&s));
            let r = rouge_l(&a, &b, DEFAULT_ROUGE_BETA);
            for v in [r.precision, r.recall, r.f] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
