use std::collections::BTreeMap;

use super::{Embedder, Embedding, ScoringError};
use crate::text::word_tokens;

/// Dense TF-IDF embeddings over a vocabulary fitted once on a corpus.
///
/// Term frequency is the raw count; `idf = ln((1 + N) / (1 + df)) + 1`.
/// Vectors are L2-normalized. Words outside the fitted vocabulary are ignored.
#[derive(Debug, Clone)]
pub struct TfidfEmbedder {
    vocabulary: BTreeMap<String, usize>,
    idf: Vec<f64>,
}

impl TfidfEmbedder {
    pub fn fit<S: AsRef<str>>(corpus: &[S]) -> Self {
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in corpus {
            let mut tokens = word_tokens(doc.as_ref());
            tokens.sort();
            tokens.dedup();
            for t in tokens {
                *df.entry(t).or_default() += 1;
            }
        }
        let n = corpus.len() as f64;
        let mut vocabulary = BTreeMap::new();
        let mut idf = Vec::with_capacity(df.len());
        for (index, (term, count)) in df.into_iter().enumerate() {
            idf.push(((1.0 + n) / (1.0 + count as f64)).ln() + 1.0);
            vocabulary.insert(term, index);
        }
        Self { vocabulary, idf }
    }

    pub fn dim(&self) -> usize {
        self.idf.len()
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.vocabulary.get(term).map(|&i| self.idf[i])
    }

    fn embed_one(&self, index: usize, text: &str) -> Result<Embedding, ScoringError> {
        let tokens = word_tokens(text);
        if tokens.is_empty() {
            return Err(ScoringError::EmptyText { index });
        }
        let mut values = vec![0.0; self.dim()];
        for t in &tokens {
            if let Some(&i) = self.vocabulary.get(t) {
                values[i] += 1.0;
            }
        }
        for (v, idf) in values.iter_mut().zip(&self.idf) {
            *v *= idf;
        }
        Embedding::normalized(values).map_err(|e| match e {
            ScoringError::UndefinedCosine => ScoringError::ZeroVector { index },
            other => other,
        })
    }
}

impl Embedder for TfidfEmbedder {
    fn embed(&self, texts: &[&str]) -> Result<Vec<Embedding>, ScoringError> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| self.embed_one(i, t))
            .collect()
    }
}
