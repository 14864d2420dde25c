//! Tokenization shared by the TF-IDF baseline and the text metrics.

/// Short description of [`word_tokens`], recorded in metric reports.
pub const TOKENIZER_ID: &str = "lowercase; split on whitespace and punctuation; punctuation dropped";

/// Lowercased runs of alphanumeric characters. Everything else separates tokens.
pub fn word_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

pub fn has_word(text: &str) -> bool {
    text.chars().any(char::is_alphanumeric)
}
