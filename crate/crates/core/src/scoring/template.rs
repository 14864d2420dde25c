use super::{GeneratedQuestion, QuestionGenerator, ScoringError};

pub const TEMPLATE_PREFIX: &str = "What does the following describe:";
pub const TEMPLATE_WORDS: usize = 8;

/// Deterministic stand-in for a question generation model: quotes the first
/// few words of the context back as a question.
#[derive(Debug, Clone, Copy)]
pub struct TemplateGenerator {
    pub words: usize,
}

impl Default for TemplateGenerator {
    fn default() -> Self {
        Self {
            words: TEMPLATE_WORDS,
        }
    }
}

impl TemplateGenerator {
    fn question_for(&self, index: usize, context: &str) -> Result<String, ScoringError> {
        let words: Vec<&str> = context
            .split_whitespace()
            .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()))
            .filter(|w| !w.is_empty())
            .take(self.words)
            .collect();
        if words.is_empty() {
            return Err(ScoringError::EmptyText { index });
        }
        Ok(format!("{TEMPLATE_PREFIX} {}?", words.join(" ")))
    }
}

impl QuestionGenerator for TemplateGenerator {
    fn generate(&self, contexts: &[&str]) -> Result<Vec<GeneratedQuestion>, ScoringError> {
        contexts
            .iter()
            .enumerate()
            .map(|(i, c)| {
                Ok(GeneratedQuestion {
                    question: self.question_for(i, c)?,
                    truncated: false,
                })
            })
            .collect()
    }
}
