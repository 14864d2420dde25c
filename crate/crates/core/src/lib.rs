//! Domain question maps from hierarchically structured textbooks.
//!
//! The pipeline parses a Markdown textbook into numbered sections, splits it
//! into section-confined chunks, generates one question per chunk, and links
//! the questions into a tree: the most similar questions are merged down to a
//! target count, every remaining pair is weighted by a mix of specificity
//! confidence and semantic similarity, and a maximum spanning tree keeps the
//! strongest links.
//!
//! - [`section`]: section ids, outline parsing, section-confined chunking
//! - [`pairs`]: labeled context pairs for training the specificity classifier
//! - [`scoring`]: embedding, classification and generation backends
//! - [`graph`]: node merging, weighted graph, spanning tree, path sampling, export
//! - [`metrics`]: BLEU, ROUGE-L and classification reports
//! - [`pipeline`]: staged, resumable end-to-end runs

pub mod graph;
pub mod metrics;
pub mod pairs;
pub mod pipeline;
pub mod section;
pub mod scoring;
pub mod text;
