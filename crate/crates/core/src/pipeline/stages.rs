use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::artifacts::{read_text, write_json, write_text};
use super::{
    read_jsonl, stage_seed, write_jsonl, EmbeddingRecord, PipelineConfig, PipelineError,
    QuestionRecord, QuestionSource, ReferenceRecord, Stage,
};
use crate::graph::{
    build_weighted_graph, embeddings_jsonl, from_json, max_spanning_tree, reduce_nodes,
    threshold_filter, to_dot, to_graphml, to_json, QuestionGraph,
};
use crate::metrics::{classification_report, generation_scores, MetricReport};
use crate::pairs::{build_pair_dataset, read_pairs_jsonl, split_pairs, write_pairs_jsonl, PairHeader};
use crate::scoring::{
    joined_text, BackendKind, Embedder, Embedding, HierarchyOracle, PrecomputedScores, QaRef,
    QuestionGenerator, RemoteBackend, SpecificityClassifier, TemplateGenerator, TfidfEmbedder,
    UniformClassifier,
};
use crate::section::{chunk_sections, parse_outline, split_paragraphs, Chunk, OutlineWarning};

/// File names of the artifacts each stage writes into the output directory.
pub mod artifact {
    pub const OUTLINE: &str = "outline.json";
    pub const CHUNKS: &str = "chunks.jsonl";
    pub const INGEST_REPORT: &str = "ingest_report.json";
    pub const PAIRS: &str = "pairs.jsonl";
    pub const PAIR_STATS: &str = "pair_stats.json";
    pub const PAIR_STATS_TABLE: &str = "pair_stats.txt";
    pub const PAIR_SPLITS: [&str; 3] = ["pairs_train.jsonl", "pairs_val.jsonl", "pairs_test.jsonl"];
    pub const QUESTIONS: &str = "questions.jsonl";
    pub const EMBEDDINGS: &str = "embeddings.jsonl";
    pub const COMPLETE_GRAPH: &str = "complete_graph.json";
    pub const THRESHOLD: &str = "threshold.json";
    pub const TREE: &str = "tree.json";
    pub const DQM_JSON: &str = "dqm.json";
    pub const DQM_DOT: &str = "dqm.dot";
    pub const DQM_GRAPHML: &str = "dqm.graphml";
    pub const DQM_EMBEDDINGS: &str = "dqm_embeddings.jsonl";
    pub const EVAL_JSON: &str = "eval.json";
    pub const EVAL_TEXT: &str = "eval.txt";
}

use artifact::*;

/// Pairs classified per backend call in the eval stage.
const EVAL_BATCH: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub input: String,
    pub n_sections: usize,
    pub n_synthesized_sections: usize,
    pub n_chunks: usize,
    pub max_depth: usize,
    pub warnings: Vec<OutlineWarning>,
}

pub fn stage_path(config: &PipelineConfig, name: &str) -> PathBuf {
    config.output_dir.join(name)
}

pub fn load_tree(dir: &Path) -> Result<QuestionGraph, PipelineError> {
    let path = dir.join(TREE);
    if !path.is_file() {
        return Err(PipelineError::MissingArtifact {
            stage: Stage::Export,
            requires: Stage::Build,
            path,
        });
    }
    Ok(from_json(&read_text(&path)?)?)
}

/// Artifacts a stage reads, with the stage that writes each.
pub(super) fn requirements(stage: Stage) -> &'static [(&'static str, Stage)] {
    match stage {
        Stage::Ingest => &[],
        Stage::Pairs | Stage::Questions => &[(CHUNKS, Stage::Ingest)],
        Stage::Score => &[(QUESTIONS, Stage::Questions)],
        Stage::Build => &[(QUESTIONS, Stage::Questions), (EMBEDDINGS, Stage::Score)],
        Stage::Export => &[(TREE, Stage::Build), (EMBEDDINGS, Stage::Score)],
        Stage::Eval => &[(PAIRS, Stage::Pairs)],
    }
}

/// Every file whose content a stage depends on, keyed for the manifest.
pub(super) fn input_files(stage: Stage, config: &PipelineConfig) -> Vec<(String, PathBuf)> {
    let mut files: Vec<(String, PathBuf)> = requirements(stage)
        .iter()
        .map(|&(name, _)| (name.to_string(), config.output_dir.join(name)))
        .collect();
    match stage {
        Stage::Ingest => files.push(("input".into(), config.input.clone())),
        Stage::Build | Stage::Eval => {
            if let Some(p) = &config.specificity_scores {
                files.push(("specificity_scores".into(), p.clone()));
            }
            if let (Stage::Eval, Some(p)) = (stage, &config.eval.references) {
                files.push(("references".into(), p.clone()));
            }
        }
        _ => {}
    }
    files
}

/// The settings a stage's output depends on; hashed into the manifest.
pub(super) fn settings(stage: Stage, config: &PipelineConfig, seed: u64) -> serde_json::Value {
    match stage {
        Stage::Ingest => json!({ "chunking": config.chunking, "backend": config.backend }),
        Stage::Pairs => json!({ "seed": seed, "split": config.pairs.split }),
        Stage::Questions => json!({
            "question_generator": config.question_generator,
            "backend": (config.question_generator == QuestionSource::Remote).then_some(&config.backend),
        }),
        Stage::Score => json!({ "backend": config.backend }),
        Stage::Build => json!({
            "backend": config.backend,
            "lambda": config.lambda,
            "tau": config.tau,
            "target_nodes": config.target_nodes,
        }),
        Stage::Export => json!({}),
        Stage::Eval => json!({
            "backend": config.backend,
            "question_generator": config.question_generator,
            "eval": { "bleu": config.eval.bleu, "rouge_beta": config.eval.rouge_beta },
        }),
    }
}

/// Runs one stage and returns the names of the files it wrote.
pub(super) fn run(stage: Stage, config: &PipelineConfig, seed: u64) -> Result<Vec<String>, PipelineError> {
    let written: Vec<&str> = match stage {
        Stage::Ingest => ingest(config)?,
        Stage::Pairs => pairs(config, seed)?,
        Stage::Questions => questions(config)?,
        Stage::Score => score(config)?,
        Stage::Build => build(config)?,
        Stage::Export => export(config)?,
        Stage::Eval => eval(config)?,
    };
    Ok(written.into_iter().map(String::from).collect())
}

fn remote_backend(config: &PipelineConfig) -> Result<RemoteBackend, PipelineError> {
    let backend = RemoteBackend::new(&config.backend).map_err(|e| PipelineError::Config(e.to_string()))?;
    backend.health().map_err(|e| {
        PipelineError::Backend(format!(
            "model service at {} is unavailable (/health check failed): {e}",
            backend.endpoint()
        ))
    })?;
    Ok(backend)
}

fn embedder<S: AsRef<str>>(config: &PipelineConfig, corpus: &[S]) -> Result<Box<dyn Embedder>, PipelineError> {
    Ok(match config.backend.kind {
        BackendKind::Remote => Box::new(remote_backend(config)?),
        _ => Box::new(TfidfEmbedder::fit(corpus)),
    })
}

fn classifier(config: &PipelineConfig) -> Result<Box<dyn SpecificityClassifier>, PipelineError> {
    if let Some(path) = &config.specificity_scores {
        return Ok(Box::new(PrecomputedScores::from_path(path)?));
    }
    Ok(match config.backend.kind {
        BackendKind::HierarchyOracle => Box::new(HierarchyOracle),
        BackendKind::Remote => Box::new(remote_backend(config)?),
        _ => Box::new(UniformClassifier),
    })
}

fn generator(config: &PipelineConfig) -> Result<Box<dyn QuestionGenerator>, PipelineError> {
    Ok(match config.question_generator {
        QuestionSource::Template => Box::new(TemplateGenerator::default()),
        QuestionSource::Remote => Box::new(remote_backend(config)?),
    })
}

fn ingest(config: &PipelineConfig) -> Result<Vec<&'static str>, PipelineError> {
    let dir = &config.output_dir;
    let source = read_text(&config.input)?;
    let outline = parse_outline(&source)?;
    for w in &outline.warnings {
        log::warn!("{}: {w}", config.input.display());
    }
    let paragraphs: Vec<&str> = outline
        .sections
        .iter()
        .flat_map(|s| split_paragraphs(&source, s.body_span))
        .map(|p| &source[p.span.start()..p.span.end()])
        .collect();
    let embedder = embedder(config, &paragraphs)?;
    let chunks = chunk_sections(&source, &outline, embedder.as_ref(), &config.chunking)?;
    if chunks.is_empty() {
        return Err(PipelineError::Config(format!(
            "{} has no body text to chunk",
            config.input.display()
        )));
    }
    let report = IngestReport {
        input: config
            .input
            .file_name()
            .map_or_else(String::new, |n| n.to_string_lossy().into_owned()),
        n_sections: outline.sections.len(),
        n_synthesized_sections: outline.sections.iter().filter(|s| s.synthesized).count(),
        n_chunks: chunks.len(),
        max_depth: outline.sections.iter().map(|s| s.id.depth()).max().unwrap_or(0),
        warnings: outline.warnings.clone(),
    };
    write_json(&dir.join(OUTLINE), &outline)?;
    write_jsonl(&dir.join(CHUNKS), &chunks)?;
    write_json(&dir.join(INGEST_REPORT), &report)?;
    Ok(vec![OUTLINE, CHUNKS, INGEST_REPORT])
}

fn write_pairs_file(path: &Path, header: &PairHeader, pairs: &[crate::pairs::PairExample]) -> Result<(), PipelineError> {
    let io = |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut writer = BufWriter::new(File::create(path).map_err(io)?);
    write_pairs_jsonl(&mut writer, header, pairs)?;
    writer.flush().map_err(io)
}

fn pairs(config: &PipelineConfig, seed: u64) -> Result<Vec<&'static str>, PipelineError> {
    let dir = &config.output_dir;
    let chunks: Vec<Chunk> = read_jsonl(&dir.join(CHUNKS))?;
    let dataset = build_pair_dataset(&chunks, seed)?;
    write_pairs_file(&dir.join(PAIRS), &dataset.header, &dataset.pairs)?;
    write_json(&dir.join(PAIR_STATS), &dataset.stats)?;
    write_text(&dir.join(PAIR_STATS_TABLE), &dataset.stats.table())?;
    let mut written = vec![PAIRS, PAIR_STATS, PAIR_STATS_TABLE];
    if let Some([train, val]) = config.pairs.split {
        let parts = split_pairs(&dataset.pairs, train, val, stage_seed(seed, "split"))?;
        for (name, part) in PAIR_SPLITS.into_iter().zip(&parts) {
            let header = PairHeader {
                n_pairs: part.len(),
                ..dataset.header.clone()
            };
            write_pairs_file(&dir.join(name), &header, part)?;
            written.push(name);
        }
    }
    Ok(written)
}

fn node_id_for(chunk_id: &str) -> String {
    format!("q_{}", chunk_id.strip_prefix("chk_").unwrap_or(chunk_id))
}

fn questions(config: &PipelineConfig) -> Result<Vec<&'static str>, PipelineError> {
    let dir = &config.output_dir;
    let chunks: Vec<Chunk> = read_jsonl(&dir.join(CHUNKS))?;
    let generator = generator(config)?;
    let contexts: Vec<&str> = chunks.iter().map(|c| c.text.as_str()).collect();
    let generated = generator.generate(&contexts)?;
    if generated.len() != chunks.len() {
        return Err(crate::scoring::ScoringError::LengthMismatch {
            expected: chunks.len(),
            got: generated.len(),
        }
        .into());
    }
    let records: Vec<QuestionRecord> = chunks
        .into_iter()
        .zip(generated)
        .map(|(c, g)| QuestionRecord {
            node_id: node_id_for(&c.chunk_id),
            chunk_id: c.chunk_id,
            section_id: c.section_id,
            question: g.question,
            context: c.text,
            truncated: g.truncated,
        })
        .collect();
    write_jsonl(&dir.join(QUESTIONS), &records)?;
    Ok(vec![QUESTIONS])
}

fn score(config: &PipelineConfig) -> Result<Vec<&'static str>, PipelineError> {
    let dir = &config.output_dir;
    let questions: Vec<QuestionRecord> = read_jsonl(&dir.join(QUESTIONS))?;
    let texts: Vec<String> = questions
        .iter()
        .map(|q| joined_text(&q.question, &q.context))
        .collect();
    let embedder = embedder(config, &texts)?;
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let vectors = embedder.embed(&refs)?;
    let records: Vec<EmbeddingRecord> = questions
        .iter()
        .zip(vectors)
        .map(|(q, v)| EmbeddingRecord {
            node_id: q.node_id.clone(),
            vector: v.values().to_vec(),
        })
        .collect();
    write_jsonl(&dir.join(EMBEDDINGS), &records)?;
    Ok(vec![EMBEDDINGS])
}

fn embedding_map(path: &Path) -> Result<HashMap<String, Embedding>, PipelineError> {
    read_jsonl::<EmbeddingRecord>(path)?
        .into_iter()
        .map(|r| Ok((r.node_id, Embedding::normalized(r.vector)?)))
        .collect()
}

fn build(config: &PipelineConfig) -> Result<Vec<&'static str>, PipelineError> {
    let dir = &config.output_dir;
    let questions: Vec<QuestionRecord> = read_jsonl(&dir.join(QUESTIONS))?;
    let mut embeddings = embedding_map(&dir.join(EMBEDDINGS))?;
    let nodes: Vec<_> = questions
        .into_iter()
        .map(|q| {
            let e = embeddings.remove(&q.node_id);
            q.into_node(e)
        })
        .collect();
    let target = if config.target_nodes > nodes.len() {
        log::warn!(
            "target_nodes = {} exceeds the {} generated questions; keeping all of them",
            config.target_nodes,
            nodes.len()
        );
        nodes.len()
    } else {
        config.target_nodes
    };
    let classifier = classifier(config)?;
    let (reduced, merge_log) = reduce_nodes(nodes, target, classifier.as_ref())?;
    let complete = if reduced.len() >= 2 {
        build_weighted_graph(reduced, classifier.as_ref(), config.lambda, merge_log)?
    } else {
        QuestionGraph {
            lambda: config.lambda,
            nodes: reduced,
            edges: Vec::new(),
            merge_log,
        }
    };
    write_text(&dir.join(COMPLETE_GRAPH), &to_json(&complete)?)?;
    let (_, report) = threshold_filter(&complete, config.tau)?;
    log::info!(
        "tau = {}: {} edges, {} components, cycles: {}",
        report.tau,
        report.n_edges,
        report.n_components,
        report.has_cycle
    );
    write_json(&dir.join(THRESHOLD), &report)?;
    let tree = max_spanning_tree(&complete)?;
    write_text(&dir.join(TREE), &to_json(&tree)?)?;
    Ok(vec![COMPLETE_GRAPH, THRESHOLD, TREE])
}

fn export(config: &PipelineConfig) -> Result<Vec<&'static str>, PipelineError> {
    let dir = &config.output_dir;
    let mut tree = load_tree(dir)?;
    write_text(&dir.join(DQM_JSON), &to_json(&tree)?)?;
    write_text(&dir.join(DQM_DOT), &to_dot(&tree))?;
    write_text(&dir.join(DQM_GRAPHML), &to_graphml(&tree))?;
    let mut embeddings = embedding_map(&dir.join(EMBEDDINGS))?;
    for node in &mut tree.nodes {
        node.embedding = embeddings.remove(&node.node_id);
    }
    write_text(&dir.join(DQM_EMBEDDINGS), &embeddings_jsonl(&tree.nodes)?)?;
    Ok(vec![DQM_JSON, DQM_DOT, DQM_GRAPHML, DQM_EMBEDDINGS])
}

fn eval(config: &PipelineConfig) -> Result<Vec<&'static str>, PipelineError> {
    let dir = &config.output_dir;
    let path = dir.join(PAIRS);
    let file = File::open(&path).map_err(|source| PipelineError::Io {
        path: path.clone(),
        source,
    })?;
    let (_, pairs) = read_pairs_jsonl(BufReader::new(file))?;
    let classifier = classifier(config)?;
    let ids: Vec<[String; 2]> = (0..pairs.len())
        .map(|i| [format!("pair_{i}_a"), format!("pair_{i}_b")])
        .collect();
    let items: Vec<(QaRef, QaRef)> = pairs
        .iter()
        .zip(&ids)
        .map(|(p, [a, b])| {
            (
                QaRef {
                    id: a,
                    question: "",
                    context: &p.context_a,
                    section: Some(&p.section_a),
                },
                QaRef {
                    id: b,
                    question: "",
                    context: &p.context_b,
                    section: Some(&p.section_b),
                },
            )
        })
        .collect();
    let mut predicted = Vec::with_capacity(items.len());
    for batch in items.chunks(EVAL_BATCH) {
        predicted.extend(classifier.classify(batch)?.iter().map(|d| d.label()));
    }
    let gold: Vec<_> = pairs.iter().map(|p| p.label).collect();

    let mut report = MetricReport::new(config.eval.bleu, config.eval.rouge_beta);
    report.classification = Some(classification_report(&gold, &predicted)?);
    if let Some(refs_path) = &config.eval.references {
        let records: Vec<ReferenceRecord> = read_jsonl(refs_path)?;
        let generator = generator(config)?;
        let contexts: Vec<&str> = records.iter().map(|r| r.context.as_str()).collect();
        let generated = generator.generate(&contexts)?;
        let candidates: Vec<&str> = generated.iter().map(|g| g.question.as_str()).collect();
        let references: Vec<Vec<&str>> = records
            .iter()
            .map(|r| r.references.iter().map(String::as_str).collect())
            .collect();
        report.generation = Some(generation_scores(
            &candidates,
            &references,
            &config.eval.bleu,
            config.eval.rouge_beta,
        ));
    }
    write_json(&dir.join(EVAL_JSON), &report)?;
    write_text(&dir.join(EVAL_TEXT), &report.text())?;
    Ok(vec![EVAL_JSON, EVAL_TEXT])
}
