//! End-to-end runs of the staged pipeline on the fixture textbook.

use std::path::{Path, PathBuf};

use dqm_core::graph::{from_json, sample_path};
use dqm_core::pipeline::{
    artifact, load_tree, run_pipeline, Manifest, PipelineConfig, PipelineError, Stage, StageStatus,
};
use dqm_core::scoring::BackendKind;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn config(out: &Path) -> PipelineConfig {
    PipelineConfig {
        input: fixture("mini_textbook.md"),
        output_dir: out.to_path_buf(),
        seed: 7,
        target_nodes: 20,
        ..PipelineConfig::default()
    }
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn full_run_builds_a_spanning_tree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let outcomes = run_pipeline(&cfg, &Stage::ALL, false).unwrap();
    assert_eq!(outcomes.len(), 7);
    assert!(outcomes.iter().all(|o| o.status == StageStatus::Ran));

    let manifest = Manifest::load(dir.path()).unwrap();
    assert_eq!(manifest.stages.len(), 7);

    let tree = load_tree(dir.path()).unwrap();
    assert_eq!(tree.nodes.len(), 20);
    assert_eq!(tree.edges.len(), 19);
    assert!(tree.is_spanning_tree().unwrap());

    let exported = from_json(&String::from_utf8(read(dir.path(), artifact::DQM_JSON)).unwrap()).unwrap();
    assert_eq!(exported.nodes.len(), 20);
    let absorbed: usize = exported.nodes.iter().map(|n| n.absorbed.len()).sum();
    assert_eq!(absorbed, exported.merge_log.len());

    let dot = String::from_utf8(read(dir.path(), artifact::DQM_DOT)).unwrap();
    assert!(dot.starts_with("digraph dqm"));
    assert!(String::from_utf8(read(dir.path(), artifact::DQM_GRAPHML))
        .unwrap()
        .contains("<graphml"));

    let path = sample_path(&tree, 3, 1).unwrap();
    assert_eq!(path.len(), 3);
}

#[test]
fn rerun_skips_and_force_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    run_pipeline(&cfg, &Stage::ALL, false).unwrap();
    let first = read(dir.path(), artifact::DQM_JSON);

    let again = run_pipeline(&cfg, &Stage::ALL, false).unwrap();
    assert!(again.iter().all(|o| o.status == StageStatus::Skipped));

    let forced = run_pipeline(&cfg, &Stage::ALL, true).unwrap();
    assert!(forced.iter().all(|o| o.status == StageStatus::Ran));
    assert_eq!(read(dir.path(), artifact::DQM_JSON), first);
}

#[test]
fn changed_settings_rerun_downstream_only() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    run_pipeline(&cfg, &Stage::ALL, false).unwrap();
    cfg.tau = 0.5;
    let outcomes = run_pipeline(&cfg, &Stage::ALL, false).unwrap();
    let ran: Vec<_> = outcomes
        .iter()
        .filter(|o| o.status == StageStatus::Ran)
        .map(|o| o.stage)
        .collect();
    assert!(ran.contains(&Stage::Build));
    assert!(!ran.contains(&Stage::Ingest));
    assert!(!ran.contains(&Stage::Questions));
}

#[test]
fn edited_output_invalidates_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    run_pipeline(&cfg, &[Stage::Ingest], false).unwrap();
    std::fs::write(dir.path().join(artifact::CHUNKS), "").unwrap();
    let outcomes = run_pipeline(&cfg, &[Stage::Ingest], false).unwrap();
    assert_eq!(outcomes[0].status, StageStatus::Ran);
}

#[test]
fn separate_directories_give_identical_output() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_pipeline(&config(a.path()), &Stage::ALL, false).unwrap();
    run_pipeline(&config(b.path()), &Stage::ALL, false).unwrap();
    for name in [
        artifact::CHUNKS,
        artifact::PAIRS,
        artifact::QUESTIONS,
        artifact::TREE,
        artifact::DQM_JSON,
        artifact::DQM_DOT,
        artifact::DQM_GRAPHML,
    ] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name} differs");
    }
}

#[test]
fn missing_upstream_artifact_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let err = run_pipeline(&config(dir.path()), &[Stage::Build], false).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(matches!(err, PipelineError::MissingArtifact { .. }));
    assert!(err.to_string().contains("requires: questions"), "{err}");
}

#[test]
fn oversized_target_is_clamped() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.target_nodes = 10_000;
    run_pipeline(&cfg, &Stage::ALL, false).unwrap();
    let tree = load_tree(dir.path()).unwrap();
    assert!(tree.merge_log.is_empty());
    assert!(tree.is_spanning_tree().unwrap());
}

#[test]
fn oracle_backend_scores_pairs_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.backend.kind = BackendKind::HierarchyOracle;
    run_pipeline(&cfg, &Stage::ALL, false).unwrap();
    let eval: serde_json::Value =
        serde_json::from_slice(&read(dir.path(), artifact::EVAL_JSON)).unwrap();
    let f1 = eval["classification"]["macro_f1"].as_f64().unwrap();
    assert!((f1 - 1.0).abs() < 1e-12, "{eval}");
}

#[test]
fn unreachable_remote_backend_fails_with_backend_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.backend.kind = BackendKind::Remote;
    cfg.backend.endpoint = Some("http://127.0.0.1:9".into());
    cfg.backend.retries = 0;
    let err = run_pipeline(&cfg, &[Stage::Ingest], false).unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");
    assert!(err.to_string().contains("/health"), "{err}");
}

/// Set `DQM_UPDATE_GOLDEN=1` to rewrite the golden tree after an intended change.
#[test]
fn tree_matches_golden() {
    let dir = tempfile::tempdir().unwrap();
    run_pipeline(&config(dir.path()), &Stage::ALL, false).unwrap();
    let tree = read(dir.path(), artifact::TREE);
    let golden = fixture("golden/tree.json");
    if std::env::var_os("DQM_UPDATE_GOLDEN").is_some() {
        std::fs::write(&golden, &tree).unwrap();
    }
    let expected = std::fs::read(&golden).expect("golden tree missing; run with DQM_UPDATE_GOLDEN=1");
    assert!(tree == expected, "tree.json differs from fixtures/golden/tree.json");
}
