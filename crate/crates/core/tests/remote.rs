//! The HTTP client against an in-process mock of the model service.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{mpsc, Arc};
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use dqm_core::scoring::wire::{
    EmbedRequest, EmbedResponse, GenerateRequest, GenerateResponse, SpecificityRequest,
    SpecificityResponse, WireDistribution,
};
use dqm_core::scoring::{
    Embedder, QaRef, QuestionGenerator, RemoteBackend, ScorerBackendConfig, ScoringError,
    SpecificityClassifier,
};
use serde_json::{json, Value};

fn serve(app: Router) -> String {
    let (tx, rx) = mpsc::channel::<SocketAddr>();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(4)
            .enable_all()
            .build()
            .unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}

fn client(url: &str, tweak: impl FnOnce(&mut ScorerBackendConfig)) -> RemoteBackend {
    let mut config = ScorerBackendConfig::remote(url);
    config.timeout_secs = 5.0;
    tweak(&mut config);
    RemoteBackend::new(&config)
        .unwrap()
        .with_backoff(Duration::from_millis(5))
}

fn pair<'a>(id: &'a str, text: &'a str) -> QaRef<'a> {
    QaRef {
        id,
        question: text,
        context: text,
        section: None,
    }
}

#[derive(Default)]
struct Counters {
    requests: AtomicUsize,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
}

/// Embeds text `"t<i>"` as the unnormalized vector `[i + 1, 1]`.
async fn embed(State(c): State<Arc<Counters>>, Json(req): Json<EmbedRequest>) -> Json<EmbedResponse> {
    c.requests.fetch_add(1, Ordering::SeqCst);
    let now = c.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    c.max_in_flight.fetch_max(now, Ordering::SeqCst);
    tokio::time::sleep(Duration::from_millis(30)).await;
    c.in_flight.fetch_sub(1, Ordering::SeqCst);
    let vectors = req
        .texts
        .iter()
        .map(|t| vec![t[1..].parse::<f64>().unwrap() + 1.0, 1.0])
        .collect();
    Json(EmbedResponse { vectors })
}

#[test]
fn embed_batches_preserve_order_and_bound_concurrency() {
    let counters = Arc::new(Counters::default());
    let url = serve(
        Router::new()
            .route("/v1/embed", post(embed))
            .with_state(counters.clone()),
    );
    let backend = client(&url, |c| {
        c.batch_size = 16;
        c.max_in_flight = 2;
    });
    let texts: Vec<String> = (0..40).map(|i| format!("t{i}")).collect();
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let vectors = backend.embed(&refs).unwrap();

    assert_eq!(vectors.len(), 40);
    assert_eq!(counters.requests.load(Ordering::SeqCst), 3);
    assert!(counters.max_in_flight.load(Ordering::SeqCst) <= 2);
    for (i, v) in vectors.iter().enumerate() {
        let x = i as f64 + 1.0;
        let norm = (x * x + 1.0).sqrt();
        assert!((v.values()[0] - x / norm).abs() < 1e-12, "vector {i} out of order");
        let len: f64 = v.values().iter().map(|a| a * a).sum();
        assert!((len - 1.0).abs() < 1e-9);
    }
}

#[test]
fn embed_rejects_empty_text_before_sending() {
    let backend = client("http://127.0.0.1:9", |_| {});
    assert!(matches!(
        backend.embed(&["fine", "  "]),
        Err(ScoringError::EmptyText { index: 1 })
    ));
}

#[test]
fn specificity_validates_and_renormalizes() {
    let url = serve(Router::new().route(
        "/v1/specificity",
        post(|Json(req): Json<SpecificityRequest>| async move {
            let distributions = req
                .pairs
                .iter()
                .map(|p| match p.q_a.as_str() {
                    // sums to 1.0005: inside the wire tolerance
                    "near" => WireDistribution {
                        general: 0.6005,
                        specific: 0.2,
                        other: 0.2,
                    },
                    _ => WireDistribution {
                        general: 0.5,
                        specific: 0.3,
                        other: 0.3,
                    },
                })
                .collect();
            Json(SpecificityResponse { distributions })
        }),
    ));
    let backend = client(&url, |_| {});
    let ok = backend.classify(&[(pair("a", "near"), pair("b", "x"))]).unwrap();
    let sum = ok[0].general + ok[0].specific + ok[0].other;
    assert!((sum - 1.0).abs() < 1e-12);
    assert!((ok[0].other - 0.2 / 1.0005).abs() < 1e-12);

    let err = backend
        .classify(&[(pair("a", "near"), pair("b", "x")), (pair("c", "far"), pair("d", "x"))])
        .unwrap_err();
    assert!(matches!(err, ScoringError::InvalidDistribution(_)), "{err}");
}

#[test]
fn specificity_request_uses_wire_field_names() {
    let url = serve(Router::new().route(
        "/v1/specificity",
        post(|Json(body): Json<Value>| async move {
            let p = &body["pairs"][0];
            let expected = json!({"q_a": "qa", "c_a": "ca", "q_b": "qb", "c_b": "cb"});
            let d = if *p == expected { (0.7, 0.2, 0.1) } else { (0.0, 0.0, 1.0) };
            Json(json!({"distributions": [{"general": d.0, "specific": d.1, "other": d.2}]}))
        }),
    ));
    let backend = client(&url, |_| {});
    let a = QaRef {
        id: "a",
        question: "qa",
        context: "ca",
        section: None,
    };
    let b = QaRef {
        id: "b",
        question: "qb",
        context: "cb",
        section: None,
    };
    let d = backend.classify(&[(a, b)]).unwrap();
    assert!((d[0].general - 0.7).abs() < 1e-12, "{:?}", d[0]);
}

#[test]
fn transient_failures_are_retried() {
    let calls = Arc::new(AtomicUsize::new(0));
    let url = serve(
        Router::new()
            .route(
                "/v1/generate",
                post(
                    |State(calls): State<Arc<AtomicUsize>>, Json(req): Json<GenerateRequest>| async move {
                        if calls.fetch_add(1, Ordering::SeqCst) < 2 {
                            return Err(StatusCode::SERVICE_UNAVAILABLE);
                        }
                        Ok(Json(GenerateResponse {
                            questions: req.contexts.iter().map(|c| format!("What is {c}?")).collect(),
                            truncated: Some(vec![false; req.contexts.len()]),
                        }))
                    },
                ),
            )
            .with_state(calls.clone()),
    );
    let backend = client(&url, |c| c.retries = 2);
    let out = backend.generate(&["ATP"]).unwrap();
    assert_eq!(out[0].question, "What is ATP?");
    assert_eq!(calls.load(Ordering::SeqCst), 3);
}

#[test]
fn retries_give_up_with_attempt_count() {
    let url = serve(Router::new().route(
        "/v1/generate",
        post(|| async { (StatusCode::INTERNAL_SERVER_ERROR, "model crashed") }),
    ));
    let backend = client(&url, |c| c.retries = 2);
    match backend.generate(&["x"]) {
        Err(ScoringError::Backend { attempts, message, url }) => {
            assert_eq!(attempts, 3);
            assert!(message.contains("500"), "{message}");
            assert!(message.contains("model crashed"), "{message}");
            assert!(url.ends_with("/v1/generate"));
        }
        other => panic!("expected backend error, got {other:?}"),
    }
}

#[test]
fn client_errors_are_not_retried() {
    let calls = Arc::new(AtomicUsize::new(0));
    let url = serve(
        Router::new()
            .route(
                "/v1/embed",
                post(|State(calls): State<Arc<AtomicUsize>>| async move {
                    calls.fetch_add(1, Ordering::SeqCst);
                    (StatusCode::BAD_REQUEST, "texts: expected a list")
                }),
            )
            .with_state(calls.clone()),
    );
    let backend = client(&url, |c| c.retries = 2);
    assert!(matches!(
        backend.embed(&["a"]),
        Err(ScoringError::Backend { attempts: 1, .. })
    ));
    assert_eq!(calls.load(Ordering::SeqCst), 1);
}

#[test]
fn generation_contract_is_enforced() {
    let url = serve(Router::new().route(
        "/v1/generate",
        post(|Json(req): Json<GenerateRequest>| async move {
            let questions: Vec<String> = req
                .contexts
                .iter()
                .map(|c| if c == "blank" { String::new() } else { format!("Why {c}?") })
                .collect();
            let truncated = req.contexts.iter().map(|c| c.len() > 10).collect();
            Json(GenerateResponse {
                questions,
                truncated: Some(truncated),
            })
        }),
    ));
    let backend = client(&url, |_| {});
    let out = backend.generate(&["short", "a rather long context"]).unwrap();
    assert!(!out[0].truncated);
    assert!(out[1].truncated);
    assert!(matches!(
        backend.generate(&["short", "blank"]),
        Err(ScoringError::EmptyGeneration { index: 1 })
    ));
}

#[test]
fn short_batches_are_rejected() {
    let url = serve(Router::new().route(
        "/v1/embed",
        post(|| async { Json(json!({"vectors": [[1.0, 0.0]]})) }),
    ));
    let backend = client(&url, |_| {});
    assert!(matches!(
        backend.embed(&["a", "b"]),
        Err(ScoringError::LengthMismatch { expected: 2, got: 1 })
    ));
}

#[test]
fn health_reports_status() {
    let url = serve(
        Router::new().route(
            "/health",
            get(|| async { Json(json!({"status": "ok", "model_ids": {"embedder": "mini-lm"}})) }),
        ),
    );
    let status = client(&url, |_| {}).health().unwrap();
    assert_eq!(status.model_ids["embedder"], "mini-lm");

    let url = serve(Router::new().route("/health", get(|| async { Json(json!({"status": "loading"})) })));
    let err = client(&url, |_| {}).health().unwrap_err();
    assert!(err.to_string().contains("loading"), "{err}");
}

#[test]
fn unreachable_service_is_a_backend_error() {
    let backend = client("http://127.0.0.1:9", |c| c.retries = 1);
    assert!(matches!(
        backend.health(),
        Err(ScoringError::Backend { attempts: 2, .. })
    ));
}
