mod support;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use mtloop_core::feedback::{ExampleStatus, ModelKind, NewTranslation};
use mtloop_core::{Direction, Language};
use mtloop_service::schema::{Alignment, ErrorResponse, HealthResponse, StatsResponse, TranslateResponse};
use mtloop_service::ModelRegistry;
use serde_json::{json, Value};
use support::{app, app_with, sample_source, TestApp, TOKEN};

/// Decode as the published response type and check the alignment shape.
fn check_translation(body: &Value) -> TranslateResponse {
    let resp: TranslateResponse = serde_json::from_value(body.clone()).expect("response matches schema");
    assert_eq!(resp.v, 1);
    assert!((0.0..=5.0).contains(&resp.stars_raw));
    assert!((0.0..=5.0).contains(&resp.stars));
    assert!((resp.stars - (resp.stars_raw * 10.0).round() / 10.0).abs() < 1e-12);
    assert_eq!(resp.output, resp.tgt_tokens.join(" "));
    let (ls, lt) = (resp.src_tokens.len(), resp.tgt_tokens.len());
    match &resp.alignment {
        Alignment::Hard { links } => {
            assert!(links.iter().all(|&[i, j]| i < ls && j < lt), "{links:?}");
        }
        Alignment::Soft { matrix } => {
            assert_eq!(matrix.len(), lt);
            for row in matrix {
                assert_eq!(row.len(), ls);
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            }
        }
    }
    assert_eq!(resp.dict_src.len(), ls);
    assert_eq!(resp.dict_tgt.len(), lt);
    for terms in resp.dict_src.iter().chain(&resp.dict_tgt) {
        assert!(terms.terms.len() <= 15);
    }
    resp
}

async fn translate(app: &TestApp, direction: Direction, model: &str) -> TranslateResponse {
    let (status, body) = app
        .post(
            "/api/translate",
            json!({"text": sample_source(direction), "direction": direction.as_str(), "model": model}),
        )
        .await;
    assert_eq!(status, StatusCode::OK, "{body}");
    check_translation(&body)
}

fn error_code(body: &Value) -> String {
    let err: ErrorResponse = serde_json::from_value(body.clone()).expect("error body matches schema");
    err.error.code
}

#[tokio::test]
async fn translate_smt_gives_hard_alignment() {
    let app = app();
    for direction in Direction::ALL {
        let resp = translate(&app, direction, "smt").await;
        assert!(matches!(resp.alignment, Alignment::Hard { .. }));
        let record = app.state.store.translation(&resp.translation_id).unwrap();
        assert_eq!((record.model, record.direction), (ModelKind::Smt, direction));
        assert_eq!(record.stars, resp.stars_raw);
    }
}

#[tokio::test]
async fn translate_nmt_gives_soft_alignment() {
    let app = app();
    for direction in Direction::ALL {
        let resp = translate(&app, direction, "nmt").await;
        assert!(matches!(resp.alignment, Alignment::Soft { .. }));
    }
}

#[tokio::test]
async fn dictionary_panels_find_known_words() {
    let app = app();
    let resp = translate(&app, Direction::ChrEn, "smt").await;
    let first = &resp.dict_src[0];
    assert_eq!(first.token, resp.src_tokens[0]);
    assert_eq!(first.terms[0].headword, resp.src_tokens[0]);
}

#[tokio::test]
async fn bad_translate_requests_are_rejected_without_writes() {
    let app = app();
    let long = "a".repeat(2001);
    let cases = [
        json!({"text": "", "direction": "chr-en", "model": "smt"}),
        json!({"text": "   ", "direction": "chr-en", "model": "smt"}),
        json!({"text": long, "direction": "chr-en", "model": "smt"}),
        json!({"text": "hello", "direction": "fr-en", "model": "smt"}),
        json!({"text": "hello", "direction": "en-chr", "model": "rbmt"}),
        json!({"direction": "en-chr", "model": "smt"}),
        json!({"text": "hello", "direction": "en-chr", "model": "smt", "extra": 1}),
    ];
    for body in cases {
        let (status, resp) = app.post("/api/translate", body.clone()).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        assert_eq!(error_code(&resp), "bad_request");
    }
    let raw = Request::builder()
        .method(Method::POST)
        .uri("/api/translate")
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from("{not json"))
        .unwrap();
    assert_eq!(app.send(raw).await.0, StatusCode::BAD_REQUEST);
    let no_type = Request::builder()
        .method(Method::POST)
        .uri("/api/translate")
        .body(Body::from(r#"{"text":"a","direction":"en-chr","model":"smt"}"#))
        .unwrap();
    assert_eq!(app.send(no_type).await.0, StatusCode::BAD_REQUEST);
    let (status, _) = app
        .post("/api/translate", json!({"text": "hi", "direction": "en-chr", "model": "smt", "example_id": "nope"}))
        .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(app.stored_lines(), 0);
}

#[tokio::test]
async fn missing_model_is_503() {
    let app = app_with(ModelRegistry::default());
    for model in ["smt", "nmt"] {
        let (status, body) = app
            .post("/api/translate", json!({"text": "hello", "direction": "en-chr", "model": model}))
            .await;
        assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
        assert_eq!(error_code(&body), "model_unavailable");
    }
    assert_eq!(app.stored_lines(), 0);
}

#[tokio::test]
async fn examples_filter_by_language_and_status() {
    let app = app();
    let a = app.state.store.add_example(Language::Chr, "ᎣᏏᏲ").unwrap();
    app.state.store.add_example(Language::Chr, "ᏩᏙ").unwrap();
    app.state.store.add_example(Language::En, "thank you").unwrap();

    let (status, all) = app.get("/api/examples").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(all["examples"].as_array().unwrap().len(), 3);
    let (_, chr) = app.get("/api/examples?lang=chr&status=unlabeled").await;
    let chr = chr["examples"].as_array().unwrap();
    assert_eq!(chr.len(), 2);
    assert!(chr.iter().all(|e| e["language"] == "chr" && e["status"] == "unlabeled"));
    assert_eq!(app.get("/api/examples?lang=fr").await.0, StatusCode::BAD_REQUEST);
    assert_eq!(app.get("/api/examples?status=done").await.0, StatusCode::BAD_REQUEST);
    let (_, next) = app.get("/api/examples/next?lang=chr").await;
    assert_eq!(next["example"]["id"], a.id.as_str());
    assert_eq!(app.get("/api/examples/next").await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn common_feedback_needs_terms_and_rating() {
    let app = app();
    let t = translate(&app, Direction::EnChr, "nmt").await.translation_id;
    let before = app.stored_lines();
    let post = |body: Value| app.post("/api/feedback/common", body);
    assert_eq!(post(json!({"translation_id": t, "helpfulness": 3, "accepted_terms": false})).await.0, StatusCode::FORBIDDEN);
    assert_eq!(post(json!({"translation_id": t, "helpfulness": 3})).await.0, StatusCode::FORBIDDEN);
    assert_eq!(post(json!({"translation_id": t, "helpfulness": 7, "accepted_terms": true})).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(post(json!({"translation_id": t, "comment": "nice", "accepted_terms": true})).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(post(json!({"translation_id": "nope", "helpfulness": 3, "accepted_terms": true})).await.0, StatusCode::NOT_FOUND);
    assert_eq!(app.stored_lines(), before);
    let (status, body) = post(json!({"translation_id": t, "helpfulness": 3, "accepted_terms": true})).await;
    assert_eq!(status, StatusCode::CREATED);
    assert!(body["id"].as_str().is_some_and(|id| !id.is_empty()));
    assert_eq!(app.state.store.common_feedback().len(), 1);
}

#[tokio::test]
async fn expert_feedback_requires_token_and_labels_example() {
    let app = app();
    let example = app.state.store.add_example(Language::Chr, &sample_source(Direction::ChrEn)).unwrap();
    let (status, body) = app
        .post(
            "/api/translate",
            json!({"text": example.text, "direction": "chr-en", "model": "nmt", "example_id": example.id}),
        )
        .await;
    assert_eq!(status, StatusCode::OK);
    let t = check_translation(&body).translation_id;
    let good = json!({"translation_id": t, "quality": 4, "correction": "a fixed sentence"});
    let before = app.stored_lines();

    let expert = |body: Value, token: Option<&'static str>| app.call(Method::POST, "/api/feedback/expert", Some(body), token);
    assert_eq!(expert(good.clone(), None).await.0, StatusCode::UNAUTHORIZED);
    assert_eq!(expert(good.clone(), Some("guess")).await.0, StatusCode::UNAUTHORIZED);
    // auth is checked before the body
    assert_eq!(expert(json!({}), None).await.0, StatusCode::UNAUTHORIZED);
    let empty = json!({"translation_id": t, "quality": 4, "correction": " "});
    assert_eq!(expert(empty, Some(TOKEN)).await.0, StatusCode::BAD_REQUEST);
    let six = json!({"translation_id": t, "quality": 6, "correction": "x"});
    assert_eq!(expert(six, Some(TOKEN)).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(app.stored_lines(), before);

    let (status, body) = expert(good.clone(), Some(TOKEN)).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["example_status"], "labeled");
    assert_eq!(app.state.store.example(&example.id).unwrap().status, ExampleStatus::Labeled);
    let (_, labeled) = app.get("/api/examples?lang=chr&status=labeled").await;
    assert_eq!(labeled["examples"].as_array().unwrap().len(), 1);
    // a second correction is stored but the example does not change again
    let lines = app.stored_lines();
    assert_eq!(expert(good, Some(TOKEN)).await.0, StatusCode::CREATED);
    assert_eq!(app.stored_lines(), lines + 1);
}

#[tokio::test]
async fn stats_require_token_and_mirror_store() {
    let app = app();
    assert_eq!(app.get("/api/stats").await.0, StatusCode::UNAUTHORIZED);
    assert_eq!(app.call(Method::GET, "/api/stats", None, Some("common")).await.0, StatusCode::UNAUTHORIZED);
    let (status, fresh) = app.call(Method::GET, "/api/stats", None, Some(TOKEN)).await;
    assert_eq!(status, StatusCode::OK);
    let fresh: StatsResponse = serde_json::from_value(fresh).unwrap();
    assert_eq!(fresh.cells.len(), 4);
    assert!(fresh.cells.iter().all(|c| c.count == 0 && c.mean_quality.is_none() && c.pearson.is_none()));

    for (i, (model, direction, stars, quality)) in [
        (ModelKind::Smt, Direction::ChrEn, 1.0, 1),
        (ModelKind::Smt, Direction::ChrEn, 2.5, 3),
        (ModelKind::Nmt, Direction::EnChr, 4.0, 5),
        (ModelKind::Nmt, Direction::EnChr, 3.0, 2),
        (ModelKind::Nmt, Direction::EnChr, 2.0, 2),
    ]
    .into_iter()
    .enumerate()
    {
        let record = app
            .state
            .store
            .record_translation(NewTranslation {
                source: format!("s{i}"),
                direction,
                model,
                output: "o".into(),
                stars,
                example_id: None,
            })
            .unwrap();
        let body = json!({"translation_id": record.id, "quality": quality, "correction": "c"});
        assert_eq!(app.call(Method::POST, "/api/feedback/expert", Some(body), Some(TOKEN)).await.0, StatusCode::CREATED);
    }
    let (_, seeded) = app.call(Method::GET, "/api/stats", None, Some(TOKEN)).await;
    let seeded: StatsResponse = serde_json::from_value(seeded).unwrap();
    assert_eq!(seeded.cells, app.state.store.stats().cells);
    assert_eq!(seeded.cells.iter().map(|c| c.count).sum::<usize>(), 5);
}

#[tokio::test]
async fn health_reports_gaps() {
    let app = app();
    let (status, body) = app.get("/api/health").await;
    assert_eq!(status, StatusCode::OK);
    let health: HealthResponse = serde_json::from_value(body).unwrap();
    assert_eq!(health.status, "ok");
    assert_eq!(health.model_versions.len(), 4);
    assert!(health.missing.is_empty());

    let empty = app_with(ModelRegistry::default());
    let health: HealthResponse = serde_json::from_value(empty.get("/api/health").await.1).unwrap();
    assert_eq!(health.status, "degraded");
    assert!(health.missing.contains(&"smt-chr-en".to_string()));

    // partial model directory: only the NMT models
    let partial = tempfile::tempdir().unwrap();
    for name in ["nmt-chr-en", "nmt-en-chr"] {
        copy_dir(&support::model_dir().join(name), &partial.path().join(name));
    }
    let some = app_with(ModelRegistry::load(partial.path()));
    let health: HealthResponse = serde_json::from_value(some.get("/api/health").await.1).unwrap();
    assert_eq!(health.status, "degraded");
    assert_eq!(health.missing, vec!["smt-chr-en", "smt-en-chr"]);

    let gone = self::app();
    std::fs::remove_dir_all(gone.data.path()).unwrap();
    let health: HealthResponse = serde_json::from_value(gone.get("/api/health").await.1).unwrap();
    assert_eq!(health.status, "degraded");
    assert!(!health.data_dir_writable);
}

fn copy_dir(from: &std::path::Path, to: &std::path::Path) {
    std::fs::create_dir_all(to).unwrap();
    for entry in std::fs::read_dir(from).unwrap() {
        let entry = entry.unwrap();
        std::fs::copy(entry.path(), to.join(entry.file_name())).unwrap();
    }
}
