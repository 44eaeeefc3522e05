#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use axum::body::{to_bytes, Body};
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use mtloop_core::dictionary::DictionaryIndex;
use mtloop_core::feedback::FeedbackStore;
use mtloop_core::nmt::{train_nmt, NmtTrainConfig};
use mtloop_core::qe::{build_kfold_dataset, gbt_train, GbtParams, SmtFoldPipeline};
use mtloop_core::smt::{train_smt, SmtTrainConfig};
use mtloop_core::synthetic::{SyntheticConfig, SyntheticLexicon};
use mtloop_core::Direction;
use mtloop_service::models::{model_name, qe_file_name};
use mtloop_service::{router, AppState, ModelRegistry};
use mtloop_core::feedback::ModelKind;
use serde_json::Value;
use tower::ServiceExt;

pub const TOKEN: &str = "expert-secret";

fn lexicon() -> SyntheticLexicon {
    SyntheticLexicon::generate(SyntheticConfig {
        concepts: 80,
        ..SyntheticConfig::default()
    })
    .unwrap()
}

/// Write all four models plus both QE regressors into `dir`.
pub fn build_models(dir: &Path) {
    let corpus = lexicon().corpus(150);
    for direction in Direction::ALL {
        let oriented = corpus.oriented(direction);
        let smt = train_smt(&oriented, &SmtTrainConfig::default()).unwrap();
        smt.save(&dir.join(model_name(ModelKind::Smt, direction))).unwrap();
        let data = build_kfold_dataset(&oriented, 3, 1, &SmtFoldPipeline::default()).unwrap();
        let qe = gbt_train(
            &data,
            GbtParams {
                max_depth: 3,
                eta: 0.1,
                rounds: 20,
            },
        )
        .unwrap();
        qe.save(&dir.join(qe_file_name(direction))).unwrap();
        let nmt = train_nmt(&oriented, &NmtTrainConfig::default()).unwrap();
        nmt.save(&dir.join(model_name(ModelKind::Nmt, direction))).unwrap();
    }
}

/// Models are trained once per test binary, under the target directory.
pub fn model_dir() -> &'static Path {
    static DIR: OnceLock<PathBuf> = OnceLock::new();
    DIR.get_or_init(|| {
        let dir = tempfile::tempdir_in(env!("CARGO_TARGET_TMPDIR")).unwrap().keep();
        build_models(&dir);
        dir
    })
}

pub fn dictionary() -> DictionaryIndex {
    DictionaryIndex::build(lexicon().dictionary()).unwrap()
}

/// A source sentence the fixture models have seen words of.
pub fn sample_source(direction: Direction) -> String {
    let pair = lexicon().corpus(1).pairs.remove(0);
    match direction {
        Direction::ChrEn => pair.source.join(),
        Direction::EnChr => pair.target.join(),
    }
}

pub struct TestApp {
    pub state: AppState,
    pub router: Router,
    pub data: tempfile::TempDir,
}

pub fn app_with(models: ModelRegistry) -> TestApp {
    let data = tempfile::tempdir().unwrap();
    let state = AppState::new(FeedbackStore::open(data.path()).unwrap(), models, dictionary(), vec![TOKEN.to_owned()]);
    TestApp {
        router: router(state.clone()),
        state,
        data,
    }
}

pub fn app() -> TestApp {
    app_with(ModelRegistry::load(model_dir()))
}

impl TestApp {
    pub async fn call(&self, method: Method, uri: &str, body: Option<Value>, token: Option<&str>) -> (StatusCode, Value) {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(t) = token {
            req = req.header(header::AUTHORIZATION, format!("Bearer {t}"));
        }
        let req = match body {
            Some(b) => req
                .header(header::CONTENT_TYPE, "application/json")
                .body(Body::from(b.to_string()))
                .unwrap(),
            None => req.body(Body::empty()).unwrap(),
        };
        self.send(req).await
    }

    pub async fn send(&self, req: Request<Body>) -> (StatusCode, Value) {
        let resp = self.router.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
        let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
        (status, value)
    }

    pub async fn post(&self, uri: &str, body: Value) -> (StatusCode, Value) {
        self.call(Method::POST, uri, Some(body), None).await
    }

    pub async fn get(&self, uri: &str) -> (StatusCode, Value) {
        self.call(Method::GET, uri, None, None).await
    }

    /// Lines across every store file, to detect writes.
    pub fn stored_lines(&self) -> usize {
        std::fs::read_dir(self.data.path())
            .unwrap()
            .map(|e| std::fs::read_to_string(e.unwrap().path()).unwrap_or_default().lines().count())
            .sum()
    }
}
