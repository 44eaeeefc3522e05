use std::collections::HashMap;

use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, FromRequestParts, Query, Request, State};
use axum::http::request::Parts;
use axum::http::{header, StatusCode};
use axum::routing::{get, post};
use axum::{Json, Router};
use mtloop_core::feedback::{CommonFeedback, ExampleStatus, ExpertFeedback, ModelKind, NewTranslation};
use mtloop_core::nmt::DEFAULT_NMT_BEAM;
use mtloop_core::qe::{smt_features, stars_from_bleu, stars_from_prob};
use mtloop_core::smt::DecodeOptions;
use mtloop_core::textmetrics::tokenize_13a;
use mtloop_core::{Direction, Language};
use serde::de::DeserializeOwned;

use crate::dictionary_terms;
use crate::error::ApiError;
use crate::models::model_name;
use crate::schema::*;
use crate::{AppState, API_VERSION, MAX_TEXT_CHARS};

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/translate", post(translate))
        .route("/api/examples", get(list_examples))
        .route("/api/examples/next", get(next_example))
        .route("/api/feedback/common", post(feedback_common))
        .route("/api/feedback/expert", post(feedback_expert))
        .route("/api/stats", get(stats))
        .route("/api/health", get(health))
        .with_state(state)
}

/// JSON body whose rejections become 400 responses in the API error format.
pub struct ApiJson<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for ApiJson<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(value)) => Ok(ApiJson(value)),
            Err(rejection) => Err(ApiError::bad_request(match rejection {
                JsonRejection::MissingJsonContentType(_) => "expected an application/json body".to_owned(),
                other => other.body_text(),
            })),
        }
    }
}

/// A request carrying a configured expert bearer token.
pub struct Expert;

impl FromRequestParts<AppState> for Expert {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, ApiError> {
        let token = parts
            .headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .map(str::trim)
            .ok_or_else(ApiError::unauthorized)?;
        if state.is_expert_token(token) {
            Ok(Expert)
        } else {
            Err(ApiError::unauthorized())
        }
    }
}

fn parse_query<T: std::str::FromStr<Err = mtloop_core::Error>>(q: &HashMap<String, String>, key: &str) -> Result<Option<T>, ApiError> {
    match q.get(key).map(|s| s.trim()).filter(|s| !s.is_empty()) {
        None => Ok(None),
        Some(raw) => raw.parse().map(Some).map_err(|e: mtloop_core::Error| ApiError::bad_request(e.to_string())),
    }
}

async fn translate(State(state): State<AppState>, ApiJson(req): ApiJson<TranslateRequest>) -> Result<Json<TranslateResponse>, ApiError> {
    tokio::task::spawn_blocking(move || translate_blocking(&state, req))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map(Json)
}

fn translate_blocking(state: &AppState, req: TranslateRequest) -> Result<TranslateResponse, ApiError> {
    let direction: Direction = req.direction.parse().map_err(|e: mtloop_core::Error| ApiError::bad_request(e.to_string()))?;
    let kind: ModelKind = req.model.parse().map_err(|e: mtloop_core::Error| ApiError::bad_request(e.to_string()))?;
    let text = req.text.trim();
    if text.is_empty() {
        return Err(ApiError::bad_request("text is empty"));
    }
    if text.chars().count() > MAX_TEXT_CHARS {
        return Err(ApiError::bad_request(format!("text is longer than {MAX_TEXT_CHARS} characters")));
    }
    if let Some(id) = &req.example_id {
        if state.store.example(id).is_none() {
            return Err(ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("example {id}")));
        }
    }
    let src = tokenize_13a(text);
    if src.is_empty() {
        return Err(ApiError::bad_request("text has no tokens"));
    }

    let (tgt, stars_raw, alignment) = match kind {
        ModelKind::Smt => {
            let slot = state.models.smt(direction);
            let backend = slot.as_ref().as_ref().ok_or_else(|| ApiError::model_unavailable(&model_name(kind, direction)))?;
            let h = backend.model.translate(&src, DecodeOptions::default())?;
            let predicted = backend.qe.predict_features(&smt_features(&h)?)?;
            let links = h.hard_alignment.iter().map(|&(i, j)| [i, j]).collect();
            (h.target, stars_from_bleu(predicted).stars, Alignment::Hard { links })
        }
        ModelKind::Nmt => {
            let slot = state.models.nmt(direction);
            let backend = slot.as_ref().as_ref().ok_or_else(|| ApiError::model_unavailable(&model_name(kind, direction)))?;
            let h = backend.model.translate(&src, DEFAULT_NMT_BEAM)?;
            let stars = stars_from_prob(&h)?;
            (h.target, stars, Alignment::Soft { matrix: h.attention })
        }
    };

    let record = state.store.record_translation(NewTranslation {
        source: text.to_owned(),
        direction,
        model: kind,
        output: tgt.join(),
        stars: stars_raw,
        example_id: req.example_id,
    })?;
    Ok(TranslateResponse {
        v: API_VERSION,
        translation_id: record.id,
        direction: direction.to_string(),
        model: kind.to_string(),
        output: record.output,
        stars: (stars_raw * 10.0).round() / 10.0,
        stars_raw,
        alignment,
        dict_src: dictionary_terms(&state.dictionary, &src),
        dict_tgt: dictionary_terms(&state.dictionary, &tgt),
        src_tokens: src.into_inner(),
        tgt_tokens: tgt.into_inner(),
    })
}

async fn list_examples(State(state): State<AppState>, Query(q): Query<HashMap<String, String>>) -> Result<Json<ExamplesResponse>, ApiError> {
    let language: Option<Language> = parse_query(&q, "lang")?;
    let status: Option<ExampleStatus> = parse_query(&q, "status")?;
    Ok(Json(ExamplesResponse {
        v: API_VERSION,
        examples: state.store.list_examples(language, status),
    }))
}

async fn next_example(State(state): State<AppState>, Query(q): Query<HashMap<String, String>>) -> Result<Json<NextExampleResponse>, ApiError> {
    let language: Language = parse_query(&q, "lang")?.ok_or_else(|| ApiError::bad_request("lang is required"))?;
    Ok(Json(NextExampleResponse {
        v: API_VERSION,
        example: state.store.next_example(language),
    }))
}

async fn feedback_common(
    State(state): State<AppState>,
    ApiJson(req): ApiJson<CommonFeedbackRequest>,
) -> Result<(StatusCode, Json<CreatedResponse>), ApiError> {
    if !req.accepted_terms {
        return Err(ApiError::terms_not_accepted());
    }
    let feedback = CommonFeedback {
        translation_id: req.translation_id,
        helpfulness: req.helpfulness,
        comment: req.comment,
    };
    let id = tokio::task::spawn_blocking(move || state.store.submit_common(feedback))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok((
        StatusCode::CREATED,
        Json(CreatedResponse {
            v: API_VERSION,
            id,
            example_status: None,
        }),
    ))
}

async fn feedback_expert(
    _: Expert,
    State(state): State<AppState>,
    ApiJson(req): ApiJson<ExpertFeedbackRequest>,
) -> Result<(StatusCode, Json<CreatedResponse>), ApiError> {
    let feedback = ExpertFeedback {
        translation_id: req.translation_id,
        quality: req.quality,
        correction: req.correction,
        comment: req.comment,
        author: req.author.filter(|a| !a.trim().is_empty()).unwrap_or_else(|| "expert".to_owned()),
    };
    let (id, example_status) = tokio::task::spawn_blocking(move || -> Result<_, ApiError> {
        let translation_id = feedback.translation_id.clone();
        let id = state.store.submit_expert(feedback)?;
        let status = state
            .store
            .translation(&translation_id)
            .and_then(|t| t.example_id)
            .and_then(|ex| state.store.example(&ex))
            .map(|ex| ex.status);
        Ok((id, status))
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok((
        StatusCode::CREATED,
        Json(CreatedResponse {
            v: API_VERSION,
            id,
            example_status,
        }),
    ))
}

async fn stats(_: Expert, State(state): State<AppState>) -> Json<StatsResponse> {
    Json(StatsResponse {
        v: API_VERSION,
        cells: state.store.stats().cells,
    })
}

async fn health(State(state): State<AppState>) -> Json<HealthResponse> {
    let entries = state.models.health_entries();
    let missing: Vec<String> = entries.iter().filter(|(_, id)| id.is_none()).map(|(name, _)| name.clone()).collect();
    let data_dir_writable = state.store.is_writable();
    Json(HealthResponse {
        v: API_VERSION,
        status: if missing.is_empty() && data_dir_writable { "ok" } else { "degraded" }.to_owned(),
        model_versions: entries.into_iter().filter_map(|(name, id)| Some((name, id?))).collect(),
        missing,
        data_dir_writable,
    })
}
