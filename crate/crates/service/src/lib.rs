//! HTTP API over the translation models, quality estimation, dictionary and
//! feedback store.

mod api;
pub mod config;
pub mod error;
pub mod models;
pub mod schema;

use std::collections::HashSet;
use std::sync::Arc;

use mtloop_core::dictionary::{DictionaryIndex, DEFAULT_LOOKUP_LIMIT};
use mtloop_core::feedback::FeedbackStore;

pub use api::router;
pub use config::ServiceConfig;
pub use error::{ApiError, ServiceError};
pub use models::{ModelRegistry, NmtBackend, SmtBackend};

/// Longest accepted translation input, in characters.
pub const MAX_TEXT_CHARS: usize = 2000;
pub const API_VERSION: u32 = 1;

/// Shared state behind every handler.
#[derive(Clone)]
pub struct AppState {
    pub store: Arc<FeedbackStore>,
    pub models: Arc<ModelRegistry>,
    pub dictionary: Arc<DictionaryIndex>,
    expert_tokens: Arc<HashSet<String>>,
}

impl AppState {
    pub fn new(store: FeedbackStore, models: ModelRegistry, dictionary: DictionaryIndex, expert_tokens: Vec<String>) -> Self {
        AppState {
            store: Arc::new(store),
            models: Arc::new(models),
            dictionary: Arc::new(dictionary),
            expert_tokens: Arc::new(expert_tokens.into_iter().filter(|t| !t.is_empty()).collect()),
        }
    }

    /// Open the data directory, load whatever models exist and the dictionary.
    pub fn from_config(config: &ServiceConfig) -> Result<Self, ServiceError> {
        let store = FeedbackStore::open(&config.data_dir)?;
        let models = match &config.model_dir {
            Some(dir) => ModelRegistry::load(dir),
            None => ModelRegistry::default(),
        };
        let dictionary = match &config.dict_file {
            Some(path) => DictionaryIndex::load_tsv(path)?,
            None => DictionaryIndex::default(),
        };
        Ok(AppState::new(store, models, dictionary, config.expert_tokens.clone()))
    }

    /// Constant-time comparison against every configured token.
    pub fn is_expert_token(&self, candidate: &str) -> bool {
        let mut found = false;
        for token in self.expert_tokens.iter() {
            found |= ct_eq(token.as_bytes(), candidate.as_bytes());
        }
        found
    }
}

/// Dictionary hits for each token, up to the default lookup limit.
pub fn dictionary_terms(dictionary: &DictionaryIndex, tokens: &[String]) -> Vec<schema::TokenTerms> {
    tokens
        .iter()
        .map(|token| schema::TokenTerms {
            token: token.clone(),
            terms: dictionary
                .lookup(token, DEFAULT_LOOKUP_LIMIT)
                .expect("limit is positive")
                .into_iter()
                .map(|hit| schema::DictTerm::new(hit.entry, hit.tier))
                .collect(),
        })
        .collect()
}

fn ct_eq(a: &[u8], b: &[u8]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

/// Bind `0.0.0.0:port` and serve until interrupted.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let state = AppState::from_config(&config)?;
    let health = state.models.health_entries();
    tracing::info!(port = config.port, models = ?health, "starting");
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", config.port)).await?;
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
