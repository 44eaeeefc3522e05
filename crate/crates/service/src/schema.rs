//! Request and response bodies. Every response carries `v`, the API version.
//! Response types reject unknown fields so tests can round-trip them as a
//! schema check.

use std::collections::BTreeMap;

use mtloop_core::dictionary::{DictEntry, MatchTier};
use mtloop_core::feedback::{ExampleItem, ExampleStatus, StatsCell};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranslateRequest {
    #[serde(default)]
    pub v: Option<u32>,
    pub text: String,
    /// `chr-en` or `en-chr`.
    pub direction: String,
    /// `smt` or `nmt`.
    pub model: String,
    #[serde(default)]
    pub example_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Alignment {
    /// `[source index, target index]` pairs.
    Hard { links: Vec<[usize; 2]> },
    /// One row per target token, one column per source token.
    Soft { matrix: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictTerm {
    pub headword: String,
    pub language: String,
    pub gloss: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    pub tier: MatchTier,
}

impl DictTerm {
    pub fn new(entry: DictEntry, tier: MatchTier) -> Self {
        DictTerm {
            headword: entry.headword,
            language: entry.language.to_string(),
            gloss: entry.gloss,
            notes: entry.notes,
            tier,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenTerms {
    pub token: String,
    pub terms: Vec<DictTerm>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranslateResponse {
    pub v: u32,
    pub translation_id: String,
    pub direction: String,
    pub model: String,
    pub output: String,
    /// `stars_raw` rounded to one decimal.
    pub stars: f64,
    pub stars_raw: f64,
    pub alignment: Alignment,
    pub src_tokens: Vec<String>,
    pub tgt_tokens: Vec<String>,
    pub dict_src: Vec<TokenTerms>,
    pub dict_tgt: Vec<TokenTerms>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExamplesResponse {
    pub v: u32,
    pub examples: Vec<ExampleItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NextExampleResponse {
    pub v: u32,
    pub example: Option<ExampleItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommonFeedbackRequest {
    #[serde(default)]
    pub v: Option<u32>,
    pub translation_id: String,
    #[serde(default)]
    pub helpfulness: Option<u8>,
    #[serde(default)]
    pub comment: Option<String>,
    #[serde(default)]
    pub accepted_terms: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpertFeedbackRequest {
    #[serde(default)]
    pub v: Option<u32>,
    pub translation_id: String,
    pub quality: u8,
    pub correction: String,
    #[serde(default)]
    pub comment: Option<String>,
    #[serde(default)]
    pub author: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreatedResponse {
    pub v: u32,
    pub id: String,
    /// Status of the example behind the translation, if there is one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example_status: Option<ExampleStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsResponse {
    pub v: u32,
    pub cells: Vec<StatsCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HealthResponse {
    pub v: u32,
    /// `ok` or `degraded`.
    pub status: String,
    /// Loaded model identifiers by model name.
    pub model_versions: BTreeMap<String, String>,
    pub missing: Vec<String>,
    pub data_dir_writable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorResponse {
    pub v: u32,
    pub error: ErrorBody,
}
