use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nmt::NmtHypothesis;
use crate::smt::SmtHypothesis;

/// Attention rows may deviate from one by at most this much.
const ROW_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Smt,
    Nmt,
}

impl FeatureKind {
    pub fn dim(self) -> usize {
        match self {
            FeatureKind::Smt => 15,
            FeatureKind::Nmt => 6,
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::Smt => "smt",
            FeatureKind::Nmt => "nmt",
        })
    }
}

impl std::str::FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smt" => Ok(FeatureKind::Smt),
            "nmt" => Ok(FeatureKind::Nmt),
            other => Err(Error::invalid(format!("unknown feature kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub kind: FeatureKind,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(kind: FeatureKind, values: Vec<f64>) -> Result<Self> {
        if values.len() != kind.dim() {
            return Err(Error::DimensionMismatch {
                expected: kind.dim(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("feature values must be finite".into()));
        }
        Ok(FeatureVector { kind, values })
    }
}

/// `[L_t, total, six components, total and components divided by L_t]`.
pub fn smt_features(h: &SmtHypothesis) -> Result<FeatureVector> {
    let lt = h.target.len();
    if lt == 0 {
        return Err(Error::ZeroLengthHypothesis);
    }
    let lt = lt as f64;
    let c = &h.components;
    let raw = [
        h.total_score,
        c.distortion,
        c.lm,
        c.lexical_reordering,
        c.phrase_penalty,
        c.translation_model,
        c.word_penalty,
    ];
    let mut values = Vec::with_capacity(15);
    values.push(lt);
    values.extend(raw);
    values.extend(raw.iter().map(|r| r / lt));
    FeatureVector::new(FeatureKind::Smt, values)
}

/// `-(1/L_t) Σ_i Σ_j α_ij ln α_ij`, with `0 ln 0 = 0`.
pub fn attention_entropy(attention: &[Vec<f64>]) -> Result<f64> {
    if attention.is_empty() {
        return Err(Error::ZeroLengthHypothesis);
    }
    let mut total = 0.0;
    for row in attention {
        if row.is_empty() {
            return Err(Error::Validation("empty attention row".into()));
        }
        let sum: f64 = row.iter().sum();
        if row.iter().any(|a| !(a.is_finite() && *a >= 0.0)) || (sum - 1.0).abs() > ROW_TOLERANCE {
            return Err(Error::Validation(format!("attention row sums to {sum}, expected 1")));
        }
        total -= row.iter().filter(|&&a| a > 0.0).map(|a| a * a.ln()).sum::<f64>();
    }
    Ok(total / attention.len() as f64)
}

/// `[L_t, logP, logP/L_t, exp(logP), exp(logP/L_t), attention entropy]`.
pub fn nmt_features(h: &NmtHypothesis) -> Result<FeatureVector> {
    let lt = h.target.len();
    if lt == 0 || h.token_logprobs.is_empty() {
        return Err(Error::ZeroLengthHypothesis);
    }
    if h.token_logprobs.len() != lt {
        return Err(Error::DimensionMismatch {
            expected: lt,
            got: h.token_logprobs.len(),
        });
    }
    let lt = lt as f64;
    let logp = h.logprob();
    FeatureVector::new(
        FeatureKind::Nmt,
        vec![lt, logp, logp / lt, logp.exp(), (logp / lt).exp(), attention_entropy(&h.attention)?],
    )
}
