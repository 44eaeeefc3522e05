//! Line-delimited JSON interchange for neural hypotheses, so hypotheses from
//! an external decoder can be fed to quality estimation.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::NmtHypothesis;
use crate::error::{Error, Result};
use crate::textmetrics::TokenSeq;

const ROW_TOLERANCE: f64 = 1e-6;

/// One decoded sentence: `{"source": [...], "target": [...],
/// "token_logprobs": [...], "attention": [[...], ...]}` plus the optional
/// `eos_logprob` and `truncated` fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesisRecord {
    pub source: TokenSeq,
    pub target: TokenSeq,
    pub token_logprobs: Vec<f64>,
    pub attention: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eos_logprob: Option<f64>,
    #[serde(default)]
    pub truncated: bool,
}

impl HypothesisRecord {
    pub fn new(source: TokenSeq, hypothesis: NmtHypothesis) -> Self {
        HypothesisRecord {
            source,
            target: hypothesis.target,
            token_logprobs: hypothesis.token_logprobs,
            attention: hypothesis.attention,
            eos_logprob: hypothesis.eos_logprob,
            truncated: hypothesis.truncated,
        }
    }

    pub fn hypothesis(&self) -> NmtHypothesis {
        NmtHypothesis {
            target: self.target.clone(),
            token_logprobs: self.token_logprobs.clone(),
            attention: self.attention.clone(),
            eos_logprob: self.eos_logprob,
            truncated: self.truncated,
        }
    }

    /// Shape and range checks: one log-probability (≤ 0) and one
    /// row-stochastic attention row per target token.
    pub fn validate(&self) -> Result<()> {
        let lt = self.target.len();
        if self.source.is_empty() || lt == 0 {
            return Err(Error::Validation("source and target must be non-empty".into()));
        }
        if self.token_logprobs.len() != lt {
            return Err(Error::DimensionMismatch {
                expected: lt,
                got: self.token_logprobs.len(),
            });
        }
        if self.token_logprobs.iter().chain(&self.eos_logprob).any(|lp| !(lp.is_finite() && *lp <= 0.0)) {
            return Err(Error::Validation("log-probabilities must be finite and ≤ 0".into()));
        }
        if self.attention.len() != lt {
            return Err(Error::DimensionMismatch {
                expected: lt,
                got: self.attention.len(),
            });
        }
        for row in &self.attention {
            if row.len() != self.source.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.source.len(),
                    got: row.len(),
                });
            }
            let total: f64 = row.iter().sum();
            if row.iter().any(|a| !(a.is_finite() && *a >= 0.0)) || (total - 1.0).abs() > ROW_TOLERANCE {
                return Err(Error::Validation("attention rows must be probability vectors".into()));
            }
        }
        Ok(())
    }
}

pub fn read_records(path: &Path) -> Result<Vec<HypothesisRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: HypothesisRecord =
            serde_json::from_str(line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        record.validate().map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_records(path: &Path, records: &[HypothesisRecord]) -> Result<()> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    file.write_all(&out)
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> HypothesisRecord {
        HypothesisRecord {
            source: TokenSeq::from_whitespace("a b"),
            target: TokenSeq::from_whitespace("x"),
            token_logprobs: vec![-0.5],
            attention: vec![vec![0.25, 0.75]],
            eos_logprob: Some(-0.1),
            truncated: false,
        }
    }

    #[test]
    fn round_trips_through_a_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("hyps.jsonl");
        write_records(&path, &[record(), record()]).unwrap();
        assert_eq!(read_records(&path).unwrap(), vec![record(), record()]);
    }

    #[test]
    fn rejects_malformed_records() {
        let mut r = record();
        r.attention[0] = vec![0.5, 0.6];
        assert!(r.validate().is_err());
        let mut r = record();
        r.token_logprobs.push(-1.0);
        assert!(matches!(r.validate(), Err(Error::DimensionMismatch { .. })));
        let mut r = record();
        r.token_logprobs[0] = 0.5;
        assert!(r.validate().is_err());
        assert!(serde_json::from_str::<HypothesisRecord>(r#"{"source":["a"],"target":["x"],"token_logprobs":[-1],"attention":[[1]],"extra":1}"#).is_err());
    }
}
