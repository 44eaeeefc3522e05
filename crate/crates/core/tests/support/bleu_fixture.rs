//! The 20-line BLEU fixture and its golden values from an offline reference
//! scorer (`fixtures/bleu/sacrebleu_oracle.py`).

use std::path::PathBuf;

use mtloop_core::textmetrics::{tokenize_13a, BleuScore, TokenSeq};
use serde_json::Value;

pub const TOLERANCE: f64 = 0.05;

fn fixture(name: &str) -> PathBuf {
    // resolves from any crate in the workspace
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/bleu").join(name)
}

pub fn lines(name: &str) -> Vec<String> {
    std::fs::read_to_string(fixture(name)).unwrap().lines().map(str::to_owned).collect()
}

pub fn golden() -> Value {
    serde_json::from_str(&std::fs::read_to_string(fixture("golden.json")).unwrap()).unwrap()
}

pub fn tok(lines: &[String]) -> Vec<TokenSeq> {
    lines.iter().map(|l| tokenize_13a(l)).collect()
}

/// Hypotheses, first references and second references, tokenized.
pub fn sides() -> (Vec<TokenSeq>, Vec<TokenSeq>, Vec<TokenSeq>) {
    (tok(&lines("hyp.txt")), tok(&lines("ref.txt")), tok(&lines("ref2.txt")))
}

pub fn check(label: &str, ours: &BleuScore, expected: &Value) {
    let score = expected["score"].as_f64().unwrap();
    assert!((ours.value - score).abs() <= TOLERANCE, "{label}: {} vs {score}", ours.value);
    assert!((ours.brevity_penalty - expected["bp"].as_f64().unwrap()).abs() < 1e-9, "{label}: bp");
    assert_eq!(ours.hyp_len as u64, expected["sys_len"].as_u64().unwrap(), "{label}: sys_len");
    assert_eq!(ours.ref_len as u64, expected["ref_len"].as_u64().unwrap(), "{label}: ref_len");
    for (n, p) in expected["precisions"].as_array().unwrap().iter().enumerate() {
        let p = p.as_f64().unwrap();
        if n < ours.effective_order {
            assert!((ours.precisions[n] - p).abs() < 1e-9, "{label}: precision {}", n + 1);
        }
    }
}
