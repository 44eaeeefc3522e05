//! Exhaustive enumeration of completed toy-decoder outputs.

use mtloop_core::nmt::{Decoder, ToyDecoder};
use mtloop_core::smt::LexicalTable;
use rand::seq::SliceRandom;
use rand::Rng;

/// A 3-token source and a toy decoder over 4 words plus end-of-sequence.
pub fn random_toy(rng: &mut impl Rng) -> (ToyDecoder, Vec<String>) {
    let sources = ["a", "b", "c", "d"];
    let targets = ["w", "x", "y", "z"];
    let rows: Vec<(&str, Vec<(&str, f64)>)> = sources
        .iter()
        .map(|&s| (s, targets.iter().map(|&t| (t, rng.gen_range(0.01..1.0f64).powi(3))).collect()))
        .collect();
    let lex = LexicalTable::from_rows(rows).unwrap();
    let source = (0..3).map(|_| sources.choose(rng).unwrap().to_string()).collect();
    (ToyDecoder::new(lex).unwrap(), source)
}

/// Best `(score, tokens)` over every sequence of 1..max_len symbols that
/// ends with end-of-sequence; ties go to the lexicographically smaller
/// token sequence.
pub fn best_completed(decoder: &dyn Decoder, source: &[String], max_len: usize) -> (f64, Vec<String>) {
    let mut best: Option<(f64, Vec<String>)> = None;
    let mut prefix = Vec::new();
    extend(decoder, source, max_len, &mut prefix, 0.0, &mut best);
    best.expect("max_len ≥ 2 admits a completed sequence")
}

fn extend(
    decoder: &dyn Decoder,
    source: &[String],
    max_len: usize,
    prefix: &mut Vec<String>,
    score: f64,
    best: &mut Option<(f64, Vec<String>)>,
) {
    if prefix.len() + 1 > max_len {
        return;
    }
    let step = decoder.step(source, prefix);
    for (v, &p) in step.probabilities.iter().enumerate() {
        let s = score + p.ln();
        if v == decoder.eos_index() {
            if prefix.is_empty() {
                continue;
            }
            let better = match best {
                None => true,
                Some((bs, bt)) => s > *bs || (s == *bs && prefix < bt),
            };
            if better {
                *best = Some((s, prefix.clone()));
            }
        } else {
            prefix.push(decoder.vocabulary()[v].clone());
            extend(decoder, source, max_len, prefix, s, best);
            prefix.pop();
        }
    }
}
