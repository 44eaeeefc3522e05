//! Neural-decoder contract, beam search, ensembling and a toy lexical
//! decoder that satisfies the contract.

mod beam;
mod ensemble;
mod model;
mod record;
mod toy;

pub use beam::{beam_search, default_max_len, NmtHypothesis, DEFAULT_NMT_BEAM};
pub use ensemble::Ensemble;
pub use model::{train_nmt, NmtModel, NmtTrainConfig, DEFAULT_SEEDS};
pub use record::{read_records, write_records, HypothesisRecord};
pub use toy::ToyDecoder;

/// End-of-sequence symbol used by the toy decoder.
pub const EOS: &str = "</s>";

/// Attention for one decoding step.
#[derive(Debug, Clone, PartialEq)]
pub enum StepAttention {
    /// One row used whatever token is emitted.
    Shared(Vec<f64>),
    /// One row per vocabulary entry, depending on the emitted token.
    PerToken(Vec<Vec<f64>>),
}

/// Next-token distribution over a decoder's vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDistribution {
    /// Aligned with [`Decoder::vocabulary`]; every entry in (0, 1].
    pub probabilities: Vec<f64>,
    pub attention: StepAttention,
}

impl StepDistribution {
    /// Attention row that goes with emitting vocabulary entry `token`.
    pub fn attention_for(&self, token: usize) -> &[f64] {
        match &self.attention {
            StepAttention::Shared(row) => row,
            StepAttention::PerToken(rows) => &rows[token],
        }
    }
}

/// A left-to-right decoder. Implementations are immutable and deterministic
/// for a fixed `(source, prefix)`.
pub trait Decoder: Send + Sync {
    /// Sorted vocabulary, including the end-of-sequence symbol.
    fn vocabulary(&self) -> &[String];

    fn eos(&self) -> &str;

    /// Distribution of the token following `prefix`; `source` is non-empty.
    fn step(&self, source: &[String], prefix: &[String]) -> StepDistribution;

    fn eos_index(&self) -> usize {
        self.vocabulary()
            .binary_search_by(|w| w.as_str().cmp(self.eos()))
            .expect("vocabulary contains the end-of-sequence symbol")
    }
}

/// The attention matrix of a hypothesis, one row per target token.
pub fn soft_alignment(h: &NmtHypothesis) -> &[Vec<f64>] {
    &h.attention
}
