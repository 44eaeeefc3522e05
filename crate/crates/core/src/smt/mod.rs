//! Miniature phrase-based statistical translation.

pub mod align;
pub mod decoder;
pub mod lexical;
pub mod lm;
pub mod model;
pub mod phrase_table;
pub mod tune;

pub use align::{align, extract_phrases, symmetrize, Link, PhraseSpan, DEFAULT_MAX_PHRASE_LEN};
pub use decoder::{
    collect_options, decode, ComponentScores, DecodeOptions, DecoderTables, Segment, SmtHypothesis, SmtWeights,
    TranslationOption,
};
pub use lexical::{train_lexical, LexicalTable, Model1, LEXICAL_FLOOR};
pub use lm::{train_lm, NGramLm};
pub use model::{train_smt, SmtModel, SmtTrainConfig};
pub use phrase_table::{build_tables, Orientation, PhraseEntry, PhraseTable, ReorderingTable};
pub use tune::{dev_bleu, tune_weights, TuneConfig, TuneReport};
