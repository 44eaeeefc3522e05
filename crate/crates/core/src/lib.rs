//! Translation, quality estimation and feedback primitives for a
//! Cherokee-English translation service.

pub mod corpus;
pub mod dictionary;
pub mod error;
pub mod feedback;
pub mod hitl;
pub mod nmt;
pub mod qe;
pub mod smt;
pub mod synthetic;
pub mod textmetrics;

pub use corpus::{Direction, Language, ParallelCorpus, SentencePair};
pub use error::{Error, Result};
pub use textmetrics::TokenSeq;
