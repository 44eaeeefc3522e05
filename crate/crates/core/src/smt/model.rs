//! Training entry point and on-disk layout of a complete SMT model.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::align::{align, DEFAULT_MAX_PHRASE_LEN};
use super::decoder::{decode, DecodeOptions, DecoderTables, SmtHypothesis, SmtWeights};
use super::lexical::{train_lexical, LexicalTable};
use super::lm::{train_lm, NGramLm, DEFAULT_DISCOUNT, DEFAULT_ORDER};
use super::phrase_table::{build_tables, PhraseTable, ReorderingTable};
use crate::corpus::{Direction, ParallelCorpus};
use crate::error::{Error, Result};

const MODEL_FORMAT: &str = "mtloop-smt/1";
pub const PHRASE_TABLE_FILE: &str = "phrase-table.txt";
pub const PHRASE_ALIGN_FILE: &str = "phrase-align.txt";
pub const REORDERING_FILE: &str = "reordering-table.txt";
pub const LM_FILE: &str = "lm.arpa";
pub const LEX_FORWARD_FILE: &str = "lex.s2t.txt";
pub const LEX_REVERSE_FILE: &str = "lex.t2s.txt";
pub const MODEL_FILE: &str = "model.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmtTrainConfig {
    pub em_iterations: usize,
    pub max_phrase_len: usize,
    pub lm_order: usize,
    pub lm_discount: f64,
}

impl Default for SmtTrainConfig {
    fn default() -> Self {
        SmtTrainConfig {
            em_iterations: 5,
            max_phrase_len: DEFAULT_MAX_PHRASE_LEN,
            lm_order: DEFAULT_ORDER,
            lm_discount: DEFAULT_DISCOUNT,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmtModel {
    pub direction: Direction,
    pub phrases: PhraseTable,
    pub reordering: ReorderingTable,
    pub lm: NGramLm,
    /// `t(target | source)`.
    pub lex_forward: LexicalTable,
    /// `t(source | target)`.
    pub lex_reverse: LexicalTable,
    pub weights: SmtWeights,
}

#[derive(Serialize, Deserialize)]
struct ModelMeta {
    format: String,
    direction: Direction,
    weights: SmtWeights,
}

impl SmtModel {
    pub fn tables(&self) -> DecoderTables<'_> {
        DecoderTables {
            phrases: &self.phrases,
            reordering: &self.reordering,
            lm: &self.lm,
        }
    }

    pub fn translate(&self, source: &[String], options: DecodeOptions) -> Result<SmtHypothesis> {
        decode(source, self.tables(), &self.weights, options)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        let write = |name: &str, text: String| {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
        };
        write(PHRASE_TABLE_FILE, self.phrases.to_text())?;
        write(PHRASE_ALIGN_FILE, self.phrases.alignments_to_text())?;
        write(REORDERING_FILE, self.reordering.to_text())?;
        write(LM_FILE, self.lm.to_arpa())?;
        write(LEX_FORWARD_FILE, self.lex_forward.to_text())?;
        write(LEX_REVERSE_FILE, self.lex_reverse.to_text())?;
        let meta = ModelMeta {
            format: MODEL_FORMAT.to_owned(),
            direction: self.direction,
            weights: self.weights,
        };
        write(MODEL_FILE, serde_json::to_string_pretty(&meta)? + "\n")
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let read = |name: &str| {
            let path = dir.join(name);
            fs::read_to_string(&path)
                .map(|text| (text, path.clone()))
                .map_err(|e| Error::io(format!("reading {}", path.display()), e))
        };
        let (meta_text, _) = read(MODEL_FILE)?;
        let meta: ModelMeta = serde_json::from_str(&meta_text)?;
        if meta.format != MODEL_FORMAT {
            return Err(Error::Validation(format!("unsupported model format {:?}", meta.format)));
        }
        meta.weights.validate()?;
        let (text, path) = read(PHRASE_TABLE_FILE)?;
        let mut phrases = PhraseTable::parse(&text, &path)?;
        if let Ok((text, path)) = read(PHRASE_ALIGN_FILE) {
            phrases.apply_alignments(&text, &path)?;
        }
        let (text, path) = read(REORDERING_FILE)?;
        let reordering = ReorderingTable::parse(&text, &path)?;
        let (text, path) = read(LM_FILE)?;
        let lm = NGramLm::parse_arpa(&text, &path)?;
        let (text, path) = read(LEX_FORWARD_FILE)?;
        let lex_forward = LexicalTable::parse(&text, &path)?;
        let (text, path) = read(LEX_REVERSE_FILE)?;
        let lex_reverse = LexicalTable::parse(&text, &path)?;
        Ok(SmtModel {
            direction: meta.direction,
            phrases,
            reordering,
            lm,
            lex_forward,
            lex_reverse,
            weights: meta.weights,
        })
    }
}

/// Learn lexical tables, align, extract phrases and train the target LM.
pub fn train_smt(corpus: &ParallelCorpus, config: &SmtTrainConfig) -> Result<SmtModel> {
    corpus.ensure_non_empty()?;
    if config.max_phrase_len == 0 {
        return Err(Error::invalid("max phrase length must be at least 1"));
    }
    let lex_forward = train_lexical(corpus, config.em_iterations)?;
    let lex_reverse = train_lexical(&corpus.reversed(), config.em_iterations)?;
    let alignments: Vec<_> = corpus
        .pairs
        .par_iter()
        .map(|pair| align(pair, &lex_forward, &lex_reverse))
        .collect();
    let (phrases, reordering) = build_tables(corpus, &alignments, &lex_forward, &lex_reverse, config.max_phrase_len)?;
    let targets: Vec<&[String]> = corpus.targets().map(|t| &t[..]).collect();
    let lm = train_lm(&targets, config.lm_order, config.lm_discount)?;
    Ok(SmtModel {
        direction: corpus.direction,
        phrases,
        reordering,
        lm,
        lex_forward,
        lex_reverse,
        weights: SmtWeights::default(),
    })
}
