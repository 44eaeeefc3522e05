//! Parallel corpora and language/direction tags.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textmetrics::{tokenize_13a, TokenSeq};

/// Field separator used by pair files and phrase tables.
pub const FIELD_SEP: &str = " ||| ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Chr,
    En,
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Language::Chr => "chr",
            Language::En => "en",
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Language {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chr" => Ok(Language::Chr),
            "en" => Ok(Language::En),
            other => Err(Error::invalid(format!("unknown language {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "chr-en")]
    ChrEn,
    #[serde(rename = "en-chr")]
    EnChr,
}

impl Direction {
    pub const ALL: [Direction; 2] = [Direction::ChrEn, Direction::EnChr];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::ChrEn => "chr-en",
            Direction::EnChr => "en-chr",
        }
    }

    pub fn source(self) -> Language {
        match self {
            Direction::ChrEn => Language::Chr,
            Direction::EnChr => Language::En,
        }
    }

    pub fn target(self) -> Language {
        match self {
            Direction::ChrEn => Language::En,
            Direction::EnChr => Language::Chr,
        }
    }

    pub fn reversed(self) -> Direction {
        match self {
            Direction::ChrEn => Direction::EnChr,
            Direction::EnChr => Direction::ChrEn,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chr-en" => Ok(Direction::ChrEn),
            "en-chr" => Ok(Direction::EnChr),
            other => Err(Error::invalid(format!("unknown direction {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SentencePair {
    pub source: TokenSeq,
    pub target: TokenSeq,
}

impl SentencePair {
    pub fn new(source: TokenSeq, target: TokenSeq) -> Result<Self> {
        if source.is_empty() || target.is_empty() {
            return Err(Error::Validation("sentence pair has an empty side".into()));
        }
        Ok(SentencePair { source, target })
    }

    /// Tokenize both sides with the 13a tokenizer.
    pub fn from_text(source: &str, target: &str) -> Result<Self> {
        SentencePair::new(tokenize_13a(source), tokenize_13a(target))
    }

    pub fn swapped(&self) -> SentencePair {
        SentencePair {
            source: self.target.clone(),
            target: self.source.clone(),
        }
    }
}

/// Sentence-aligned training or evaluation data.
///
/// No pair has an empty side. An empty corpus is representable (exports from
/// an empty feedback store), but training entry points reject it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelCorpus {
    pub direction: Direction,
    pub pairs: Vec<SentencePair>,
}

impl ParallelCorpus {
    pub fn new(direction: Direction, pairs: Vec<SentencePair>) -> Self {
        ParallelCorpus { direction, pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn ensure_non_empty(&self) -> Result<()> {
        if self.pairs.is_empty() {
            Err(Error::EmptyCorpus)
        } else {
            Ok(())
        }
    }

    /// The same data viewed in the opposite direction.
    pub fn reversed(&self) -> ParallelCorpus {
        ParallelCorpus {
            direction: self.direction.reversed(),
            pairs: self.pairs.iter().map(SentencePair::swapped).collect(),
        }
    }

    /// Re-orient to `direction`, swapping sides if necessary.
    pub fn oriented(&self, direction: Direction) -> ParallelCorpus {
        if self.direction == direction {
            self.clone()
        } else {
            self.reversed()
        }
    }

    pub fn subset(&self, indices: &[usize]) -> ParallelCorpus {
        ParallelCorpus {
            direction: self.direction,
            pairs: indices.iter().map(|&i| self.pairs[i].clone()).collect(),
        }
    }

    pub fn sources(&self) -> impl Iterator<Item = &TokenSeq> {
        self.pairs.iter().map(|p| &p.source)
    }

    pub fn targets(&self) -> impl Iterator<Item = &TokenSeq> {
        self.pairs.iter().map(|p| &p.target)
    }

    /// Parse a pair file: one `source ||| target` pair per line, already
    /// tokenized (whitespace separated). Blank lines are skipped.
    pub fn parse_pair_lines(text: &str, direction: Direction, origin: &Path) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (src, tgt) = line
                .split_once(FIELD_SEP.trim())
                .ok_or_else(|| Error::parse(origin, lineno + 1, "expected `source ||| target`"))?;
            let pair = SentencePair::new(TokenSeq::from_whitespace(src), TokenSeq::from_whitespace(tgt))
                .map_err(|e| Error::parse(origin, lineno + 1, e.to_string()))?;
            pairs.push(pair);
        }
        Ok(ParallelCorpus { direction, pairs })
    }

    pub fn read_pair_file(path: &Path, direction: Direction) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::parse_pair_lines(&text, direction, path)
    }

    pub fn write_pair_file(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        for pair in &self.pairs {
            writeln!(out, "{}{FIELD_SEP}{}", pair.source, pair.target).expect("write to vec");
        }
        fs::write(path, out).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}
