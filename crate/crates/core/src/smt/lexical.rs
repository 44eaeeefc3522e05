//! Word translation probabilities learned with IBM Model 1 EM.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::corpus::ParallelCorpus;
use crate::error::{Error, Result};

/// Probability assigned to word pairs the table has never seen.
pub const LEXICAL_FLOOR: f64 = 1e-7;

/// `t(target | source)` for every co-occurring word pair.
///
/// Each source row sums to one.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LexicalTable {
    rows: BTreeMap<String, BTreeMap<String, f64>>,
}

impl LexicalTable {
    /// Build a table from explicit rows, normalizing each row.
    pub fn from_rows<S, T, R>(rows: R) -> Result<Self>
    where
        S: Into<String>,
        T: Into<String>,
        R: IntoIterator<Item = (S, Vec<(T, f64)>)>,
    {
        let mut table = BTreeMap::new();
        for (source, entries) in rows {
            let mut row = BTreeMap::new();
            for (target, p) in entries {
                if !(p.is_finite() && p >= 0.0) {
                    return Err(Error::invalid(format!("invalid probability {p}")));
                }
                *row.entry(target.into()).or_insert(0.0) += p;
            }
            let total: f64 = row.values().sum();
            if total <= 0.0 {
                return Err(Error::invalid("lexical row with zero mass"));
            }
            row.values_mut().for_each(|p| *p /= total);
            table.insert(source.into(), row);
        }
        Ok(LexicalTable { rows: table })
    }

    /// `t(target | source)`, floored for unseen pairs.
    pub fn prob(&self, target: &str, source: &str) -> f64 {
        self.rows
            .get(source)
            .and_then(|row| row.get(target))
            .copied()
            .filter(|&p| p > 0.0)
            .unwrap_or(LEXICAL_FLOOR)
    }

    pub fn row(&self, source: &str) -> Option<&BTreeMap<String, f64>> {
        self.rows.get(source)
    }

    pub fn rows(&self) -> impl Iterator<Item = (&String, &BTreeMap<String, f64>)> {
        self.rows.iter()
    }

    pub fn contains_source(&self, source: &str) -> bool {
        self.rows.contains_key(source)
    }

    /// Sorted, de-duplicated target vocabulary.
    pub fn target_vocabulary(&self) -> Vec<String> {
        let mut vocab: Vec<String> = self.rows.values().flat_map(|row| row.keys().cloned()).collect();
        vocab.sort();
        vocab.dedup();
        vocab
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `source \t target \t probability`, one pair per line.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (source, row) in &self.rows {
            for (target, p) in row {
                writeln!(out, "{source}\t{target}\t{p:e}").expect("write to string");
            }
        }
        out
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut rows: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let [source, target, p] = fields[..] else {
                return Err(Error::parse(origin, i + 1, "expected 3 tab-separated fields"));
            };
            let p: f64 = p
                .parse()
                .map_err(|_| Error::parse(origin, i + 1, format!("bad probability {p:?}")))?;
            rows.entry(source.to_owned()).or_default().insert(target.to_owned(), p);
        }
        Ok(LexicalTable { rows })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::parse(&text, path)
    }
}

/// Incremental IBM Model 1 trainer; one call to [`Model1::iterate`] is one
/// EM iteration over the corpus.
#[derive(Debug, Clone)]
pub struct Model1 {
    source_vocab: Vec<String>,
    target_vocab: Vec<String>,
    sentences: Vec<(Vec<u32>, Vec<u32>)>,
    t: HashMap<(u32, u32), f64>,
    uniform: f64,
}

impl Model1 {
    pub fn new(corpus: &ParallelCorpus) -> Result<Self> {
        corpus.ensure_non_empty()?;
        let mut source_ids: HashMap<&str, u32> = HashMap::new();
        let mut target_ids: HashMap<&str, u32> = HashMap::new();
        let mut source_vocab = Vec::new();
        let mut target_vocab = Vec::new();
        let mut sentences = Vec::with_capacity(corpus.len());
        for pair in &corpus.pairs {
            let src = pair
                .source
                .iter()
                .map(|w| {
                    *source_ids.entry(w.as_str()).or_insert_with(|| {
                        source_vocab.push(w.clone());
                        (source_vocab.len() - 1) as u32
                    })
                })
                .collect();
            let tgt = pair
                .target
                .iter()
                .map(|w| {
                    *target_ids.entry(w.as_str()).or_insert_with(|| {
                        target_vocab.push(w.clone());
                        (target_vocab.len() - 1) as u32
                    })
                })
                .collect();
            sentences.push((src, tgt));
        }
        let uniform = 1.0 / target_vocab.len() as f64;
        Ok(Model1 {
            source_vocab,
            target_vocab,
            sentences,
            t: HashMap::new(),
            uniform,
        })
    }

    fn t(&self, target: u32, source: u32) -> f64 {
        self.t.get(&(target, source)).copied().unwrap_or(if self.t.is_empty() {
            self.uniform
        } else {
            0.0
        })
    }

    pub fn iterate(&mut self) {
        let mut counts: HashMap<(u32, u32), f64> = HashMap::new();
        let mut totals = vec![0.0; self.source_vocab.len()];
        for (src, tgt) in &self.sentences {
            for &e in tgt {
                let denom: f64 = src.iter().map(|&f| self.t(e, f)).sum();
                if denom <= 0.0 {
                    continue;
                }
                for &f in src {
                    let delta = self.t(e, f) / denom;
                    *counts.entry((e, f)).or_insert(0.0) += delta;
                    totals[f as usize] += delta;
                }
            }
        }
        for ((_, f), c) in counts.iter_mut() {
            *c /= totals[*f as usize];
        }
        self.t = counts;
    }

    pub fn table(&self) -> LexicalTable {
        let mut rows: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
        for (&(e, f), &p) in &self.t {
            rows.entry(self.source_vocab[f as usize].clone())
                .or_default()
                .insert(self.target_vocab[e as usize].clone(), p);
        }
        LexicalTable { rows }
    }
}

/// Train `t(target | source)` with `iterations` rounds of EM from a uniform start.
pub fn train_lexical(corpus: &ParallelCorpus, iterations: usize) -> Result<LexicalTable> {
    if iterations == 0 {
        return Err(Error::invalid("iterations must be at least 1"));
    }
    let mut model = Model1::new(corpus)?;
    for _ in 0..iterations {
        model.iterate();
    }
    Ok(model.table())
}
