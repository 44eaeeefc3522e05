//! Phrase table and lexicalized reordering table.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use super::align::{extract_phrases, Link, PhraseSpan};
use super::lexical::{LexicalTable, LEXICAL_FLOOR};
use crate::corpus::{ParallelCorpus, FIELD_SEP};
use crate::error::{Error, Result};

/// Smallest score any phrase-table or reordering probability may take.
pub const SCORE_FLOOR: f64 = LEXICAL_FLOOR;

#[derive(Debug, Clone, PartialEq)]
pub struct PhraseEntry {
    pub target: Vec<String>,
    /// `[φ(t|s), lex(t|s), φ(s|t), lex(s|t)]`, each in (0, 1].
    pub scores: [f64; 4],
    /// Most frequent internal word alignment, relative to the phrase starts.
    pub alignment: Vec<Link>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhraseTable {
    entries: BTreeMap<Vec<String>, Vec<PhraseEntry>>,
    max_phrase_len: usize,
}

impl PhraseTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert an entry; scores are clamped into `[SCORE_FLOOR, 1]`.
    pub fn insert(&mut self, source: Vec<String>, target: Vec<String>, scores: [f64; 4], alignment: Vec<Link>) {
        self.max_phrase_len = self.max_phrase_len.max(source.len()).max(target.len());
        let scores = scores.map(|s| s.clamp(SCORE_FLOOR, 1.0));
        let list = self.entries.entry(source).or_default();
        match list.binary_search_by(|e| e.target.cmp(&target)) {
            Ok(i) => list[i] = PhraseEntry { target, scores, alignment },
            Err(i) => list.insert(i, PhraseEntry { target, scores, alignment }),
        }
    }

    /// Entries for a source phrase, sorted by target.
    pub fn lookup(&self, source: &[String]) -> &[PhraseEntry] {
        self.entries.get(source).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<String>, &PhraseEntry)> {
        self.entries.iter().flat_map(|(s, list)| list.iter().map(move |e| (s, e)))
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Longest source or target phrase stored.
    pub fn max_phrase_len(&self) -> usize {
        self.max_phrase_len
    }

    /// `source ||| target ||| s1 s2 s3 s4`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (source, entry) in self.iter() {
            let [a, b, c, d] = entry.scores;
            writeln!(
                out,
                "{}{FIELD_SEP}{}{FIELD_SEP}{a:e} {b:e} {c:e} {d:e}",
                source.join(" "),
                entry.target.join(" ")
            )
            .expect("write to string");
        }
        out
    }

    /// `source ||| target ||| 0-0 1-1`, internal alignments kept beside the
    /// phrase table so the table file keeps its four-score layout.
    pub fn alignments_to_text(&self) -> String {
        let mut out = String::new();
        for (source, entry) in self.iter() {
            let links: Vec<String> = entry.alignment.iter().map(|(i, j)| format!("{i}-{j}")).collect();
            writeln!(
                out,
                "{}{FIELD_SEP}{}{FIELD_SEP}{}",
                source.join(" "),
                entry.target.join(" "),
                links.join(" ")
            )
            .expect("write to string");
        }
        out
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut table = PhraseTable::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(FIELD_SEP).collect();
            let [source, target, scores] = fields[..] else {
                return Err(Error::parse(origin, i + 1, "expected `source ||| target ||| scores`"));
            };
            let scores: Vec<f64> = scores
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(origin, i + 1, "unparseable score"))?;
            let scores: [f64; 4] = scores
                .try_into()
                .map_err(|_| Error::parse(origin, i + 1, "expected four scores"))?;
            if scores.iter().any(|s| !(*s > 0.0 && *s <= 1.0)) {
                return Err(Error::parse(origin, i + 1, "scores must lie in (0, 1]"));
            }
            let source = words(source);
            let target = words(target);
            if source.is_empty() || target.is_empty() {
                return Err(Error::parse(origin, i + 1, "empty phrase"));
            }
            table.insert(source, target, scores, Vec::new());
        }
        Ok(table)
    }

    pub fn apply_alignments(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(FIELD_SEP.trim()).map(str::trim).collect();
            let [source, target, links] = fields[..] else {
                return Err(Error::parse(origin, i + 1, "expected `source ||| target ||| links`"));
            };
            let links = links
                .split_whitespace()
                .map(|l| {
                    let (a, b) = l.split_once('-')?;
                    Some((a.parse().ok()?, b.parse().ok()?))
                })
                .collect::<Option<Vec<Link>>>()
                .ok_or_else(|| Error::parse(origin, i + 1, "bad link"))?;
            let source = words(source);
            let target = words(target);
            if let Some(list) = self.entries.get_mut(&source) {
                if let Ok(k) = list.binary_search_by(|e| e.target.cmp(&target)) {
                    list[k].alignment = links;
                }
            }
        }
        Ok(())
    }
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_owned).collect()
}

/// Orientation of a phrase relative to the previously translated phrase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    Monotone = 0,
    Swap = 1,
    Discontinuous = 2,
}

impl Orientation {
    /// Orientation of source span `[start, end)` following `previous`
    /// (`None` at the beginning of the sentence).
    pub fn of(previous: Option<(usize, usize)>, start: usize, end: usize) -> Orientation {
        match previous {
            None if start == 0 => Orientation::Monotone,
            None => Orientation::Discontinuous,
            Some((_, prev_end)) if start == prev_end => Orientation::Monotone,
            Some((prev_start, _)) if end == prev_start => Orientation::Swap,
            Some(_) => Orientation::Discontinuous,
        }
    }
}

/// Smoothing mass pulled toward the global orientation distribution.
const REORDERING_SMOOTHING: f64 = 0.5;

/// `p(orientation | source phrase, target phrase)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReorderingTable {
    probs: HashMap<(Vec<String>, Vec<String>), [f64; 3]>,
    prior: [f64; 3],
}

impl Default for ReorderingTable {
    fn default() -> Self {
        ReorderingTable {
            probs: HashMap::new(),
            prior: [1.0 / 3.0; 3],
        }
    }
}

impl ReorderingTable {
    pub fn with_prior(prior: [f64; 3]) -> Self {
        ReorderingTable {
            probs: HashMap::new(),
            prior,
        }
    }

    pub fn prior(&self) -> [f64; 3] {
        self.prior
    }

    pub fn insert(&mut self, source: Vec<String>, target: Vec<String>, probs: [f64; 3]) {
        self.probs.insert((source, target), probs);
    }

    /// Falls back to the global distribution for unseen pairs.
    pub fn prob(&self, source: &[String], target: &[String], orientation: Orientation) -> f64 {
        // HashMap<(Vec, Vec)> cannot be queried by slices without allocating
        self.probs
            .get(&(source.to_vec(), target.to_vec()))
            .unwrap_or(&self.prior)[orientation as usize]
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// First line `prior ||| m s d`, then `source ||| target ||| m s d`.
    pub fn to_text(&self) -> String {
        let mut keys: Vec<_> = self.probs.keys().collect();
        keys.sort();
        let [m, s, d] = self.prior;
        let mut out = format!("<prior>{FIELD_SEP}<prior>{FIELD_SEP}{m:e} {s:e} {d:e}\n");
        for key in keys {
            let [m, s, d] = self.probs[key];
            writeln!(out, "{}{FIELD_SEP}{}{FIELD_SEP}{m:e} {s:e} {d:e}", key.0.join(" "), key.1.join(" "))
                .expect("write to string");
        }
        out
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut table = ReorderingTable::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(FIELD_SEP).collect();
            let [source, target, probs] = fields[..] else {
                return Err(Error::parse(origin, i + 1, "expected `source ||| target ||| m s d`"));
            };
            let probs: Vec<f64> = probs
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(origin, i + 1, "unparseable probability"))?;
            let probs: [f64; 3] = probs
                .try_into()
                .map_err(|_| Error::parse(origin, i + 1, "expected three probabilities"))?;
            if source == "<prior>" && target == "<prior>" {
                table.prior = probs;
            } else {
                table.insert(words(source), words(target), probs);
            }
        }
        Ok(table)
    }
}

/// Word-based orientation of an extracted phrase occurrence.
fn occurrence_orientation(links: &BTreeSet<Link>, span: &PhraseSpan) -> Orientation {
    let (s1, s2) = (span.source.start, span.source.end);
    let t1 = span.target.start;
    if t1 == 0 {
        return if s1 == 0 { Orientation::Monotone } else { Orientation::Discontinuous };
    }
    if s1 > 0 && links.contains(&(s1 - 1, t1 - 1)) {
        Orientation::Monotone
    } else if links.contains(&(s2, t1 - 1)) {
        Orientation::Swap
    } else {
        Orientation::Discontinuous
    }
}

/// Lexical weight of `target` given `source` under `table` (`t(tgt|src)`),
/// following the phrase-internal `links`. Unaligned target words are scored
/// against the whole source phrase.
pub fn lexical_weight(source: &[String], target: &[String], links: &[Link], table: &LexicalTable) -> f64 {
    let mut weight = 1.0;
    for (j, e) in target.iter().enumerate() {
        let aligned: Vec<usize> = links.iter().filter(|l| l.1 == j).map(|l| l.0).collect();
        let factor = if aligned.is_empty() {
            source.iter().map(|f| table.prob(e, f)).sum::<f64>() / source.len() as f64
        } else {
            aligned.iter().map(|&i| table.prob(e, &source[i])).sum::<f64>() / aligned.len() as f64
        };
        weight *= factor;
    }
    weight
}

#[derive(Default)]
struct PairStats {
    count: f64,
    best_forward_lex: f64,
    best_reverse_lex: f64,
    alignments: BTreeMap<Vec<Link>, usize>,
    orientations: [f64; 3],
}

/// Extract and score phrase pairs from an aligned corpus.
///
/// `forward` holds `t(target | source)`, `reverse` holds `t(source | target)`.
pub fn build_tables(
    corpus: &ParallelCorpus,
    alignments: &[BTreeSet<Link>],
    forward: &LexicalTable,
    reverse: &LexicalTable,
    max_len: usize,
) -> Result<(PhraseTable, ReorderingTable)> {
    if alignments.len() != corpus.len() {
        return Err(Error::ParallelLengthMismatch {
            left: corpus.len(),
            right: alignments.len(),
        });
    }
    let mut pairs: BTreeMap<(Vec<String>, Vec<String>), PairStats> = BTreeMap::new();
    let mut source_counts: HashMap<Vec<String>, f64> = HashMap::new();
    let mut target_counts: HashMap<Vec<String>, f64> = HashMap::new();
    let mut global = [0.0f64; 3];

    for (pair, links) in corpus.pairs.iter().zip(alignments) {
        for span in extract_phrases(pair.source.len(), pair.target.len(), links, max_len) {
            let source = pair.source[span.source.clone()].to_vec();
            let target = pair.target[span.target.clone()].to_vec();
            let reversed_links: Vec<Link> = span.links.iter().map(|&(i, j)| (j, i)).collect();
            let fwd = lexical_weight(&source, &target, &span.links, forward);
            let rev = lexical_weight(&target, &source, &reversed_links, reverse);
            let orientation = occurrence_orientation(links, &span);
            *source_counts.entry(source.clone()).or_insert(0.0) += 1.0;
            *target_counts.entry(target.clone()).or_insert(0.0) += 1.0;
            global[orientation as usize] += 1.0;
            let stats = pairs.entry((source, target)).or_default();
            stats.count += 1.0;
            stats.best_forward_lex = stats.best_forward_lex.max(fwd);
            stats.best_reverse_lex = stats.best_reverse_lex.max(rev);
            *stats.alignments.entry(span.links).or_insert(0) += 1;
            stats.orientations[orientation as usize] += 1.0;
        }
    }

    let total_occurrences: f64 = global.iter().sum();
    let prior = global.map(|c| (c + 1.0) / (total_occurrences + 3.0));
    let mut phrase_table = PhraseTable::new();
    let mut reordering = ReorderingTable::with_prior(prior);
    for ((source, target), stats) in pairs {
        let phi_ts = stats.count / source_counts[&source];
        let phi_st = stats.count / target_counts[&target];
        let alignment = stats
            .alignments
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
            .map(|(links, _)| links.clone())
            .unwrap_or_default();
        let orientation = [0, 1, 2].map(|o| {
            (stats.orientations[o] + REORDERING_SMOOTHING * prior[o]) / (stats.count + REORDERING_SMOOTHING)
        });
        reordering.insert(source.clone(), target.clone(), orientation);
        phrase_table.insert(
            source,
            target,
            [phi_ts, stats.best_forward_lex, phi_st, stats.best_reverse_lex],
            alignment,
        );
    }
    Ok((phrase_table, reordering))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Direction, SentencePair};

    fn v(s: &str) -> Vec<String> {
        words(s)
    }

    #[test]
    fn orientation_rules() {
        assert_eq!(Orientation::of(None, 0, 1), Orientation::Monotone);
        assert_eq!(Orientation::of(None, 1, 2), Orientation::Discontinuous);
        assert_eq!(Orientation::of(Some((0, 2)), 2, 3), Orientation::Monotone);
        assert_eq!(Orientation::of(Some((2, 3)), 0, 2), Orientation::Swap);
        assert_eq!(Orientation::of(Some((3, 4)), 0, 1), Orientation::Discontinuous);
    }

    #[test]
    fn builds_scored_tables() {
        let corpus = ParallelCorpus::new(
            Direction::ChrEn,
            vec![
                SentencePair::from_text("a b", "x y").unwrap(),
                SentencePair::from_text("a c", "x z").unwrap(),
            ],
        );
        let links: Vec<BTreeSet<Link>> = vec![[(0, 0), (1, 1)].into(), [(0, 0), (1, 1)].into()];
        let fwd = LexicalTable::from_rows([("a", vec![("x", 1.0)]), ("b", vec![("y", 1.0)]), ("c", vec![("z", 1.0)])]).unwrap();
        let rev = LexicalTable::from_rows([("x", vec![("a", 1.0)]), ("y", vec![("b", 1.0)]), ("z", vec![("c", 1.0)])]).unwrap();
        let (pt, rt) = build_tables(&corpus, &links, &fwd, &rev, 4).unwrap();
        // a->x, b->y, ab->xy, c->z, ac->xz
        assert_eq!(pt.len(), 5);
        let ax = &pt.lookup(&v("a"))[0];
        assert_eq!(ax.target, v("x"));
        assert_eq!(ax.scores, [1.0, 1.0, 1.0, 1.0]);
        assert_eq!(ax.alignment, vec![(0, 0)]);
        let by = &pt.lookup(&v("b"))[0];
        assert_eq!(by.scores[0], 1.0);
        // a->x always starts the sentence: monotone dominates
        let m = rt.prob(&v("a"), &v("x"), Orientation::Monotone);
        assert!(m > rt.prob(&v("a"), &v("x"), Orientation::Swap));
        let sum: f64 = [Orientation::Monotone, Orientation::Swap, Orientation::Discontinuous]
            .iter()
            .map(|&o| rt.prob(&v("b"), &v("y"), o))
            .sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn phrase_table_text_round_trip() {
        let mut pt = PhraseTable::new();
        pt.insert(v("a b"), v("x"), [0.5, 0.25, 1.0, 0.125], vec![(0, 0), (1, 0)]);
        pt.insert(v("a"), v("x"), [1.0, 1.0, 0.5, 0.5], vec![(0, 0)]);
        let text = pt.to_text();
        assert!(text.contains("a b ||| x ||| 5e-1 2.5e-1 1e0 1.25e-1"));
        let mut back = PhraseTable::parse(&text, Path::new("pt")).unwrap();
        back.apply_alignments(&pt.alignments_to_text(), Path::new("al")).unwrap();
        assert_eq!(back, pt);
    }

    #[test]
    fn phrase_table_rejects_out_of_range_scores() {
        assert!(PhraseTable::parse("a ||| x ||| 0 1 1 1\n", Path::new("pt")).is_err());
        assert!(PhraseTable::parse("a ||| x ||| 0.5 1 1\n", Path::new("pt")).is_err());
    }

    #[test]
    fn reordering_text_round_trip() {
        let mut rt = ReorderingTable::with_prior([0.5, 0.25, 0.25]);
        rt.insert(v("a"), v("x"), [0.7, 0.2, 0.1]);
        let back = ReorderingTable::parse(&rt.to_text(), Path::new("rt")).unwrap();
        assert_eq!(back, rt);
    }
}
