//! Symmetrized word alignment and consistent phrase-pair extraction.

use std::collections::BTreeSet;
use std::ops::Range;

use super::lexical::LexicalTable;
use crate::corpus::SentencePair;

/// A word link `(source index, target index)`.
pub type Link = (usize, usize);

pub const DEFAULT_MAX_PHRASE_LEN: usize = 4;

/// Viterbi links of `t(target | source)`: every target word links to its
/// best source word (ties go to the lowest source index).
pub fn viterbi_source_to_target(pair: &SentencePair, forward: &LexicalTable) -> BTreeSet<Link> {
    let mut links = BTreeSet::new();
    for (j, e) in pair.target.iter().enumerate() {
        let best = argmax(pair.source.iter().map(|f| forward.prob(e, f)));
        links.insert((best, j));
    }
    links
}

/// Viterbi links of `t(source | target)`: every source word links to its
/// best target word.
pub fn viterbi_target_to_source(pair: &SentencePair, reverse: &LexicalTable) -> BTreeSet<Link> {
    let mut links = BTreeSet::new();
    for (i, f) in pair.source.iter().enumerate() {
        let best = argmax(pair.target.iter().map(|e| reverse.prob(f, e)));
        links.insert((i, best));
    }
    links
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Intersection of the two directional alignments grown toward their union
/// along horizontal, vertical and diagonal neighbours (grow-diag).
pub fn symmetrize(source_len: usize, target_len: usize, a: &BTreeSet<Link>, b: &BTreeSet<Link>) -> BTreeSet<Link> {
    const NEIGHBOURS: [(isize, isize); 8] = [(-1, 0), (0, -1), (1, 0), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)];
    let union: BTreeSet<Link> = a.union(b).copied().collect();
    let mut alignment: BTreeSet<Link> = a.intersection(b).copied().collect();
    let mut source_aligned = vec![false; source_len];
    let mut target_aligned = vec![false; target_len];
    for &(i, j) in &alignment {
        source_aligned[i] = true;
        target_aligned[j] = true;
    }
    loop {
        let mut added = false;
        let snapshot: Vec<Link> = alignment.iter().copied().collect();
        for (i, j) in snapshot {
            for (di, dj) in NEIGHBOURS {
                let (Some(ni), Some(nj)) = (i.checked_add_signed(di), j.checked_add_signed(dj)) else {
                    continue;
                };
                if ni >= source_len || nj >= target_len {
                    continue;
                }
                let candidate = (ni, nj);
                if union.contains(&candidate)
                    && !alignment.contains(&candidate)
                    && (!source_aligned[ni] || !target_aligned[nj])
                {
                    alignment.insert(candidate);
                    source_aligned[ni] = true;
                    target_aligned[nj] = true;
                    added = true;
                }
            }
        }
        if !added {
            break;
        }
    }
    alignment
}

/// Symmetrized alignment for one sentence pair. `forward` holds
/// `t(target | source)`, `reverse` holds `t(source | target)`.
pub fn align(pair: &SentencePair, forward: &LexicalTable, reverse: &LexicalTable) -> BTreeSet<Link> {
    let a = viterbi_source_to_target(pair, forward);
    let b = viterbi_target_to_source(pair, reverse);
    symmetrize(pair.source.len(), pair.target.len(), &a, &b)
}

/// A phrase pair found in one sentence pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhraseSpan {
    pub source: Range<usize>,
    pub target: Range<usize>,
    /// Links inside the box, relative to the span starts.
    pub links: Vec<Link>,
}

/// Every phrase pair consistent with `links`: at least one link inside the
/// box and no link connecting the inside to the outside. Unaligned target
/// words at the box edges are absorbed as alternative extractions.
pub fn extract_phrases(source_len: usize, target_len: usize, links: &BTreeSet<Link>, max_len: usize) -> Vec<PhraseSpan> {
    let mut target_aligned = vec![false; target_len];
    for &(_, j) in links {
        target_aligned[j] = true;
    }
    let mut out = Vec::new();
    for s1 in 0..source_len {
        for s2 in s1..source_len.min(s1 + max_len) {
            let mut t_min = usize::MAX;
            let mut t_max = 0;
            for &(i, j) in links {
                if (s1..=s2).contains(&i) {
                    t_min = t_min.min(j);
                    t_max = t_max.max(j);
                }
            }
            if t_min == usize::MAX {
                continue;
            }
            if links
                .iter()
                .any(|&(i, j)| (t_min..=t_max).contains(&j) && !(s1..=s2).contains(&i))
            {
                continue;
            }
            let mut t1 = t_min;
            loop {
                let mut t2 = t_max;
                while t2 + 1 - t1 <= max_len {
                    let inside = links
                        .iter()
                        .filter(|&&(i, j)| (s1..=s2).contains(&i) && (t1..=t2).contains(&j))
                        .map(|&(i, j)| (i - s1, j - t1))
                        .collect();
                    out.push(PhraseSpan {
                        source: s1..s2 + 1,
                        target: t1..t2 + 1,
                        links: inside,
                    });
                    t2 += 1;
                    if t2 >= target_len || target_aligned[t2] {
                        break;
                    }
                }
                if t1 == 0 || target_aligned[t1 - 1] {
                    break;
                }
                t1 -= 1;
            }
        }
    }
    out.sort_by(|a, b| {
        (a.source.start, a.source.end, a.target.start, a.target.end).cmp(&(b.source.start, b.source.end, b.target.start, b.target.end))
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn links(pairs: &[(usize, usize)]) -> BTreeSet<Link> {
        pairs.iter().copied().collect()
    }

    /// Brute-force consistency oracle over every box.
    fn oracle(source_len: usize, target_len: usize, a: &BTreeSet<Link>, max_len: usize) -> Vec<(Range<usize>, Range<usize>)> {
        let mut out = Vec::new();
        for s1 in 0..source_len {
            for s2 in s1 + 1..=source_len {
                for t1 in 0..target_len {
                    for t2 in t1 + 1..=target_len {
                        if s2 - s1 > max_len || t2 - t1 > max_len {
                            continue;
                        }
                        let inside = a.iter().filter(|(i, j)| (s1..s2).contains(i) && (t1..t2).contains(j)).count();
                        let leaks = a
                            .iter()
                            .any(|(i, j)| (s1..s2).contains(i) != (t1..t2).contains(j));
                        if inside > 0 && !leaks {
                            out.push((s1..s2, t1..t2));
                        }
                    }
                }
            }
        }
        out.sort_by_key(|(s, t)| (s.start, s.end, t.start, t.end));
        out
    }

    fn spans(found: &[PhraseSpan]) -> Vec<(Range<usize>, Range<usize>)> {
        let mut v: Vec<_> = found.iter().map(|p| (p.source.clone(), p.target.clone())).collect();
        v.sort_by_key(|(s, t)| (s.start, s.end, t.start, t.end));
        v
    }

    #[test]
    fn diagonal_pair_extracts_three_phrases() {
        let a = links(&[(0, 0), (1, 1)]);
        let found = spans(&extract_phrases(2, 2, &a, 4));
        assert_eq!(found, vec![(0..1, 0..1), (0..2, 0..2), (1..2, 1..2)]);
        assert_eq!(found, oracle(2, 2, &a, 4));
    }

    #[test]
    fn crossed_links_extract_single_words_and_whole_pair() {
        // each crossed link is a closed box on its own
        let a = links(&[(0, 1), (1, 0)]);
        let found = spans(&extract_phrases(2, 2, &a, 4));
        assert_eq!(found, vec![(0..1, 1..2), (0..2, 0..2), (1..2, 0..1)]);
        assert_eq!(found, oracle(2, 2, &a, 4));
    }

    #[test]
    fn unaligned_pair_extracts_nothing() {
        assert!(extract_phrases(2, 2, &BTreeSet::new(), 4).is_empty());
    }

    #[test]
    fn matches_oracle_on_all_small_alignments() {
        // every alignment of a 3x3 grid
        for mask in 0u32..(1 << 9) {
            let a: BTreeSet<Link> = (0..9).filter(|b| mask & (1 << b) != 0).map(|b| (b / 3, b % 3)).collect();
            for max_len in [1, 2, 4] {
                assert_eq!(spans(&extract_phrases(3, 3, &a, max_len)), oracle(3, 3, &a, max_len), "mask {mask:b}");
            }
        }
    }

    #[test]
    fn align_single_word() {
        let t = LexicalTable::from_rows([("a", vec![("x", 1.0)])]).unwrap();
        let r = LexicalTable::from_rows([("x", vec![("a", 1.0)])]).unwrap();
        let pair = SentencePair::from_text("a", "x").unwrap();
        assert_eq!(align(&pair, &t, &r), links(&[(0, 0)]));
    }

    #[test]
    fn align_diagonal_dominant() {
        let fwd = LexicalTable::from_rows([
            ("a", vec![("x", 0.9), ("y", 0.05), ("z", 0.05)]),
            ("b", vec![("x", 0.05), ("y", 0.9), ("z", 0.05)]),
            ("c", vec![("x", 0.05), ("y", 0.05), ("z", 0.9)]),
        ])
        .unwrap();
        let rev = LexicalTable::from_rows([
            ("x", vec![("a", 0.9), ("b", 0.05), ("c", 0.05)]),
            ("y", vec![("a", 0.05), ("b", 0.9), ("c", 0.05)]),
            ("z", vec![("a", 0.05), ("b", 0.05), ("c", 0.9)]),
        ])
        .unwrap();
        let pair = SentencePair::from_text("a b c", "x y z").unwrap();
        assert_eq!(align(&pair, &fwd, &rev), links(&[(0, 0), (1, 1), (2, 2)]));
    }

    /// Enumerate every alignment function in each direction, keep the one
    /// with the highest product score, then symmetrize.
    #[test]
    fn two_by_two_matches_enumeration() {
        let fwd = LexicalTable::from_rows([("a", vec![("x", 0.6), ("y", 0.4)]), ("b", vec![("x", 0.7), ("y", 0.3)])]).unwrap();
        let rev = LexicalTable::from_rows([("x", vec![("a", 0.2), ("b", 0.8)]), ("y", vec![("a", 0.9), ("b", 0.1)])]).unwrap();
        let pair = SentencePair::from_text("a b", "x y").unwrap();
        let (src, tgt) = (&pair.source, &pair.target);

        let mut best_fwd = (f64::MIN, BTreeSet::new());
        let mut best_rev = (f64::MIN, BTreeSet::new());
        for f in 0..4usize {
            // f encodes a function from two positions to {0,1}
            let choice = [f & 1, (f >> 1) & 1];
            let score_fwd: f64 = (0..2).map(|j| fwd.prob(&tgt[j], &src[choice[j]])).product();
            if score_fwd > best_fwd.0 {
                best_fwd = (score_fwd, (0..2).map(|j| (choice[j], j)).collect());
            }
            let score_rev: f64 = (0..2).map(|i| rev.prob(&src[i], &tgt[choice[i]])).product();
            if score_rev > best_rev.0 {
                best_rev = (score_rev, (0..2).map(|i| (i, choice[i])).collect());
            }
        }
        // forward: x<-b (0.7), y<-a (0.4); reverse: a->y (0.9), b->x (0.8)
        assert_eq!(best_fwd.1, links(&[(1, 0), (0, 1)]));
        assert_eq!(best_rev.1, links(&[(0, 1), (1, 0)]));
        let expected = symmetrize(2, 2, &best_fwd.1, &best_rev.1);
        assert_eq!(align(&pair, &fwd, &rev), expected);
        assert_eq!(expected, links(&[(0, 1), (1, 0)]));
    }

    #[test]
    fn grow_diag_adds_neighbours_of_unaligned_words() {
        let a = links(&[(0, 0), (1, 1)]);
        let b = links(&[(0, 0), (1, 2), (1, 1)]);
        assert_eq!(symmetrize(2, 3, &a, &b), links(&[(0, 0), (1, 1), (1, 2)]));
    }
}
