//! Exhaustive search over every segmentation and ordering of a short
//! source, scored from scratch. Shared by the decoder tests and the
//! acceptance suite.

use mtloop_core::smt::{NGramLm, Orientation, PhraseTable, ReorderingTable, SmtWeights};
use rand::seq::SliceRandom;
use rand::Rng;

pub struct Instance {
    pub source: Vec<String>,
    pub phrases: PhraseTable,
    pub reordering: ReorderingTable,
    pub lm: NGramLm,
    pub weights: SmtWeights,
}

struct Option_ {
    start: usize,
    end: usize,
    target: Vec<String>,
    scores: [f64; 4],
}

fn options(source: &[String], pt: &PhraseTable) -> Vec<Option_> {
    let mut out = Vec::new();
    for start in 0..source.len() {
        for end in start + 1..=source.len() {
            for entry in pt.lookup(&source[start..end]) {
                out.push(Option_ {
                    start,
                    end,
                    target: entry.target.clone(),
                    scores: entry.scores,
                });
            }
        }
        if pt.lookup(&source[start..start + 1]).is_empty() {
            out.push(Option_ {
                start,
                end: start + 1,
                target: vec![source[start].clone()],
                scores: [1e-7; 4],
            });
        }
    }
    out
}

fn orientation(prev: Option<(usize, usize)>, start: usize, end: usize) -> usize {
    match prev {
        None => {
            if start == 0 {
                0
            } else {
                2
            }
        }
        Some((ps, pe)) => {
            if start == pe {
                0
            } else if end == ps {
                1
            } else {
                2
            }
        }
    }
}

fn score(inst: &Instance, opts: &[Option_], order: &[usize]) -> (f64, Vec<String>) {
    let w = &inst.weights;
    let mut distortion = 0.0;
    let mut reordering = 0.0;
    let mut tm = 0.0;
    let mut target = Vec::new();
    let mut prev: Option<(usize, usize)> = None;
    let kinds = [Orientation::Monotone, Orientation::Swap, Orientation::Discontinuous];
    for &k in order {
        let o = &opts[k];
        let prev_end = prev.map_or(0, |p| p.1);
        distortion -= (o.start as f64 - prev_end as f64).abs();
        let kind = kinds[orientation(prev, o.start, o.end)];
        let p = inst.reordering.prob(&inst.source[o.start..o.end], &o.target, kind).max(1e-7);
        reordering += p.ln();
        for i in 0..4 {
            tm += w.translation_model[i] * o.scores[i].ln();
        }
        target.extend(o.target.iter().cloned());
        prev = Some((o.start, o.end));
    }
    let lm = inst.lm.score_sentence(&target);
    let total = w.distortion * distortion
        + w.lm * lm
        + w.lexical_reordering * reordering
        + w.phrase_penalty * -(order.len() as f64)
        + tm
        + w.word_penalty * -(target.len() as f64);
    (total, target)
}

/// Best `(score, target)` over all derivations; near-ties go to the
/// lexicographically smaller target string.
pub fn best(inst: &Instance) -> (f64, Vec<String>) {
    let opts = options(&inst.source, &inst.phrases);
    let mut covered = vec![false; inst.source.len()];
    let mut order = Vec::new();
    let mut best: Option<(f64, Vec<String>)> = None;
    walk(inst, &opts, &mut covered, &mut order, &mut best);
    best.expect("pass-through guarantees a derivation")
}

fn walk(
    inst: &Instance,
    opts: &[Option_],
    covered: &mut Vec<bool>,
    order: &mut Vec<usize>,
    best: &mut Option<(f64, Vec<String>)>,
) {
    if covered.iter().all(|&c| c) {
        let (s, t) = score(inst, opts, order);
        let better = match best {
            None => true,
            Some((bs, bt)) => {
                if (s - *bs).abs() <= 1e-9 {
                    t.join(" ") < bt.join(" ")
                } else {
                    s > *bs
                }
            }
        };
        if better {
            *best = Some((s, t));
        }
        return;
    }
    for (k, o) in opts.iter().enumerate() {
        if covered[o.start..o.end].iter().any(|&c| c) {
            continue;
        }
        covered[o.start..o.end].iter_mut().for_each(|c| *c = true);
        order.push(k);
        walk(inst, opts, covered, order, best);
        order.pop();
        covered[o.start..o.end].iter_mut().for_each(|c| *c = false);
    }
}

fn words(rng: &mut impl Rng, vocab: &[&str], len: usize) -> Vec<String> {
    (0..len).map(|_| vocab.choose(rng).unwrap().to_string()).collect()
}

/// A random source of 1..=5 tokens with a phrase table of at most 8 entries.
pub fn random_instance(rng: &mut impl Rng) -> Instance {
    let source_vocab = ["a", "b", "c", "d"];
    let target_vocab = ["w", "x", "y", "z"];
    let len = rng.gen_range(1..=5);
    let source = words(rng, &source_vocab, len);
    let mut phrases = PhraseTable::new();
    let mut reordering = ReorderingTable::with_prior([0.5, 0.2, 0.3]);
    let entries = rng.gen_range(1..=8);
    while phrases.len() < entries {
        let span = rng.gen_range(1..=len.min(3));
        let start = rng.gen_range(0..=len - span);
        let src = source[start..start + span].to_vec();
        let tgt_len = rng.gen_range(1..=3);
        let tgt = words(rng, &target_vocab, tgt_len);
        let scores = [0; 4].map(|_| rng.gen_range(0.05..=1.0));
        if rng.gen_bool(0.5) {
            let m = rng.gen_range(0.05..0.9);
            let s = rng.gen_range(0.0..(1.0 - m));
            reordering.insert(src.clone(), tgt.clone(), [m, s, 1.0 - m - s]);
        }
        phrases.insert(src, tgt, scores, vec![]);
    }
    let lm_data: Vec<Vec<String>> = (0..6)
        .map(|_| {
            let l = rng.gen_range(1..=5);
            words(rng, &target_vocab, l)
        })
        .collect();
    let lm = mtloop_core::smt::train_lm(&lm_data, 3, 0.75).unwrap();
    let mut w: [f64; 9] = [0.0; 9].map(|_: f64| rng.gen_range(-1.0..1.0));
    // keep the language model and translation scores meaningful
    w[1] = w[1].abs();
    let weights = SmtWeights::from_array(w);
    Instance {
        source,
        phrases,
        reordering,
        lm,
        weights,
    }
}
