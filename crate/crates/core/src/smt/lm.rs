//! Trigram language model with interpolated Kneser-Ney smoothing, stored in
//! backoff form so it can be written to and read from ARPA files.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";
pub const DEFAULT_ORDER: usize = 3;
pub const DEFAULT_DISCOUNT: f64 = 0.75;

/// log10 probability written for `<s>`, which is never predicted.
const ARPA_BOS_LOG10: f64 = -99.0;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Entry {
    /// Natural-log probability.
    log_prob: f64,
    /// Natural-log backoff weight; 0 when the n-gram is never a context.
    log_backoff: f64,
}

/// Backoff n-gram model. Every probability is a natural logarithm.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramLm {
    order: usize,
    /// `tables[n - 1]` holds the n-grams.
    tables: Vec<HashMap<Vec<String>, Entry>>,
}

impl NGramLm {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn contains(&self, word: &str) -> bool {
        self.tables[0].contains_key(&[word.to_owned()][..])
    }

    /// Every predictable word: the training vocabulary plus `</s>` and `<unk>`.
    pub fn vocabulary(&self) -> Vec<String> {
        let mut vocab: Vec<String> = self.tables[0].keys().filter(|k| k[0] != BOS).map(|k| k[0].clone()).collect();
        vocab.sort();
        vocab
    }

    fn normalize<'a>(&self, word: &'a str) -> &'a str {
        if word == BOS || self.tables[0].contains_key(&[word.to_owned()][..]) {
            word
        } else {
            UNK
        }
    }

    /// `ln P(word | context)`; only the last `order - 1` context words matter.
    /// Unknown words are scored as `<unk>`.
    pub fn log_prob(&self, context: &[String], word: &str) -> f64 {
        let keep = context.len().min(self.order - 1);
        let mut gram: Vec<String> = context[context.len() - keep..]
            .iter()
            .map(|w| self.normalize(w).to_owned())
            .collect();
        gram.push(self.normalize(word).to_owned());
        let mut backoff = 0.0;
        loop {
            let n = gram.len();
            if let Some(entry) = self.tables[n - 1].get(&gram) {
                return backoff + entry.log_prob;
            }
            if n == 1 {
                // the unigram table always holds <unk>
                return backoff + self.tables[0][&[UNK.to_owned()][..]].log_prob;
            }
            if let Some(ctx) = self.tables[n - 2].get(&gram[..n - 1]) {
                backoff += ctx.log_backoff;
            }
            gram.remove(0);
        }
    }

    /// `ln P(tokens)` conditioned on `<s>`, without the end-of-sentence term.
    /// An empty sequence scores 0.
    pub fn score_tokens(&self, tokens: &[String]) -> f64 {
        let mut context = vec![BOS.to_owned()];
        let mut total = 0.0;
        for w in tokens {
            total += self.log_prob(&context, w);
            context.push(w.clone());
        }
        total
    }

    /// `ln P(tokens </s>)` conditioned on `<s>`.
    pub fn score_sentence(&self, tokens: &[String]) -> f64 {
        let mut context = vec![BOS.to_owned()];
        context.extend(tokens.iter().cloned());
        self.score_tokens(tokens) + self.log_prob(&context, EOS)
    }

    pub fn to_arpa(&self) -> String {
        let ln10 = std::f64::consts::LN_10;
        let mut out = String::from("\n\\data\\\n");
        for (n, table) in self.tables.iter().enumerate() {
            writeln!(out, "ngram {}={}", n + 1, table.len()).expect("write to string");
        }
        for (n, table) in self.tables.iter().enumerate() {
            writeln!(out, "\n\\{}-grams:", n + 1).expect("write to string");
            let mut grams: Vec<_> = table.iter().collect();
            grams.sort_by(|a, b| a.0.cmp(b.0));
            for (gram, entry) in grams {
                let prob = if n == 0 && gram[0] == BOS {
                    ARPA_BOS_LOG10
                } else {
                    entry.log_prob / ln10
                };
                if n + 1 < self.order && entry.log_backoff != 0.0 {
                    writeln!(out, "{prob}\t{}\t{}", gram.join(" "), entry.log_backoff / ln10)
                } else {
                    writeln!(out, "{prob}\t{}", gram.join(" "))
                }
                .expect("write to string");
            }
        }
        out.push_str("\n\\end\\\n");
        out
    }

    pub fn parse_arpa(text: &str, origin: &Path) -> Result<Self> {
        let ln10 = std::f64::consts::LN_10;
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        let mut tables: Vec<HashMap<Vec<String>, Entry>> = Vec::new();
        let mut section: Option<usize> = None;
        let mut in_data = false;
        let mut ended = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let err = |m: &str| Error::parse(origin, i + 1, m.to_owned());
            if line.is_empty() {
                continue;
            }
            if line == "\\data\\" {
                in_data = true;
                continue;
            }
            if line == "\\end\\" {
                ended = true;
                break;
            }
            if let Some(rest) = line.strip_prefix("ngram ") {
                let (n, c) = rest.split_once('=').ok_or_else(|| err("bad ngram count line"))?;
                let n: usize = n.trim().parse().map_err(|_| err("bad order"))?;
                let c: usize = c.trim().parse().map_err(|_| err("bad count"))?;
                counts.insert(n, c);
                continue;
            }
            if let Some(n) = line.strip_prefix('\\').and_then(|l| l.strip_suffix("-grams:")) {
                let n: usize = n.parse().map_err(|_| err("bad section header"))?;
                if n == 0 || n > counts.len() {
                    return Err(err("section without a count"));
                }
                while tables.len() < n {
                    tables.push(HashMap::new());
                }
                section = Some(n);
                continue;
            }
            let n = section.ok_or_else(|| err("n-gram outside a section"))?;
            let fields: Vec<&str> = line.split('\t').collect();
            let (prob, gram, backoff) = match fields[..] {
                [p, g] => (p, g, None),
                [p, g, b] => (p, g, Some(b)),
                _ => return Err(err("expected `prob<TAB>ngram[<TAB>backoff]`")),
            };
            let gram: Vec<String> = gram.split(' ').map(str::to_owned).collect();
            if gram.len() != n {
                return Err(err("n-gram length does not match section"));
            }
            let prob: f64 = prob.parse().map_err(|_| err("bad probability"))?;
            let backoff: f64 = backoff
                .map(|b| b.parse().map_err(|_| err("bad backoff")))
                .transpose()?
                .unwrap_or(0.0);
            tables[n - 1].insert(
                gram,
                Entry {
                    log_prob: prob * ln10,
                    log_backoff: backoff * ln10,
                },
            );
        }
        if !in_data || !ended || tables.is_empty() {
            return Err(Error::parse(origin, 0, "incomplete ARPA file"));
        }
        for (n, table) in tables.iter().enumerate() {
            if counts.get(&(n + 1)) != Some(&table.len()) {
                return Err(Error::parse(origin, 0, format!("{}-gram count mismatch", n + 1)));
            }
        }
        if !tables[0].contains_key(&[UNK.to_owned()][..]) {
            return Err(Error::parse(origin, 0, "unigram section lacks <unk>"));
        }
        Ok(NGramLm {
            order: tables.len(),
            tables,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_arpa()).map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        Self::parse_arpa(&text, path)
    }
}

/// Train an interpolated Kneser-Ney model of the given order.
///
/// Sentences are padded as `<s> w1 .. wn </s>`. Highest-order n-grams and
/// n-grams starting with `<s>` use raw counts; other orders use continuation
/// counts. The unigram distribution is interpolated with a uniform
/// distribution over the vocabulary (which includes `</s>` and `<unk>`).
pub fn train_lm<S: AsRef<[String]>>(sentences: &[S], order: usize, discount: f64) -> Result<NGramLm> {
    if sentences.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if order == 0 {
        return Err(Error::invalid("order must be at least 1"));
    }
    if !(0.0 < discount && discount < 1.0) {
        return Err(Error::invalid("discount must lie in (0, 1)"));
    }
    // raw counts for every order
    let mut raw: Vec<HashMap<Vec<String>, f64>> = vec![HashMap::new(); order];
    for sentence in sentences {
        let mut padded = Vec::with_capacity(sentence.as_ref().len() + 2);
        padded.push(BOS.to_owned());
        padded.extend(sentence.as_ref().iter().cloned());
        padded.push(EOS.to_owned());
        for n in 1..=order {
            for window in padded.windows(n) {
                if n == 1 && window[0] == BOS {
                    continue;
                }
                *raw[n - 1].entry(window.to_vec()).or_insert(0.0) += 1.0;
            }
        }
    }
    // adjusted counts
    let mut adjusted: Vec<HashMap<Vec<String>, f64>> = vec![HashMap::new(); order];
    adjusted[order - 1] = raw[order - 1].clone();
    for n in (1..order).rev() {
        let mut continuation: HashMap<Vec<String>, f64> = HashMap::new();
        for gram in raw[n].keys() {
            *continuation.entry(gram[1..].to_vec()).or_insert(0.0) += 1.0;
        }
        for (gram, &count) in &raw[n - 1] {
            let value = if gram[0] == BOS {
                count
            } else {
                continuation.get(gram).copied().unwrap_or(0.0)
            };
            if value > 0.0 {
                adjusted[n - 1].insert(gram.clone(), value);
            }
        }
    }

    let mut vocabulary: BTreeSet<String> = adjusted[0].keys().map(|g| g[0].clone()).collect();
    vocabulary.insert(UNK.to_owned());
    vocabulary.insert(EOS.to_owned());
    let vocab_size = vocabulary.len() as f64;

    // per-context totals and number of distinct followers
    let mut context_stats: Vec<HashMap<Vec<String>, (f64, f64)>> = vec![HashMap::new(); order];
    for n in 1..=order {
        for (gram, &a) in &adjusted[n - 1] {
            let stats = context_stats[n - 1].entry(gram[..n - 1].to_vec()).or_insert((0.0, 0.0));
            stats.0 += a;
            stats.1 += 1.0;
        }
    }

    let mut tables: Vec<HashMap<Vec<String>, Entry>> = vec![HashMap::new(); order];
    // unigrams
    let (total, types) = context_stats[0].get(&Vec::new()).copied().unwrap_or((0.0, 0.0));
    let uniform_weight = if total > 0.0 { discount * types / total } else { 1.0 };
    for word in &vocabulary {
        let a = adjusted[0].get(&vec![word.clone()]).copied().unwrap_or(0.0);
        let p = if total > 0.0 { (a - discount).max(0.0) / total } else { 0.0 } + uniform_weight / vocab_size;
        tables[0].insert(
            vec![word.clone()],
            Entry {
                log_prob: p.ln(),
                log_backoff: 0.0,
            },
        );
    }
    tables[0].insert(
        vec![BOS.to_owned()],
        Entry {
            log_prob: ARPA_BOS_LOG10 * std::f64::consts::LN_10,
            log_backoff: 0.0,
        },
    );
    let lower = |tables: &Vec<HashMap<Vec<String>, Entry>>, gram: &[String]| -> f64 {
        // interpolated lower-order probability, already complete for lower orders
        let model = NGramLm {
            order: gram.len(),
            tables: tables[..gram.len()].to_vec(),
        };
        model.log_prob(&gram[..gram.len() - 1], &gram[gram.len() - 1]).exp()
    };
    for n in 2..=order {
        let mut level = HashMap::new();
        for (gram, &a) in &adjusted[n - 1] {
            let context = &gram[..n - 1];
            let (total, types) = context_stats[n - 1][context];
            let gamma = discount * types / total;
            let p = (a - discount).max(0.0) / total + gamma * lower(&tables, &gram[1..]);
            level.insert(
                gram.clone(),
                Entry {
                    log_prob: p.ln(),
                    log_backoff: 0.0,
                },
            );
        }
        tables[n - 1] = level;
        // backoff weights live on the context entries one order down
        for (context, &(total, types)) in &context_stats[n - 1] {
            if let Some(entry) = tables[n - 2].get_mut(context) {
                entry.log_backoff = (discount * types / total).ln();
            }
        }
    }
    Ok(NGramLm { order, tables })
}
