//! Local bilingual dictionary with tiered headword and gloss lookup.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Language;
use crate::error::{Error, Result};

pub const DEFAULT_LOOKUP_LIMIT: usize = 15;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DictEntry {
    pub headword: String,
    pub language: Language,
    pub gloss: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

/// Match quality, best first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchTier {
    Exact,
    Prefix,
    Substring,
    Gloss,
}

fn is_syllabary(c: char) -> bool {
    matches!(c, '\u{13A0}'..='\u{13FF}' | '\u{AB70}'..='\u{ABBF}')
}

/// Lowercase everything except Cherokee syllabary, which has its own case
/// pairs that must not be merged.
pub fn fold(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        if is_syllabary(c) {
            out.push(c);
        } else {
            out.extend(c.to_lowercase());
        }
    }
    out
}

/// Tier of `entry` for an already folded query, if it matches at all.
pub fn match_tier(query: &str, headword: &str, gloss: &str) -> Option<MatchTier> {
    if query.is_empty() {
        return None;
    }
    if headword == query {
        Some(MatchTier::Exact)
    } else if headword.starts_with(query) {
        Some(MatchTier::Prefix)
    } else if headword.contains(query) {
        Some(MatchTier::Substring)
    } else if gloss.contains(query) {
        Some(MatchTier::Gloss)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictHit {
    pub tier: MatchTier,
    pub entry: DictEntry,
}

#[derive(Debug, Clone, Default)]
pub struct DictionaryIndex {
    entries: Vec<DictEntry>,
    folded: Vec<(String, String)>,
}

#[derive(Deserialize)]
struct TsvRow {
    headword: String,
    language: String,
    gloss: String,
    #[serde(default)]
    notes: Option<String>,
}

impl DictionaryIndex {
    /// Duplicate headwords are all kept.
    pub fn build(entries: Vec<DictEntry>) -> Result<Self> {
        if let Some(bad) = entries.iter().position(|e| e.headword.trim().is_empty()) {
            return Err(Error::Validation(format!("dictionary entry {bad} has an empty headword")));
        }
        let folded = entries.iter().map(|e| (fold(&e.headword), fold(&e.gloss))).collect();
        Ok(DictionaryIndex { entries, folded })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[DictEntry] {
        &self.entries
    }

    /// Up to `limit` entries ordered by tier, then headword length in
    /// characters, then headword, then gloss, then file order.
    pub fn lookup(&self, token: &str, limit: usize) -> Result<Vec<DictHit>> {
        if limit == 0 {
            return Err(Error::invalid("lookup limit must be at least 1"));
        }
        let query = fold(token.trim());
        let mut hits: Vec<(MatchTier, usize)> = self
            .folded
            .iter()
            .enumerate()
            .filter_map(|(i, (h, g))| match_tier(&query, h, g).map(|t| (t, i)))
            .collect();
        hits.sort_by(|&(ta, a), &(tb, b)| {
            let (ea, eb) = (&self.entries[a], &self.entries[b]);
            ta.cmp(&tb)
                .then(ea.headword.chars().count().cmp(&eb.headword.chars().count()))
                .then_with(|| ea.headword.cmp(&eb.headword))
                .then_with(|| ea.gloss.cmp(&eb.gloss))
                .then(a.cmp(&b))
        });
        Ok(hits
            .into_iter()
            .take(limit)
            .map(|(tier, i)| DictHit {
                tier,
                entry: self.entries[i].clone(),
            })
            .collect())
    }

    /// Read a tab-separated file with a `headword language gloss notes` header.
    pub fn load_tsv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(b'\t')
            .quoting(false)
            .flexible(true)
            .from_path(path)?;
        let mut entries = Vec::new();
        for (i, row) in reader.deserialize::<TsvRow>().enumerate() {
            let row = row?;
            let language = row
                .language
                .trim()
                .parse()
                .map_err(|e: Error| Error::parse(path, i + 2, e.to_string()))?;
            entries.push(DictEntry {
                headword: row.headword.trim().to_owned(),
                language,
                gloss: row.gloss.trim().to_owned(),
                notes: row.notes.map(|n| n.trim().to_owned()).filter(|n| !n.is_empty()),
            });
        }
        Self::build(entries)
    }

    pub fn save_tsv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::WriterBuilder::new()
            .delimiter(b'\t')
            .quote_style(csv::QuoteStyle::Never)
            .from_path(path)?;
        writer.write_record(["headword", "language", "gloss", "notes"])?;
        for e in &self.entries {
            writer.write_record([e.headword.as_str(), e.language.as_str(), &e.gloss, e.notes.as_deref().unwrap_or("")])?;
        }
        writer.flush().map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }
}
