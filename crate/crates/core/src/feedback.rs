//! Append-only feedback store: translations shown to users, expert and common
//! feedback, direct-assessment ratings and the example-input queue.
//!
//! Each record kind lives in its own JSONL file under the data directory. The
//! in-memory index is rebuilt from those files on open. Writes hold the index
//! lock while appending, so there is a single writer at any time.

use std::collections::HashMap;
use std::fmt;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, SubsecRound, Utc};
use parking_lot::RwLock;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::corpus::{Direction, Language, ParallelCorpus, SentencePair};
use crate::error::{Error, Result};
use crate::textmetrics::pearson;

pub const RECORD_VERSION: u32 = 1;

pub const TRANSLATIONS_FILE: &str = "translations.jsonl";
pub const EXPERT_FILE: &str = "feedback_expert.jsonl";
pub const COMMON_FILE: &str = "feedback_common.jsonl";
pub const DA_FILE: &str = "ratings_da.jsonl";
pub const EXAMPLES_FILE: &str = "examples.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Smt,
    Nmt,
}

impl ModelKind {
    pub const ALL: [ModelKind; 2] = [ModelKind::Smt, ModelKind::Nmt];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Smt => "smt",
            ModelKind::Nmt => "nmt",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smt" => Ok(ModelKind::Smt),
            "nmt" => Ok(ModelKind::Nmt),
            other => Err(Error::invalid(format!("unknown model {other:?}"))),
        }
    }
}

/// What was shown to a user, so that later feedback can refer to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranslationRecord {
    pub v: u32,
    pub id: String,
    pub source: String,
    pub direction: Direction,
    pub model: ModelKind,
    pub output: String,
    pub stars: f64,
    pub created_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewTranslation {
    pub source: String,
    pub direction: Direction,
    pub model: ModelKind,
    pub output: String,
    pub stars: f64,
    pub example_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpertFeedback {
    pub translation_id: String,
    pub quality: u8,
    pub correction: String,
    #[serde(default)]
    pub comment: Option<String>,
    pub author: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommonFeedback {
    pub translation_id: String,
    /// Required; optional here only so a comment-only submission can be
    /// rejected with a validation error rather than a decode error.
    #[serde(default)]
    pub helpfulness: Option<u8>,
    #[serde(default)]
    pub comment: Option<String>,
}

/// A stored record with its id and timestamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stored<T> {
    pub v: u32,
    pub id: String,
    pub created_at: DateTime<Utc>,
    #[serde(flatten)]
    pub record: T,
}

/// Direct-assessment bands over 0..=100. 90 belongs to `PreservesMeaning`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DaBand {
    Incorrect,
    FewKeywords,
    MajorMistakes,
    Understandable,
    PreservesMeaning,
    Perfect,
}

impl DaBand {
    pub const ALL: [DaBand; 6] = [
        DaBand::Incorrect,
        DaBand::FewKeywords,
        DaBand::MajorMistakes,
        DaBand::Understandable,
        DaBand::PreservesMeaning,
        DaBand::Perfect,
    ];

    pub fn from_score(score: u8) -> Result<DaBand> {
        Ok(match score {
            0..=10 => DaBand::Incorrect,
            11..=29 => DaBand::FewKeywords,
            30..=50 => DaBand::MajorMistakes,
            51..=69 => DaBand::Understandable,
            70..=90 => DaBand::PreservesMeaning,
            91..=100 => DaBand::Perfect,
            _ => return Err(Error::Validation(format!("DA score {score} outside 0..=100"))),
        })
    }

    /// Inclusive score range.
    pub fn range(self) -> (u8, u8) {
        match self {
            DaBand::Incorrect => (0, 10),
            DaBand::FewKeywords => (11, 29),
            DaBand::MajorMistakes => (30, 50),
            DaBand::Understandable => (51, 69),
            DaBand::PreservesMeaning => (70, 90),
            DaBand::Perfect => (91, 100),
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            DaBand::Incorrect => "wrong and inaccurate",
            DaBand::FewKeywords => "some keywords right, meaning differs",
            DaBand::MajorMistakes => "fragments translated, major mistakes",
            DaBand::Understandable => "meaning conveyed with grammatical errors or typos",
            DaBand::PreservesMeaning => "semantics closely preserved",
            DaBand::Perfect => "perfect",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DaRating {
    pub translation_id: String,
    pub score: u8,
    pub band: DaBand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExampleStatus {
    Unlabeled,
    Labeled,
}

impl FromStr for ExampleStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unlabeled" => Ok(ExampleStatus::Unlabeled),
            "labeled" => Ok(ExampleStatus::Labeled),
            other => Err(Error::invalid(format!("unknown example status {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleItem {
    pub v: u32,
    pub id: String,
    pub language: Language,
    pub text: String,
    pub status: ExampleStatus,
}

/// One cell of the per model and direction report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsCell {
    pub model: ModelKind,
    pub direction: Direction,
    pub count: usize,
    pub mean_quality: Option<f64>,
    /// Correlation of expert quality with the stars shown; `None` below two
    /// records or with zero variance on either side.
    pub pearson: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub cells: Vec<StatsCell>,
}

impl StatsReport {
    pub fn cell(&self, model: ModelKind, direction: Direction) -> &StatsCell {
        self.cells
            .iter()
            .find(|c| c.model == model && c.direction == direction)
            .expect("report has all four cells")
    }
}

#[derive(Debug, Default)]
struct Index {
    translations: HashMap<String, TranslationRecord>,
    expert: Vec<Stored<ExpertFeedback>>,
    common: Vec<Stored<CommonFeedback>>,
    da: Vec<Stored<DaRating>>,
    /// In insertion order; status updated in place from later lines.
    examples: Vec<ExampleItem>,
    example_pos: HashMap<String, usize>,
}

impl Index {
    fn apply_example(&mut self, item: ExampleItem) {
        match self.example_pos.get(&item.id) {
            Some(&pos) => {
                // status only moves forward
                if item.status == ExampleStatus::Labeled {
                    self.examples[pos].status = ExampleStatus::Labeled;
                }
            }
            None => {
                self.example_pos.insert(item.id.clone(), self.examples.len());
                self.examples.push(item);
            }
        }
    }
}

pub struct FeedbackStore {
    dir: PathBuf,
    index: RwLock<Index>,
}

fn now() -> DateTime<Utc> {
    Utc::now().trunc_subsecs(0)
}

fn new_id() -> String {
    Uuid::new_v4().to_string()
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(format!("opening {}", path.display()), e)),
    };
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::parse(path, lineno + 1, e.to_string()))?);
    }
    Ok(out)
}

fn non_blank(s: &Option<String>) -> Option<String> {
    s.as_ref().map(|c| c.trim()).filter(|c| !c.is_empty()).map(str::to_owned)
}

impl FeedbackStore {
    /// Open (creating if needed) the store under `dir` and rebuild the index.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        let mut index = Index::default();
        for t in read_jsonl::<TranslationRecord>(&dir.join(TRANSLATIONS_FILE))? {
            index.translations.insert(t.id.clone(), t);
        }
        index.expert = read_jsonl(&dir.join(EXPERT_FILE))?;
        index.common = read_jsonl(&dir.join(COMMON_FILE))?;
        index.da = read_jsonl(&dir.join(DA_FILE))?;
        for item in read_jsonl::<ExampleItem>(&dir.join(EXAMPLES_FILE))? {
            index.apply_example(item);
        }
        Ok(FeedbackStore {
            dir,
            index: RwLock::new(index),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Whether a probe file can be created in the data directory.
    pub fn is_writable(&self) -> bool {
        let probe = self.dir.join(format!(".probe-{}", new_id()));
        let ok = File::create(&probe).is_ok();
        let _ = fs::remove_file(&probe);
        ok
    }

    fn append<T: Serialize>(&self, file: &str, record: &T) -> Result<()> {
        let path = self.dir.join(file);
        let mut line = serde_json::to_string(record)?;
        line.push('\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
        f.write_all(line.as_bytes())
            .and_then(|_| f.sync_data())
            .map_err(|e| Error::io(format!("appending to {}", path.display()), e))
    }

    pub fn record_translation(&self, t: NewTranslation) -> Result<TranslationRecord> {
        if t.source.trim().is_empty() {
            return Err(Error::Validation("translation source is empty".into()));
        }
        if !(0.0..=5.0).contains(&t.stars) {
            return Err(Error::Validation(format!("stars {} outside [0, 5]", t.stars)));
        }
        let mut index = self.index.write();
        if let Some(ex) = &t.example_id {
            if !index.example_pos.contains_key(ex) {
                return Err(Error::NotFound(format!("example {ex}")));
            }
        }
        let record = TranslationRecord {
            v: RECORD_VERSION,
            id: new_id(),
            source: t.source,
            direction: t.direction,
            model: t.model,
            output: t.output,
            stars: t.stars,
            created_at: now(),
            example_id: t.example_id,
        };
        self.append(TRANSLATIONS_FILE, &record)?;
        index.translations.insert(record.id.clone(), record.clone());
        Ok(record)
    }

    pub fn translation(&self, id: &str) -> Option<TranslationRecord> {
        self.index.read().translations.get(id).cloned()
    }

    /// Store expert feedback; the first one on an example-sourced translation
    /// marks that example labeled.
    pub fn submit_expert(&self, f: ExpertFeedback) -> Result<String> {
        if !(1..=5).contains(&f.quality) {
            return Err(Error::Validation(format!("quality {} outside 1..=5", f.quality)));
        }
        if f.correction.trim().is_empty() {
            return Err(Error::Validation("correction is empty".into()));
        }
        if f.author.trim().is_empty() {
            return Err(Error::Validation("author is empty".into()));
        }
        let mut index = self.index.write();
        let translation = index
            .translations
            .get(&f.translation_id)
            .ok_or_else(|| Error::NotFound(format!("translation {}", f.translation_id)))?;
        let example_to_flip = translation
            .example_id
            .as_ref()
            .and_then(|ex| index.example_pos.get(ex))
            .map(|&pos| &index.examples[pos])
            .filter(|item| item.status == ExampleStatus::Unlabeled)
            .cloned();
        let stored = Stored {
            v: RECORD_VERSION,
            id: new_id(),
            created_at: now(),
            record: ExpertFeedback {
                comment: non_blank(&f.comment),
                ..f
            },
        };
        self.append(EXPERT_FILE, &stored)?;
        let id = stored.id.clone();
        index.expert.push(stored);
        if let Some(mut item) = example_to_flip {
            item.status = ExampleStatus::Labeled;
            self.append(EXAMPLES_FILE, &item)?;
            index.apply_example(item);
        }
        Ok(id)
    }

    pub fn submit_common(&self, f: CommonFeedback) -> Result<String> {
        match f.helpfulness {
            None => return Err(Error::Validation("helpfulness rating is required".into())),
            Some(h) if !(1..=5).contains(&h) => {
                return Err(Error::Validation(format!("helpfulness {h} outside 1..=5")));
            }
            Some(_) => {}
        }
        let mut index = self.index.write();
        if !index.translations.contains_key(&f.translation_id) {
            return Err(Error::NotFound(format!("translation {}", f.translation_id)));
        }
        let stored = Stored {
            v: RECORD_VERSION,
            id: new_id(),
            created_at: now(),
            record: CommonFeedback {
                comment: non_blank(&f.comment),
                ..f
            },
        };
        self.append(COMMON_FILE, &stored)?;
        let id = stored.id.clone();
        index.common.push(stored);
        Ok(id)
    }

    pub fn record_da(&self, translation_id: &str, score: u8) -> Result<String> {
        let band = DaBand::from_score(score)?;
        let mut index = self.index.write();
        if !index.translations.contains_key(translation_id) {
            return Err(Error::NotFound(format!("translation {translation_id}")));
        }
        let stored = Stored {
            v: RECORD_VERSION,
            id: new_id(),
            created_at: now(),
            record: DaRating {
                translation_id: translation_id.to_owned(),
                score,
                band,
            },
        };
        self.append(DA_FILE, &stored)?;
        let id = stored.id.clone();
        index.da.push(stored);
        Ok(id)
    }

    pub fn expert_feedback(&self) -> Vec<Stored<ExpertFeedback>> {
        self.index.read().expert.clone()
    }

    pub fn common_feedback(&self) -> Vec<Stored<CommonFeedback>> {
        self.index.read().common.clone()
    }

    pub fn da_ratings(&self) -> Vec<Stored<DaRating>> {
        self.index.read().da.clone()
    }

    pub fn add_example(&self, language: Language, text: &str) -> Result<ExampleItem> {
        let text = text.trim();
        if text.is_empty() {
            return Err(Error::Validation("example text is empty".into()));
        }
        let item = ExampleItem {
            v: RECORD_VERSION,
            id: new_id(),
            language,
            text: text.to_owned(),
            status: ExampleStatus::Unlabeled,
        };
        let mut index = self.index.write();
        self.append(EXAMPLES_FILE, &item)?;
        index.apply_example(item.clone());
        Ok(item)
    }

    pub fn example(&self, id: &str) -> Option<ExampleItem> {
        let index = self.index.read();
        index.example_pos.get(id).map(|&pos| index.examples[pos].clone())
    }

    /// Examples in insertion order, optionally filtered.
    pub fn list_examples(&self, language: Option<Language>, status: Option<ExampleStatus>) -> Vec<ExampleItem> {
        self.index
            .read()
            .examples
            .iter()
            .filter(|e| language.is_none_or(|l| e.language == l))
            .filter(|e| status.is_none_or(|s| e.status == s))
            .cloned()
            .collect()
    }

    /// Oldest unlabeled example in `language`.
    pub fn next_example(&self, language: Language) -> Option<ExampleItem> {
        self.index
            .read()
            .examples
            .iter()
            .find(|e| e.language == language && e.status == ExampleStatus::Unlabeled)
            .cloned()
    }

    /// Expert counts, mean quality and quality/stars correlation for every
    /// model and direction, SMT first.
    pub fn stats(&self) -> StatsReport {
        let index = self.index.read();
        let mut cells = Vec::with_capacity(4);
        for model in ModelKind::ALL {
            for direction in Direction::ALL {
                let (quality, stars): (Vec<f64>, Vec<f64>) = index
                    .expert
                    .iter()
                    .filter_map(|f| {
                        let t = index.translations.get(&f.record.translation_id)?;
                        (t.model == model && t.direction == direction).then_some((f.record.quality as f64, t.stars))
                    })
                    .unzip();
                let count = quality.len();
                let mean_quality = (count > 0).then(|| quality.iter().sum::<f64>() / count as f64);
                let pearson = pearson(&quality, &stars).ok().map(|p| p.r);
                cells.push(StatsCell {
                    model,
                    direction,
                    count,
                    mean_quality,
                    pearson,
                });
            }
        }
        StatsReport { cells }
    }

    /// Expert corrections as a Cherokee to English corpus: the translation's
    /// source paired with the correction, swapped for English sources. With
    /// `dedup`, only the latest correction per translation is kept.
    pub fn export_corrections(&self, dedup: bool) -> Result<ParallelCorpus> {
        let index = self.index.read();
        let mut chosen: Vec<&Stored<ExpertFeedback>> = Vec::new();
        if dedup {
            let mut latest: HashMap<&str, usize> = HashMap::new();
            for (i, f) in index.expert.iter().enumerate() {
                latest.insert(&f.record.translation_id, i);
            }
            let mut keep: Vec<usize> = latest.into_values().collect();
            keep.sort_unstable();
            chosen.extend(keep.into_iter().map(|i| &index.expert[i]));
        } else {
            chosen.extend(index.expert.iter());
        }
        let mut pairs = Vec::with_capacity(chosen.len());
        for f in chosen {
            let t = &index.translations[&f.record.translation_id];
            let pair = SentencePair::from_text(&t.source, &f.record.correction)?;
            pairs.push(match t.direction {
                Direction::ChrEn => pair,
                Direction::EnChr => pair.swapped(),
            });
        }
        Ok(ParallelCorpus::new(Direction::ChrEn, pairs))
    }
}
