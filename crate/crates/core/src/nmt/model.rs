use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{beam_search, default_max_len, Decoder, Ensemble, NmtHypothesis, ToyDecoder};
use crate::corpus::{Direction, ParallelCorpus};
use crate::error::{Error, Result};
use crate::smt::train_lexical;

const MODEL_FORMAT: &str = "mtloop-nmt/1";
const MODEL_FILE: &str = "model.json";

pub const DEFAULT_SEEDS: [u64; 3] = [7, 77, 777];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmtTrainConfig {
    /// One ensemble member per seed, each trained on its own bootstrap sample.
    pub seeds: Vec<u64>,
    /// Bootstrap sample size as a fraction of the corpus.
    pub sample_fraction: f64,
    pub em_iterations: usize,
}

impl Default for NmtTrainConfig {
    fn default() -> Self {
        NmtTrainConfig {
            seeds: DEFAULT_SEEDS.to_vec(),
            sample_fraction: 0.9,
            em_iterations: 5,
        }
    }
}

/// An ensemble of toy decoders that share one vocabulary.
#[derive(Debug, Clone)]
pub struct NmtModel {
    pub direction: Direction,
    members: Vec<Arc<ToyDecoder>>,
    ensemble: Ensemble,
}

#[derive(Serialize, Deserialize)]
struct ModelMeta {
    format: String,
    direction: Direction,
    members: usize,
    vocabulary: Vec<String>,
}

fn member_file(i: usize) -> String {
    format!("member-{i}.lex.txt")
}

impl NmtModel {
    pub fn from_members(direction: Direction, members: Vec<ToyDecoder>) -> Result<Self> {
        let members: Vec<Arc<ToyDecoder>> = members.into_iter().map(Arc::new).collect();
        let ensemble = Ensemble::new(members.iter().map(|m| m.clone() as Arc<dyn Decoder>).collect())?;
        Ok(NmtModel {
            direction,
            members,
            ensemble,
        })
    }

    pub fn members(&self) -> &[Arc<ToyDecoder>] {
        &self.members
    }

    pub fn decoder(&self) -> &Ensemble {
        &self.ensemble
    }

    pub fn translate(&self, source: &[String], beam: usize) -> Result<NmtHypothesis> {
        beam_search(&self.ensemble, source, beam, default_max_len(source.len()))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        for (i, m) in self.members.iter().enumerate() {
            m.lexical_table().save(&dir.join(member_file(i)))?;
        }
        let meta = ModelMeta {
            format: MODEL_FORMAT.to_owned(),
            direction: self.direction,
            members: self.members.len(),
            vocabulary: self.members[0].target_words(),
        };
        let path = dir.join(MODEL_FILE);
        fs::write(&path, serde_json::to_string_pretty(&meta)? + "\n")
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MODEL_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let meta: ModelMeta = serde_json::from_str(&text)?;
        if meta.format != MODEL_FORMAT {
            return Err(Error::Validation(format!("unsupported model format {:?}", meta.format)));
        }
        let members = (0..meta.members)
            .map(|i| ToyDecoder::load(&dir.join(member_file(i)), &meta.vocabulary))
            .collect::<Result<Vec<_>>>()?;
        Self::from_members(meta.direction, members)
    }
}

/// Train one toy decoder per seed on a bootstrap sample of the corpus.
///
/// Every member's lexical table is restricted to the full corpus's target
/// vocabulary so the members can be ensembled.
pub fn train_nmt(corpus: &ParallelCorpus, config: &NmtTrainConfig) -> Result<NmtModel> {
    corpus.ensure_non_empty()?;
    if config.seeds.is_empty() {
        return Err(Error::invalid("at least one seed is required"));
    }
    if !(config.sample_fraction > 0.0 && config.sample_fraction <= 1.0) {
        return Err(Error::invalid("sample fraction must lie in (0, 1]"));
    }
    let sample_size = ((corpus.len() as f64 * config.sample_fraction).ceil() as usize).max(1);
    let full_vocab = train_lexical(corpus, 1)?.target_vocabulary();
    let mut members = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let indices: Vec<usize> = (0..sample_size).map(|_| rng.gen_range(0..corpus.len())).collect();
        let table = train_lexical(&corpus.subset(&indices), config.em_iterations)?;
        members.push(ToyDecoder::with_vocabulary(table, &full_vocab)?);
    }
    NmtModel::from_members(corpus.direction, members)
}
