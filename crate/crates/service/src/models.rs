//! Model registry: one swappable slot per model and direction.

use std::collections::hash_map::DefaultHasher;
use std::collections::BTreeMap;
use std::hash::Hasher;
use std::path::Path;

use mtloop_core::feedback::ModelKind;
use mtloop_core::hitl::ServingSlot;
use mtloop_core::nmt::NmtModel;
use mtloop_core::qe::GbtModel;
use mtloop_core::smt::SmtModel;
use mtloop_core::Direction;

/// A phrase-based model with the regressor that scores its output.
pub struct SmtBackend {
    pub id: String,
    pub model: SmtModel,
    pub qe: GbtModel,
}

pub struct NmtBackend {
    pub id: String,
    pub model: NmtModel,
}

fn slot_index(direction: Direction) -> usize {
    match direction {
        Direction::ChrEn => 0,
        Direction::EnChr => 1,
    }
}

/// Directory (or file stem) name of a model, e.g. `smt-chr-en`.
pub fn model_name(kind: ModelKind, direction: Direction) -> String {
    format!("{kind}-{direction}")
}

pub fn qe_file_name(direction: Direction) -> String {
    format!("qe-smt-{direction}.json")
}

fn fingerprint(name: &str, files: &[&Path]) -> Option<String> {
    let mut hasher = DefaultHasher::new();
    for f in files {
        hasher.write(&std::fs::read(f).ok()?);
    }
    Some(format!("{name}@{:016x}", hasher.finish()))
}

pub struct ModelRegistry {
    smt: [ServingSlot<Option<SmtBackend>>; 2],
    nmt: [ServingSlot<Option<NmtBackend>>; 2],
}

impl Default for ModelRegistry {
    fn default() -> Self {
        ModelRegistry {
            smt: [ServingSlot::new(None), ServingSlot::new(None)],
            nmt: [ServingSlot::new(None), ServingSlot::new(None)],
        }
    }
}

impl ModelRegistry {
    /// Load every model found under `dir`. Missing or unreadable models leave
    /// their slot empty; an SMT model without its QE regressor is not served.
    pub fn load(dir: &Path) -> Self {
        let registry = ModelRegistry::default();
        for direction in Direction::ALL {
            let name = model_name(ModelKind::Smt, direction);
            let model_dir = dir.join(&name);
            let qe_path = dir.join(qe_file_name(direction));
            if model_dir.is_dir() {
                match (SmtModel::load(&model_dir), GbtModel::load(&qe_path)) {
                    (Ok(model), Ok(qe)) => {
                        let id = fingerprint(&name, &[&model_dir.join("model.json"), &qe_path]).unwrap_or(name);
                        registry.set_smt(direction, SmtBackend { id, model, qe });
                    }
                    (Err(e), _) | (_, Err(e)) => tracing::warn!(model = %name, error = %e, "not loaded"),
                }
            }
            let name = model_name(ModelKind::Nmt, direction);
            let model_dir = dir.join(&name);
            if model_dir.is_dir() {
                match NmtModel::load(&model_dir) {
                    Ok(model) => {
                        let id = fingerprint(&name, &[&model_dir.join("model.json")]).unwrap_or(name);
                        registry.set_nmt(direction, NmtBackend { id, model });
                    }
                    Err(e) => tracing::warn!(model = %name, error = %e, "not loaded"),
                }
            }
        }
        registry
    }

    pub fn smt(&self, direction: Direction) -> std::sync::Arc<Option<SmtBackend>> {
        self.smt[slot_index(direction)].get()
    }

    pub fn nmt(&self, direction: Direction) -> std::sync::Arc<Option<NmtBackend>> {
        self.nmt[slot_index(direction)].get()
    }

    pub fn set_smt(&self, direction: Direction, backend: SmtBackend) {
        self.smt[slot_index(direction)].replace(Some(backend));
    }

    pub fn set_nmt(&self, direction: Direction, backend: NmtBackend) {
        self.nmt[slot_index(direction)].replace(Some(backend));
    }

    /// Model name to loaded identifier, `None` for empty slots.
    pub fn health_entries(&self) -> BTreeMap<String, Option<String>> {
        let mut out = BTreeMap::new();
        for direction in Direction::ALL {
            out.insert(
                model_name(ModelKind::Smt, direction),
                self.smt(direction).as_ref().as_ref().map(|b| b.id.clone()),
            );
            out.insert(
                model_name(ModelKind::Nmt, direction),
                self.nmt(direction).as_ref().as_ref().map(|b| b.id.clone()),
            );
        }
        out
    }
}
