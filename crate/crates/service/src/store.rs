//! Study state and its transactional storage.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use cohortlens_core::model::{QuestionnaireDef, QuestionnaireRegistry, Respondent, RespondentGroup, ResponseSet, Wave};
use cohortlens_core::roster::RelationalInstance;
use cohortlens_core::{Catalog, InstrumentLibrary, ScoreReport};
use serde::{Deserialize, Serialize};

use crate::auth::UserAccount;
use crate::pseudonym::PseudonymMap;

pub const STATE_FILE: &str = "study.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudySettings {
    /// Respondent attribute keys and question ids whose values are replaced by
    /// tokens in exports. Questions marked `anonymize` are flagged as well.
    #[serde(default)]
    pub flagged_fields: BTreeSet<String>,
    /// Whether a submitted response may be overwritten while the wave is open.
    #[serde(default = "yes")]
    pub allow_resubmission: bool,
}

fn yes() -> bool {
    true
}

impl Default for StudySettings {
    fn default() -> Self {
        StudySettings { flagged_fields: BTreeSet::new(), allow_resubmission: true }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Owned<T> {
    pub owner: String,
    pub value: T,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubmissionEvent {
    pub respondent_id: String,
    pub actor: String,
    pub at: i64,
    pub replaced: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaveRecord {
    pub owner: String,
    pub wave: Wave,
    pub relational: Vec<RelationalInstance>,
    #[serde(default)]
    pub responses: BTreeMap<String, ResponseSet>,
    #[serde(default)]
    pub scores: BTreeMap<String, ScoreReport>,
    #[serde(default)]
    pub retired: Vec<ResponseSet>,
    #[serde(default)]
    pub history: Vec<SubmissionEvent>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub at: i64,
    pub actor: String,
    pub action: String,
    pub target: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct State {
    #[serde(default)]
    pub next_id: u64,
    #[serde(default)]
    pub settings: StudySettings,
    #[serde(default)]
    pub users: BTreeMap<String, UserAccount>,
    #[serde(default)]
    pub catalog: Catalog,
    #[serde(default)]
    pub library: InstrumentLibrary,
    /// Owner per catalog element, keyed `kind:id`.
    #[serde(default)]
    pub catalog_owners: BTreeMap<String, String>,
    #[serde(default)]
    pub questionnaires: BTreeMap<String, Owned<QuestionnaireDef>>,
    #[serde(default)]
    pub registry: QuestionnaireRegistry,
    #[serde(default)]
    pub respondents: BTreeMap<String, Owned<Respondent>>,
    #[serde(default)]
    pub groups: BTreeMap<String, Owned<RespondentGroup>>,
    #[serde(default)]
    pub waves: BTreeMap<String, WaveRecord>,
    #[serde(default)]
    pub pseudonyms: PseudonymMap,
    #[serde(default)]
    pub audit_log: Vec<AuditEntry>,
}

impl Default for State {
    fn default() -> Self {
        State {
            next_id: 0,
            settings: StudySettings::default(),
            users: BTreeMap::new(),
            catalog: Catalog::default(),
            library: InstrumentLibrary::default(),
            catalog_owners: BTreeMap::new(),
            questionnaires: BTreeMap::new(),
            registry: QuestionnaireRegistry::new(),
            respondents: BTreeMap::new(),
            groups: BTreeMap::new(),
            waves: BTreeMap::new(),
            pseudonyms: PseudonymMap::default(),
            audit_log: Vec::new(),
        }
    }
}

impl State {
    /// Fresh id with the given prefix.
    pub fn fresh_id(&mut self, prefix: &str) -> String {
        self.next_id += 1;
        format!("{prefix}{}", self.next_id)
    }

    pub fn user_by_login(&self, login: &str) -> Option<&UserAccount> {
        self.users.values().find(|u| u.login == login)
    }

    /// Catalog of questions, groups and templates plus every library instrument.
    pub fn full_catalog(&self) -> Catalog {
        let mut c = self.catalog.clone();
        for inst in self.library.list() {
            c.add_instrument(inst.clone());
        }
        c
    }
}

/// Where the state is kept between runs.
pub trait Storage: Send + Sync {
    fn load(&self) -> io::Result<Option<State>>;
    /// Durably replaces the stored state.
    fn save(&self, state: &State) -> io::Result<()>;
}

/// Keeps nothing; state lives only in memory.
#[derive(Debug, Default)]
pub struct MemoryStorage;

impl Storage for MemoryStorage {
    fn load(&self) -> io::Result<Option<State>> {
        Ok(None)
    }

    fn save(&self, _: &State) -> io::Result<()> {
        Ok(())
    }
}

/// One JSON file, replaced atomically through a temporary file and rename.
#[derive(Debug)]
pub struct JsonFileStorage {
    path: PathBuf,
}

impl JsonFileStorage {
    pub fn new(data_dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(data_dir)?;
        Ok(JsonFileStorage { path: data_dir.join(STATE_FILE) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl Storage for JsonFileStorage {
    fn load(&self) -> io::Result<Option<State>> {
        match fs::read(&self.path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map(Some).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn save(&self, state: &State) -> io::Result<()> {
        let tmp = self.path.with_extension("json.tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            serde_json::to_writer(io::BufWriter::new(&mut f), state).map_err(io::Error::other)?;
            f.flush()?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &self.path)
    }
}

/// Snapshot reads and serialized, all-or-nothing writes.
pub struct Store {
    storage: Box<dyn Storage>,
    current: RwLock<Arc<State>>,
    writer: Mutex<()>,
}

impl Store {
    pub fn open(storage: Box<dyn Storage>) -> io::Result<Self> {
        let state = storage.load()?.unwrap_or_default();
        Ok(Store { storage, current: RwLock::new(Arc::new(state)), writer: Mutex::new(()) })
    }

    pub fn in_memory() -> Self {
        Store::open(Box::new(MemoryStorage)).expect("memory storage cannot fail")
    }

    pub fn snapshot(&self) -> Arc<State> {
        self.current.read().expect("store lock").clone()
    }

    /// Runs `f` on a copy of the state; the copy is persisted and published
    /// only if `f` succeeds.
    pub fn transact<T, E>(&self, f: impl FnOnce(&mut State) -> Result<T, E>) -> Result<T, E>
    where
        E: From<io::Error>,
    {
        let _guard = self.writer.lock().expect("writer lock");
        let mut next = (*self.snapshot()).clone();
        let out = f(&mut next)?;
        self.storage.save(&next)?;
        *self.current.write().expect("store lock") = Arc::new(next);
        Ok(out)
    }
}
