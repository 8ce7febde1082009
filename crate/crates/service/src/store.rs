//! Single-file JSON store for sessions and generated transitions.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::types::{CreateSession, Session, TransitionRecord, UpdateSession};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Default, Serialize, Deserialize)]
struct StoreFile {
    schema_version: u32,
    sessions: BTreeMap<String, Session>,
    transitions: BTreeMap<String, TransitionRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("store io: {0}")]
    Io(#[from] std::io::Error),
    #[error("store json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("store schema version {0} is not supported (expected {SCHEMA_VERSION})")]
    Schema(u32),
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        ApiError::internal(e.to_string())
    }
}

pub fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Every mutation rewrites the file through a temporary sibling and a rename.
#[derive(Debug)]
pub struct Store {
    path: PathBuf,
    data: StoreFile,
}

impl Store {
    /// Open `path`, creating an empty store when it does not exist.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        if !path.exists() {
            let store = Self { path, data: StoreFile { schema_version: SCHEMA_VERSION, ..Default::default() } };
            store.persist()?;
            return Ok(store);
        }
        let data: StoreFile = serde_json::from_slice(&std::fs::read(&path)?)?;
        if data.schema_version != SCHEMA_VERSION {
            return Err(StoreError::Schema(data.schema_version));
        }
        Ok(Self { path, data })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn persist(&self) -> Result<(), StoreError> {
        let bytes = serde_json::to_vec(&self.data)?;
        let mut tmp = self.path.clone().into_os_string();
        tmp.push(".tmp");
        let tmp = PathBuf::from(tmp);
        {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(&bytes)?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp, &self.path)?;
        Ok(())
    }

    pub fn create_session(&mut self, model_hash: &str, req: CreateSession) -> Result<Session, ApiError> {
        if let Some(p) = &req.path {
            p.validate()?;
        }
        let t = now();
        let session = Session {
            id: uuid::Uuid::new_v4().to_string(),
            model_hash: model_hash.to_string(),
            name: req.name,
            keyframes: req.keyframes,
            path: req.path,
            transitions: Vec::new(),
            created_at: t,
            updated_at: t,
        };
        self.data.sessions.insert(session.id.clone(), session.clone());
        self.persist()?;
        Ok(session)
    }

    pub fn sessions(&self) -> Vec<Session> {
        let mut all: Vec<Session> = self.data.sessions.values().cloned().collect();
        all.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.id.cmp(&b.id)));
        all
    }

    pub fn session(&self, id: &str) -> Result<&Session, ApiError> {
        self.data.sessions.get(id).ok_or_else(|| ApiError::not_found("session", id))
    }

    pub fn update_session(&mut self, id: &str, update: UpdateSession) -> Result<Session, ApiError> {
        if let Some(p) = &update.path {
            p.validate()?;
        }
        let s = self.data.sessions.get_mut(id).ok_or_else(|| ApiError::not_found("session", id))?;
        if let Some(name) = update.name {
            s.name = Some(name);
        }
        if let Some(k) = update.keyframes {
            s.keyframes = k;
        }
        if let Some(p) = update.path {
            s.path = Some(p);
        }
        s.updated_at = now();
        let out = s.clone();
        self.persist()?;
        Ok(out)
    }

    /// Remove a session together with its transitions.
    pub fn delete_session(&mut self, id: &str) -> Result<(), ApiError> {
        let s = self.data.sessions.remove(id).ok_or_else(|| ApiError::not_found("session", id))?;
        for t in &s.transitions {
            self.data.transitions.remove(t);
        }
        self.persist()?;
        Ok(())
    }

    pub fn insert_transition(&mut self, record: TransitionRecord) -> Result<(), ApiError> {
        let s = self
            .data
            .sessions
            .get_mut(&record.session)
            .ok_or_else(|| ApiError::not_found("session", &record.session))?;
        s.transitions.push(record.id.clone());
        s.updated_at = now();
        self.data.transitions.insert(record.id.clone(), record);
        self.persist()?;
        Ok(())
    }

    pub fn transition(&self, id: &str) -> Result<&TransitionRecord, ApiError> {
        self.data.transitions.get(id).ok_or_else(|| ApiError::not_found("transition", id))
    }
}
