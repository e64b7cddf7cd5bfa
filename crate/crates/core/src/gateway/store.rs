//! Content-addressed completion store, used both as the replay source and
//! as the persistent cache.
//!
//! On disk it is JSONL, one `{digest, model, temperature, sample_index, text}`
//! object per line. Entries are immutable: re-recording a digest with new
//! text is an error.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{CompletionRequest, GatewayError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub digest: String,
    pub model: String,
    pub temperature: f64,
    pub sample_index: u32,
    pub text: String,
}

impl FixtureEntry {
    pub fn new(req: &CompletionRequest, text: impl Into<String>) -> FixtureEntry {
        FixtureEntry {
            digest: req.digest(),
            model: req.model.clone(),
            temperature: req.temperature,
            sample_index: req.sample_index,
            text: text.into(),
        }
    }
}

#[derive(Debug, Default)]
pub struct FixtureStore {
    entries: Mutex<BTreeMap<String, FixtureEntry>>,
    /// When set, new entries are appended to this file as they arrive.
    sink: Option<Mutex<File>>,
    path: Option<PathBuf>,
}

impl FixtureStore {
    pub fn in_memory() -> FixtureStore {
        FixtureStore::default()
    }

    /// Loads a store; a missing file yields an empty store.
    pub fn load(path: impl AsRef<Path>) -> Result<FixtureStore, GatewayError> {
        let path = path.as_ref();
        let store = FixtureStore::in_memory();
        match fs::read_to_string(path) {
            Ok(text) => store.extend_from_jsonl(&text, &path.display().to_string())?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(e) => return Err(GatewayError::io(path, e)),
        }
        Ok(FixtureStore {
            path: Some(path.to_path_buf()),
            ..store
        })
    }

    /// Loads a store and appends every new entry to the same file.
    pub fn open_append(path: impl AsRef<Path>) -> Result<FixtureStore, GatewayError> {
        let path = path.as_ref();
        let mut store = FixtureStore::load(path)?;
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| GatewayError::io(path, e))?;
        store.sink = Some(Mutex::new(file));
        Ok(store)
    }

    pub fn from_jsonl(text: &str) -> Result<FixtureStore, GatewayError> {
        let store = FixtureStore::in_memory();
        store.extend_from_jsonl(text, "<memory>")?;
        Ok(store)
    }

    fn extend_from_jsonl(&self, text: &str, origin: &str) -> Result<(), GatewayError> {
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: FixtureEntry =
                serde_json::from_str(line).map_err(|e| GatewayError::Store {
                    message: format!("{origin}:{}: {e}", i + 1),
                })?;
            self.insert_entry(entry, false)?;
        }
        Ok(())
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, digest: &str) -> Option<String> {
        self.entries
            .lock()
            .unwrap()
            .get(digest)
            .map(|e| e.text.clone())
    }

    pub fn entries(&self) -> Vec<FixtureEntry> {
        self.entries.lock().unwrap().values().cloned().collect()
    }

    /// Adds an entry. Identical re-inserts are no-ops; conflicting text is rejected.
    pub fn insert(&self, entry: FixtureEntry) -> Result<bool, GatewayError> {
        self.insert_entry(entry, true)
    }

    fn insert_entry(&self, entry: FixtureEntry, persist: bool) -> Result<bool, GatewayError> {
        let mut entries = self.entries.lock().unwrap();
        if let Some(existing) = entries.get(&entry.digest) {
            if existing.text == entry.text {
                return Ok(false);
            }
            return Err(GatewayError::FixtureConflict {
                digest: entry.digest,
            });
        }
        if persist {
            if let Some(sink) = &self.sink {
                let mut line = serde_json::to_string(&entry).expect("entry serializes");
                line.push('\n');
                let mut f = sink.lock().unwrap();
                f.write_all(line.as_bytes())
                    .and_then(|_| f.flush())
                    .map_err(|e| {
                        GatewayError::io(self.path.as_deref().unwrap_or(Path::new("?")), e)
                    })?;
            }
        }
        entries.insert(entry.digest.clone(), entry);
        Ok(true)
    }

    /// Canonical serialization: one line per entry, sorted by digest.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for entry in self.entries.lock().unwrap().values() {
            out.push_str(&serde_json::to_string(entry).expect("entry serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_to(&self, path: impl AsRef<Path>) -> Result<(), GatewayError> {
        let path = path.as_ref();
        fs::write(path, self.to_jsonl()).map_err(|e| GatewayError::io(path, e))
    }
}
