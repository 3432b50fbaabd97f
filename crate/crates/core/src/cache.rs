//! Persistent identifier → record cache.
//!
//! One JSON file holds bibliographic entries and, in a separate section,
//! ArrayExpress experiment entries. Keys are canonical identifier strings;
//! BTreeMaps keep the file deterministically sorted. Saves go through a
//! temp file and rename, so a crash never leaves a half-written cache.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aexp::ExperimentRecord;
use crate::record::{BibliographicRecord, Provider};

pub const CACHE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub fetched_at: i64,
    pub provider: Provider,
    pub record: BibliographicRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AexpEntry {
    pub fetched_at: i64,
    pub record: ExperimentRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheStore {
    pub version: u32,
    pub entries: BTreeMap<String, CacheEntry>,
    #[serde(default)]
    pub aexp_entries: BTreeMap<String, AexpEntry>,
}

impl Default for CacheStore {
    fn default() -> Self {
        CacheStore {
            version: CACHE_VERSION,
            entries: BTreeMap::new(),
            aexp_entries: BTreeMap::new(),
        }
    }
}

/// Outcome of a cache probe. Stale entries are still returned so callers can
/// fall back to them when a refetch fails.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lookup<T> {
    Hit(T),
    Stale(T),
    Miss,
}

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("record id '{id}' does not match cache key '{key}'")]
    KeyMismatch { key: String, id: String },
    #[error("corrupt cache at {path}: {message}")]
    Corrupt { path: String, message: String },
    #[error("cache I/O at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CacheStore {
    pub fn new() -> Self {
        CacheStore::default()
    }

    pub fn lookup(&self, key: &str, now: i64, ttl_secs: i64) -> Lookup<&BibliographicRecord> {
        match self.entries.get(key) {
            None => Lookup::Miss,
            Some(entry) if now - entry.fetched_at <= ttl_secs => Lookup::Hit(&entry.record),
            Some(entry) => Lookup::Stale(&entry.record),
        }
    }

    pub fn insert(
        &mut self,
        key: &str,
        record: BibliographicRecord,
        now: i64,
        provider: Provider,
    ) -> Result<(), CacheError> {
        if record.id != key {
            return Err(CacheError::KeyMismatch {
                key: key.to_string(),
                id: record.id,
            });
        }
        self.entries.insert(
            key.to_string(),
            CacheEntry {
                fetched_at: now,
                provider,
                record,
            },
        );
        Ok(())
    }

    pub fn lookup_aexp(&self, key: &str, now: i64, ttl_secs: i64) -> Lookup<&ExperimentRecord> {
        match self.aexp_entries.get(key) {
            None => Lookup::Miss,
            Some(entry) if now - entry.fetched_at <= ttl_secs => Lookup::Hit(&entry.record),
            Some(entry) => Lookup::Stale(&entry.record),
        }
    }

    pub fn insert_aexp(
        &mut self,
        key: &str,
        record: ExperimentRecord,
        now: i64,
    ) -> Result<(), CacheError> {
        let expected = format!("aexp:{}", record.accession);
        if expected != key {
            return Err(CacheError::KeyMismatch {
                key: key.to_string(),
                id: expected,
            });
        }
        self.aexp_entries.insert(
            key.to_string(),
            AexpEntry {
                fetched_at: now,
                record,
            },
        );
        Ok(())
    }

    /// Load a store; a missing file is an empty store, anything unreadable
    /// or of an unknown version is CorruptCache.
    pub fn load(path: &Path) -> Result<CacheStore, CacheError> {
        let display = path.display().to_string();
        let bytes = match std::fs::read(path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(CacheStore::new()),
            Err(e) => {
                return Err(CacheError::Io {
                    path: display,
                    source: e,
                })
            }
        };
        let store: CacheStore =
            serde_json::from_slice(&bytes).map_err(|e| CacheError::Corrupt {
                path: display.clone(),
                message: e.to_string(),
            })?;
        if store.version != CACHE_VERSION {
            return Err(CacheError::Corrupt {
                path: display,
                message: format!("unknown cache version {}", store.version),
            });
        }
        Ok(store)
    }

    /// Atomic save: write a sibling temp file, then rename over the target.
    pub fn save(&self, path: &Path) -> Result<(), CacheError> {
        let display = path.display().to_string();
        let io_err = |e| CacheError::Io {
            path: display.clone(),
            source: e,
        };
        let mut json = serde_json::to_vec_pretty(self).map_err(|e| CacheError::Corrupt {
            path: display.clone(),
            message: e.to_string(),
        })?;
        json.push(b'\n');
        let dir = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        std::fs::create_dir_all(dir).map_err(io_err)?;
        let tmp = dir.join(format!(".cache-{}.tmp", std::process::id()));
        std::fs::write(&tmp, &json).map_err(io_err)?;
        std::fs::rename(&tmp, path).map_err(|e| {
            let _ = std::fs::remove_file(&tmp);
            io_err(e)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::{AuthorName, EntryType};

    fn record(id: &str) -> BibliographicRecord {
        BibliographicRecord {
            id: id.to_string(),
            entry_type: EntryType::ArticleJournal,
            title: format!("Title for {id}"),
            authors: vec![AuthorName::person("Smith", "J")],
            container_title: None,
            issued: None,
            volume: None,
            issue: None,
            pages: None,
            publisher: None,
            doi: None,
            url: format!("https://doi.org/{id}"),
            provider: Provider::Crossref,
        }
    }

    #[test]
    fn empty_store_misses() {
        let store = CacheStore::new();
        assert_eq!(store.lookup("10.1/x", 100, 10), Lookup::Miss);
    }

    #[test]
    fn fresh_entry_hits_and_boundary_goes_stale() {
        let mut store = CacheStore::new();
        store
            .insert("10.1/x", record("10.1/x"), 100, Provider::Crossref)
            .unwrap();
        assert!(matches!(store.lookup("10.1/x", 100, 10), Lookup::Hit(_)));
        // age == ttl is still a hit; one second past is stale
        assert!(matches!(store.lookup("10.1/x", 110, 10), Lookup::Hit(_)));
        assert!(matches!(store.lookup("10.1/x", 111, 10), Lookup::Stale(_)));
    }

    #[test]
    fn insert_then_lookup_returns_equal_record() {
        let mut store = CacheStore::new();
        let r = record("10.1/x");
        store
            .insert("10.1/x", r.clone(), 5, Provider::Crossref)
            .unwrap();
        match store.lookup("10.1/x", 5, 100) {
            Lookup::Hit(got) => assert_eq!(got, &r),
            other => panic!("expected hit, got {other:?}"),
        }
    }

    #[test]
    fn double_insert_keeps_latest_fetched_at() {
        let mut store = CacheStore::new();
        store
            .insert("10.1/x", record("10.1/x"), 5, Provider::Crossref)
            .unwrap();
        store
            .insert("10.1/x", record("10.1/x"), 50, Provider::Crossref)
            .unwrap();
        assert_eq!(store.entries["10.1/x"].fetched_at, 50);
        assert_eq!(store.entries.len(), 1);
    }

    #[test]
    fn mismatched_id_is_rejected() {
        let mut store = CacheStore::new();
        let err = store
            .insert("10.1/other", record("10.1/x"), 5, Provider::Crossref)
            .unwrap_err();
        assert!(matches!(err, CacheError::KeyMismatch { .. }));
    }

    #[test]
    fn missing_file_loads_empty() {
        let dir = tempfile::tempdir().unwrap();
        let store = CacheStore::load(&dir.path().join("absent.json")).unwrap();
        assert_eq!(store, CacheStore::new());
    }

    #[test]
    fn load_save_round_trip_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.json");
        let mut store = CacheStore::new();
        for i in 0..5 {
            let id = format!("10.1000/{i}");
            store
                .insert(&id, record(&id), 1_700_000_000 + i, Provider::Crossref)
                .unwrap();
        }
        store
            .insert_aexp(
                "aexp:E-MEXP-1551",
                ExperimentRecord {
                    accession: "E-MEXP-1551".to_string(),
                    species: vec!["Saccharomyces cerevisiae".to_string()],
                    release_date: Some("2010-02-24".to_string()),
                    name: Some("Yeast study".to_string()),
                    experiment_types: vec![],
                },
                1_700_000_099,
            )
            .unwrap();
        store.save(&path).unwrap();
        let loaded = CacheStore::load(&path).unwrap();
        assert_eq!(loaded, store);
    }

    #[test]
    fn truncated_file_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.json");
        std::fs::write(&path, b"{\"version\":1,\"entr").unwrap();
        assert!(matches!(
            CacheStore::load(&path),
            Err(CacheError::Corrupt { .. })
        ));
    }

    #[test]
    fn unknown_version_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.json");
        std::fs::write(&path, b"{\"version\":9,\"entries\":{}}").unwrap();
        assert!(matches!(
            CacheStore::load(&path),
            Err(CacheError::Corrupt { .. })
        ));
    }

    #[test]
    fn lookup_does_not_mutate() {
        let mut store = CacheStore::new();
        store
            .insert("10.1/x", record("10.1/x"), 5, Provider::Crossref)
            .unwrap();
        let before = store.clone();
        let _ = store.lookup("10.1/x", 1000, 1);
        let _ = store.lookup("absent", 1000, 1);
        assert_eq!(store, before);
    }
}
