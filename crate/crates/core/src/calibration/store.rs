// SPDX-License-Identifier: MIT OR Apache-2.0

//! Persistent store of calibrated critical values and levels.
//!
//! The on-disk form is a JSON-lines file: a header line
//! `{"format":"poisson-scan-critical-values","version":1}` followed by one record per line.
//! Records are keyed by a SHA-256 fingerprint of their canonical query encoding.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Format tag of the header line.
pub const STORE_FORMAT: &str = "poisson-scan-critical-values";
/// Current format version.
pub const STORE_VERSION: u32 = 1;
/// Environment variable overriding the default store path.
pub const STORE_PATH_ENV: &str = "POISSON_SCAN_STORE";

/// Canonical identification of a stored value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoreKey {
    /// Kind of calibrated quantity (a functional name or a level family).
    pub family: String,
    /// Canonical description of the window or window family.
    pub window: String,
    /// Canonical description of the null regime.
    pub regime: String,
    /// Conditioning count for conditional regimes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    /// Level or quantile order.
    pub u: f64,
    /// Replicate count.
    #[serde(rename = "B")]
    pub b: u64,
    pub seed: u64,
}

impl StoreKey {
    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_string(self).expect("store keys serialize");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// One stored value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoreRecord {
    pub fingerprint: String,
    #[serde(flatten)]
    pub key: StoreKey,
    pub value: f64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
}

/// Thread-safe map of calibrated values with optional file persistence.
#[derive(Debug, Default)]
pub struct CriticalValueStore {
    path: Option<PathBuf>,
    records: RwLock<BTreeMap<String, StoreRecord>>,
}

impl CriticalValueStore {
    /// Store that lives only in memory.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens the store at `path`, loading it if the file exists.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let mut records = BTreeMap::new();
        if path.exists() {
            let file = fs::File::open(&path)?;
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                if i == 0 {
                    let header: Header = serde_json::from_str(&line)
                        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?;
                    if header.format != STORE_FORMAT || header.version != STORE_VERSION {
                        return Err(Error::Parse {
                            line: 1,
                            message: format!(
                                "unsupported store format {} version {}",
                                header.format, header.version
                            ),
                        });
                    }
                    continue;
                }
                let record: StoreRecord = serde_json::from_str(&line)
                    .map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
                records.insert(record.fingerprint.clone(), record);
            }
        }
        Ok(Self { path: Some(path), records: RwLock::new(records) })
    }

    /// Backing file, if any.
    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Number of stored records.
    pub fn len(&self) -> usize {
        self.records.read().expect("store lock").len()
    }

    /// Whether the store holds no records.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stored value for `key`.
    pub fn get(&self, key: &StoreKey) -> Option<f64> {
        self.records.read().expect("store lock").get(&key.fingerprint()).map(|r| r.value)
    }

    /// Inserts or replaces a value.
    pub fn insert(&self, key: StoreKey, value: f64) {
        let fingerprint = key.fingerprint();
        let record = StoreRecord { fingerprint: fingerprint.clone(), key, value };
        self.records.write().expect("store lock").insert(fingerprint, record);
    }

    /// All records ordered by fingerprint.
    pub fn records(&self) -> Vec<StoreRecord> {
        self.records.read().expect("store lock").values().cloned().collect()
    }

    /// Writes the store to its backing file, replacing it atomically. No-op in memory.
    pub fn save(&self) -> Result<()> {
        let Some(path) = &self.path else { return Ok(()) };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("tmp");
        {
            let mut out = std::io::BufWriter::new(fs::File::create(&tmp)?);
            let header = Header { format: STORE_FORMAT.into(), version: STORE_VERSION };
            writeln!(out, "{}", serde_json::to_string(&header)?)?;
            for record in self.records.read().expect("store lock").values() {
                writeln!(out, "{}", serde_json::to_string(record)?)?;
            }
            out.flush()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(u: f64) -> StoreKey {
        StoreKey {
            family: "max_count".into(),
            window: "ell=0.4".into(),
            regime: "known(lambda0=1,L=100)".into(),
            n: None,
            u,
            b: 1000,
            seed: 1,
        }
    }

    #[test]
    fn fingerprint_is_stable_and_distinguishes_keys() {
        assert_eq!(key(0.95).fingerprint(), key(0.95).fingerprint());
        assert_ne!(key(0.95).fingerprint(), key(0.05).fingerprint());
        assert_eq!(key(0.95).fingerprint().len(), 64);
    }

    #[test]
    fn round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.jsonl");
        let store = CriticalValueStore::open(&path).unwrap();
        store.insert(key(0.95), 61.0);
        store.insert(key(0.05), 40.0);
        store.save().unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("{\"format\":\"poisson-scan-critical-values\",\"version\":1}"));
        let reopened = CriticalValueStore::open(&path).unwrap();
        assert_eq!(reopened.len(), 2);
        assert_eq!(reopened.get(&key(0.95)), Some(61.0));
        assert_eq!(reopened.records(), store.records());
    }

    #[test]
    fn rejects_foreign_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        fs::write(&path, "{\"format\":\"other\",\"version\":1}\n").unwrap();
        assert!(matches!(CriticalValueStore::open(&path), Err(Error::Parse { line: 1, .. })));
    }
}
