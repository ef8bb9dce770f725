//! Disk-backed response cache keyed by request digest.
//!
//! Layout: `<root>/<backend>/<first-2-hex>/<key>` with one JSON entry per
//! file. Entries are immutable once written; writes go through a temp file
//! and an atomic rename. A per-key in-flight lock guarantees that concurrent
//! workers asking for the same key compute it exactly once, which keeps
//! backend call counts independent of the worker count.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use chrono::Utc;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::GatewayError;

/// One cached backend response.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheEntry {
    /// Digest of (backend id, operation, full request payload).
    pub key: String,
    /// RFC 3339 creation time; informational only, never part of the key.
    pub created_at: String,
    /// Raw response text exactly as the backend returned it.
    pub value: String,
}

/// Computes the cache key for a request.
///
/// The payload value is serialized with sorted object keys, so the digest is
/// a pure function of request content.
pub fn request_key(backend: &str, operation: &str, payload: &Value) -> String {
    let canonical = serde_json::json!({
        "backend": backend,
        "operation": operation,
        "payload": payload,
    });
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(&canonical).expect("canonical request serializes"));
    hex::encode(hasher.finalize())
}

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Filesystem cache shared by all workers.
pub struct DiskCache {
    root: PathBuf,
    in_flight: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl DiskCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DiskCache { root: root.into(), in_flight: Mutex::new(HashMap::new()) }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn entry_path(&self, backend: &str, key: &str) -> PathBuf {
        self.root.join(backend).join(&key[..2]).join(key)
    }

    fn read(&self, path: &Path) -> Option<CacheEntry> {
        let bytes = fs::read(path).ok()?;
        serde_json::from_slice(&bytes).ok()
    }

    fn write(&self, path: &Path, entry: &CacheEntry) -> Result<(), GatewayError> {
        let parent = path.parent().expect("entry path has a parent");
        fs::create_dir_all(parent).map_err(|e| GatewayError::Cache(e.to_string()))?;
        let temp = parent.join(format!(
            ".tmp-{}-{}",
            std::process::id(),
            TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        let bytes = serde_json::to_vec_pretty(entry).map_err(|e| GatewayError::Cache(e.to_string()))?;
        fs::write(&temp, bytes).map_err(|e| GatewayError::Cache(e.to_string()))?;
        fs::rename(&temp, path).map_err(|e| GatewayError::Cache(e.to_string()))?;
        Ok(())
    }

    /// Returns the cached value for `key`, computing and storing it on a
    /// miss. The boolean is true for a hit. Concurrent callers with the same
    /// key serialize on a per-key lock so `compute` runs at most once.
    pub fn get_or_compute(
        &self,
        backend: &str,
        key: &str,
        compute: impl FnOnce() -> Result<String, GatewayError>,
    ) -> Result<(String, bool), GatewayError> {
        let key_lock = {
            let mut map = self.in_flight.lock().expect("in-flight map lock");
            Arc::clone(map.entry(key.to_string()).or_default())
        };
        let _guard = key_lock.lock().expect("per-key lock");

        let path = self.entry_path(backend, key);
        if let Some(entry) = self.read(&path) {
            return Ok((entry.value, true));
        }
        let value = compute()?;
        let entry =
            CacheEntry { key: key.to_string(), created_at: Utc::now().to_rfc3339(), value: value.clone() };
        self.write(&path, &entry)?;
        Ok((value, false))
    }
}
