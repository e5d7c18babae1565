//! Content-addressed result cache. Entries live at `<dir>/<aa>/<key>.json`
//! and are written to a temporary file first, then renamed into place, so
//! concurrent writers never expose a partial entry.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const CODE_VERSION: &str = concat!("rankone-cli ", env!("CARGO_PKG_VERSION"));

/// Environment variable that overrides the cache location.
pub const CACHE_ENV: &str = "RANKONE_CACHE_DIR";

/// Hex SHA-256 of the code version and the compact JSON form of `fragment`.
/// `serde_json` keeps object keys sorted, so the encoding is canonical.
pub fn cache_key(fragment: &Value) -> String {
    let mut h = Sha256::new();
    h.update(CODE_VERSION.as_bytes());
    h.update(b"\n");
    h.update(fragment.to_string().as_bytes());
    hex::encode(h.finalize())
}

#[derive(Serialize, Deserialize)]
struct Entry {
    key: String,
    code_version: String,
    fragment: Value,
    payload: Value,
}

#[derive(Debug, Clone)]
pub struct Cache {
    dir: PathBuf,
    read: bool,
}

impl Cache {
    /// `read = false` still stores results but never serves them.
    pub fn new(dir: impl Into<PathBuf>, read: bool) -> Self {
        Cache { dir: dir.into(), read }
    }

    /// `$RANKONE_CACHE_DIR`, or `.rankone-cache` in the working directory.
    pub fn default_dir() -> PathBuf {
        std::env::var_os(CACHE_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(".rankone-cache"))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.json"))
    }

    /// Cached payload for `fragment`, if present and intact. Entries that
    /// fail to parse or whose fragment differs count as misses.
    pub fn get<T: DeserializeOwned>(&self, fragment: &Value) -> Option<T> {
        if !self.read {
            return None;
        }
        let key = cache_key(fragment);
        let text = fs::read_to_string(self.path(&key)).ok()?;
        let entry: Entry = serde_json::from_str(&text).ok()?;
        if entry.key != key || entry.code_version != CODE_VERSION || &entry.fragment != fragment {
            return None;
        }
        serde_json::from_value(entry.payload).ok()
    }

    pub fn put<T: Serialize>(&self, fragment: &Value, payload: &T) -> Result<(), CliError> {
        let key = cache_key(fragment);
        let path = self.path(&key);
        let parent = path.parent().expect("entry path has a parent");
        fs::create_dir_all(parent).map_err(|e| CliError::io(format!("creating {}", parent.display()), e))?;
        let entry = Entry {
            key,
            code_version: CODE_VERSION.to_string(),
            fragment: fragment.clone(),
            payload: serde_json::to_value(payload).expect("payload serializes"),
        };
        write_atomic(&path, serde_json::to_string(&entry).expect("entry serializes").as_bytes())
    }

    /// Returns the cached payload or computes and stores it. The flag is
    /// true on a hit.
    pub fn fetch<T, F>(&self, fragment: &Value, compute: F) -> Result<(T, bool), CliError>
    where
        T: Serialize + DeserializeOwned,
        F: FnOnce() -> Result<T, CliError>,
    {
        if let Some(hit) = self.get(fragment) {
            return Ok((hit, true));
        }
        let value = compute()?;
        self.put(fragment, &value)?;
        Ok((value, false))
    }
}

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(format!("temporary file in {}", dir.display()), e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(format!("writing {}", path.display()), e))?;
    tmp.persist(path).map_err(|e| CliError::io(format!("renaming into {}", path.display()), e.error))?;
    Ok(())
}
