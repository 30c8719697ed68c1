//! On-disk result cache keyed by config hash.
//!
//! Entries are written to a temporary file in the cache directory and renamed
//! into place, so readers never observe a partial record.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

/// Environment variable naming the cache directory.
pub const CACHE_DIR_VAR: &str = "LGCS_CACHE_DIR";

#[derive(Debug, Clone)]
pub struct ResultCache {
    dir: PathBuf,
}

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

impl ResultCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self { dir })
    }

    /// Cache in `$LGCS_CACHE_DIR`, falling back to `.lgcs-cache`.
    pub fn from_env() -> Result<Self> {
        let dir = std::env::var_os(CACHE_DIR_VAR)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from(".lgcs-cache"));
        Self::new(dir)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> Result<PathBuf> {
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '-') {
            return Err(Error::InvalidParameter(format!("bad cache key '{key}'")));
        }
        Ok(self.dir.join(format!("{key}.json")))
    }

    pub fn get(&self, key: &str) -> Result<Option<String>> {
        let path = self.path(key)?;
        match std::fs::read_to_string(&path) {
            Ok(text) => Ok(Some(text)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(&path, e)),
        }
    }

    pub fn put(&self, key: &str, contents: &str) -> Result<()> {
        let path = self.path(key)?;
        let tmp = self.dir.join(format!(
            ".{key}.{}.{}.tmp",
            std::process::id(),
            TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        std::fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }

    /// Cached value for `key`, or `compute()` stored under `key`. The flag is
    /// true on a hit.
    pub fn get_or_insert_with(
        &self,
        key: &str,
        compute: impl FnOnce() -> Result<String>,
    ) -> Result<(String, bool)> {
        if let Some(hit) = self.get(key)? {
            return Ok((hit, true));
        }
        let value = compute()?;
        self.put(key, &value)?;
        Ok((value, false))
    }
}
