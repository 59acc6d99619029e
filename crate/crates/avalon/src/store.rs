//! Strategy store files.

use std::fs;
use std::path::{Path, PathBuf};

use avalon_core::experience::StrategyStore;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

pub fn load_store(path: &Path) -> Result<StrategyStore, StoreError> {
    let text = fs::read_to_string(path).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| StoreError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn save_store(path: &Path, store: &StrategyStore) -> Result<(), StoreError> {
    let mut text = serde_json::to_string_pretty(store).unwrap_or_default();
    text.push('\n');
    fs::write(path, text).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `store.json` and an immutable `store.v<version>.json` beside it.
pub fn save_versioned(dir: &Path, store: &StrategyStore) -> Result<PathBuf, StoreError> {
    let versioned = dir.join(format!("store.v{}.json", store.version));
    save_store(&versioned, store)?;
    save_store(&dir.join("store.json"), store)?;
    Ok(versioned)
}

#[cfg(test)]
mod tests {
    use super::*;
    use avalon_core::agent::default_profiles;

    #[test]
    fn roundtrip_and_versions() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = StrategyStore::from_profiles(&default_profiles());
        save_versioned(dir.path(), &s).unwrap();
        s.version = 1;
        let p = save_versioned(dir.path(), &s).unwrap();
        assert!(p.ends_with("store.v1.json"));
        assert!(dir.path().join("store.v0.json").exists());
        assert_eq!(load_store(&dir.path().join("store.json")).unwrap(), s);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_store(Path::new("/nonexistent/s.json")),
            Err(StoreError::Io { .. })
        ));
    }
}
