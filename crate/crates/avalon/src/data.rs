//! Prompt templates, role profiles and extractor demonstrations loaded from a
//! data directory. Anything missing falls back to the built-in copy.
//!
//! Layout: `templates/<name>.txt`, `profiles.json`, `demonstrations.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use avalon_core::agent::{default_profiles, parse_profiles, RoleProfile};
use avalon_core::extraction::Demonstrations;
use avalon_core::prompts::{PromptSet, TemplateError, TemplateId};
use avalon_core::rules::Role;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error("template {name}: {source}")]
    Template {
        name: &'static str,
        #[source]
        source: TemplateError,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DataOverrides {
    pub templates: BTreeMap<TemplateId, String>,
    pub profiles: Option<BTreeMap<Role, RoleProfile>>,
    pub demonstrations: Option<Demonstrations>,
}

fn read_optional(path: &Path) -> Result<Option<String>, DataError> {
    match fs::read_to_string(path) {
        Ok(text) => Ok(Some(text)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(source) => Err(DataError::Io {
            path: path.to_path_buf(),
            source,
        }),
    }
}

fn invalid(path: &Path, message: impl ToString) -> DataError {
    DataError::Invalid {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

impl DataOverrides {
    pub fn load(dir: &Path) -> Result<DataOverrides, DataError> {
        if !dir.is_dir() {
            return Err(invalid(dir, "not a directory"));
        }
        let mut out = DataOverrides::default();
        let mut prompts = PromptSet::default();
        for id in TemplateId::ALL {
            let path = dir.join("templates").join(id.file_name());
            if let Some(text) = read_optional(&path)? {
                prompts
                    .set(id, &text)
                    .map_err(|source| DataError::Template {
                        name: id.file_name(),
                        source,
                    })?;
                out.templates.insert(id, text);
            }
        }
        let path = dir.join("profiles.json");
        if let Some(text) = read_optional(&path)? {
            let profiles = parse_profiles(&text).map_err(|e| invalid(&path, e))?;
            if let Some(bad) = profiles.values().find(|p| !p.is_valid()) {
                return Err(invalid(
                    &path,
                    format!("profile for {} has an empty field", bad.role),
                ));
            }
            let mut merged = default_profiles();
            merged.extend(profiles);
            out.profiles = Some(merged);
        }
        let path = dir.join("demonstrations.json");
        if let Some(text) = read_optional(&path)? {
            out.demonstrations = Some(serde_json::from_str(&text).map_err(|e| invalid(&path, e))?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_dir_means_builtins() {
        let dir = tempfile::tempdir().unwrap();
        assert_eq!(
            DataOverrides::load(dir.path()).unwrap(),
            DataOverrides::default()
        );
    }

    #[test]
    fn template_override_is_validated() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("templates")).unwrap();
        let path = dir.path().join("templates").join("analysis.txt");
        fs::write(&path, "Analyze {summary} for {player}.").unwrap();
        let loaded = DataOverrides::load(dir.path()).unwrap();
        assert_eq!(
            loaded.templates[&TemplateId::Analysis],
            "Analyze {summary} for {player}."
        );
        fs::write(&path, "broken {summary").unwrap();
        assert!(matches!(
            DataOverrides::load(dir.path()),
            Err(DataError::Template { .. })
        ));
    }

    #[test]
    fn bad_profiles_rejected() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("profiles.json"), "[]x").unwrap();
        assert!(matches!(
            DataOverrides::load(dir.path()),
            Err(DataError::Invalid { .. })
        ));
    }
}
