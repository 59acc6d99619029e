//! Series configuration: JSON on disk, every field optional.
//!
//! ```json
//! {
//!   "games": 20,
//!   "side_under_test": "Evil",
//!   "learning": true,
//!   "ablations": ["AO"],
//!   "seed": 7,
//!   "opponents": "Bot",
//!   "checkpoint_interval": 5,
//!   "workers": 1,
//!   "model": { "model": "gpt-3.5-turbo-16k",
//!              "temperatures": { "agent": 0.3, "extractor": 0.0, "judge": 0.0, "summarizer": 0.0 } },
//!   "suggestion_count": 3,
//!   "pipeline": { "retry_budget": 2, "reask_budget": 2, "char_budget": 48000 },
//!   "extractor_model": true,
//!   "backend": { "kind": "canned" },
//!   "data_dir": null
//! }
//! ```
//!
//! `backend` is `{"kind": "canned"}` for the offline responder or
//! `{"kind": "live", "endpoint": ..., "max_attempts": 3, "initial_backoff_ms": 500,
//! "timeout_secs": 120, "max_in_flight": 4}` for the HTTP client.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use avalon_core::agent::{AnalysisScope, PipelineSettings};
use avalon_core::backend::ModelSettings;
use avalon_core::experience::{LearningSwitches, SUGGESTION_COUNT};
use avalon_core::rules::Side;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::http::HttpSettings;

/// Module switched off for a series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Ablation {
    /// Improving-strategy step of experience learning.
    IS,
    /// Other-roles strategy summaries of experience learning.
    AO,
    /// Analysis module.
    AM,
    Plan,
    Action,
    AnalysisTeammatesOnly,
    AnalysisAdversariesOnly,
}

impl Ablation {
    pub const ALL: [Ablation; 7] = [
        Ablation::IS,
        Ablation::AO,
        Ablation::AM,
        Ablation::Plan,
        Ablation::Action,
        Ablation::AnalysisTeammatesOnly,
        Ablation::AnalysisAdversariesOnly,
    ];

    pub fn parse(name: &str) -> Option<Ablation> {
        Ablation::ALL
            .into_iter()
            .find(|a| format!("{a:?}").eq_ignore_ascii_case(name.trim()))
    }
}

/// Agent kind filling the seats of the side not under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OpponentKind {
    Bot,
    Pipeline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendSpec {
    Canned,
    Live(HttpSettings),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Budgets {
    pub retry_budget: u8,
    pub reask_budget: u8,
    pub char_budget: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        let p = PipelineSettings::default();
        Budgets {
            retry_budget: p.retry_budget,
            reask_budget: p.reask_budget,
            char_budget: p.char_budget,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeriesConfig {
    pub games: u32,
    pub side_under_test: Side,
    pub learning: bool,
    pub ablations: BTreeSet<Ablation>,
    pub seed: u64,
    pub opponents: OpponentKind,
    /// Games between rolling winning-rate checkpoints.
    pub checkpoint_interval: u32,
    /// Parallel games when learning is off.
    pub workers: usize,
    pub model: ModelSettings,
    pub suggestion_count: usize,
    pub pipeline: Budgets,
    pub extractor_model: bool,
    pub backend: BackendSpec,
    /// Template, profile and demonstration overrides.
    pub data_dir: Option<PathBuf>,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        SeriesConfig {
            games: 20,
            side_under_test: Side::Good,
            learning: true,
            ablations: BTreeSet::new(),
            seed: 0,
            opponents: OpponentKind::Bot,
            checkpoint_interval: 5,
            workers: 1,
            model: ModelSettings::default(),
            suggestion_count: SUGGESTION_COUNT,
            pipeline: Budgets::default(),
            extractor_model: true,
            backend: BackendSpec::Canned,
            data_dir: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

impl SeriesConfig {
    pub fn load(path: &Path) -> Result<SeriesConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Every rule violation, not only the first.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let has = |a| self.ablations.contains(&a);
        if self.games == 0 {
            out.push("games must be at least 1".to_string());
        }
        if has(Ablation::AnalysisTeammatesOnly) && has(Ablation::AnalysisAdversariesOnly) {
            out.push(
                "AnalysisTeammatesOnly and AnalysisAdversariesOnly are mutually exclusive"
                    .to_string(),
            );
        }
        if has(Ablation::AM)
            && (has(Ablation::AnalysisTeammatesOnly) || has(Ablation::AnalysisAdversariesOnly))
        {
            out.push("analysis scope ablations need the analysis module".to_string());
        }
        for a in [Ablation::IS, Ablation::AO] {
            if has(a) && !self.learning {
                out.push(format!("{a:?} requires learning"));
            }
        }
        if self.checkpoint_interval == 0 {
            out.push("checkpoint_interval must be at least 1".to_string());
        }
        if self.workers == 0 {
            out.push("workers must be at least 1".to_string());
        }
        if self.suggestion_count != SUGGESTION_COUNT {
            out.push(format!("suggestion_count must be {SUGGESTION_COUNT}"));
        }
        let t = self.model.temperatures;
        for (name, v) in [
            ("agent", t.agent),
            ("extractor", t.extractor),
            ("judge", t.judge),
            ("summarizer", t.summarizer),
        ] {
            if !(0.0..=2.0).contains(&v) {
                out.push(format!("{name} temperature must lie in [0, 2]"));
            }
        }
        if self.model.model.trim().is_empty() {
            out.push("model name is empty".to_string());
        }
        if let BackendSpec::Live(h) = &self.backend {
            if h.max_attempts == 0 || h.max_in_flight == 0 {
                out.push(
                    "live backend needs max_attempts and max_in_flight of at least 1".to_string(),
                );
            }
            if !(h.endpoint.starts_with("http://") || h.endpoint.starts_with("https://")) {
                out.push("live endpoint must be an http(s) URL".to_string());
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(problems))
        }
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).unwrap_or_default();
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn pipeline_settings(&self) -> PipelineSettings {
        let has = |a| self.ablations.contains(&a);
        let scope = if has(Ablation::AnalysisTeammatesOnly) {
            AnalysisScope::TeammatesOnly
        } else if has(Ablation::AnalysisAdversariesOnly) {
            AnalysisScope::AdversariesOnly
        } else {
            AnalysisScope::AllPlayers
        };
        PipelineSettings {
            analysis: !has(Ablation::AM),
            planning: !has(Ablation::Plan),
            action: !has(Ablation::Action),
            scope,
            retry_budget: self.pipeline.retry_budget,
            reask_budget: self.pipeline.reask_budget,
            char_budget: self.pipeline.char_budget,
        }
    }

    pub fn learning_switches(&self) -> LearningSwitches {
        LearningSwitches {
            improve_strategy: !self.ablations.contains(&Ablation::IS),
            other_roles: !self.ablations.contains(&Ablation::AO),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_follow_the_published_setup() {
        let c = SeriesConfig::default();
        c.validate().unwrap();
        assert_eq!(c.games, 20);
        assert_eq!(c.checkpoint_interval, 5);
        assert_eq!(c.model.temperatures.agent, 0.3);
        assert_eq!(c.model.temperatures.extractor, 0.0);
    }

    #[test]
    fn empty_object_parses_to_defaults() {
        let c: SeriesConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, SeriesConfig::default());
        let back: SeriesConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(serde_json::from_str::<SeriesConfig>(r#"{"gamez": 3}"#).is_err());
    }

    #[test]
    fn rule_violations_are_all_reported() {
        let c = SeriesConfig {
            learning: false,
            ablations: [
                Ablation::IS,
                Ablation::AO,
                Ablation::AnalysisTeammatesOnly,
                Ablation::AnalysisAdversariesOnly,
            ]
            .into(),
            suggestion_count: 4,
            ..SeriesConfig::default()
        };
        let p = c.problems();
        assert_eq!(p.len(), 4, "{p:?}");
        assert!(matches!(c.validate(), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn ablations_map_to_switches() {
        let c = SeriesConfig {
            ablations: [Ablation::AM, Ablation::Action, Ablation::IS].into(),
            ..SeriesConfig::default()
        };
        let p = c.pipeline_settings();
        assert!(!p.analysis && p.planning && !p.action);
        assert!(!c.learning_switches().improve_strategy);
        assert!(c.learning_switches().other_roles);
        let c = SeriesConfig {
            ablations: [Ablation::AnalysisAdversariesOnly].into(),
            ..SeriesConfig::default()
        };
        assert_eq!(c.pipeline_settings().scope, AnalysisScope::AdversariesOnly);
    }

    #[test]
    fn ablation_names_parse_case_insensitively() {
        assert_eq!(Ablation::parse("am"), Some(Ablation::AM));
        assert_eq!(
            Ablation::parse("AnalysisTeammatesOnly"),
            Some(Ablation::AnalysisTeammatesOnly)
        );
        assert_eq!(Ablation::parse("xx"), None);
    }

    #[test]
    fn live_backend_spec_parses() {
        let c: SeriesConfig = serde_json::from_str(
            r#"{"backend":{"kind":"live","endpoint":"http://localhost:8080/v1"}}"#,
        )
        .unwrap();
        match c.backend {
            BackendSpec::Live(h) => {
                assert_eq!(h.endpoint, "http://localhost:8080/v1");
                assert_eq!(h.max_attempts, 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn digest_tracks_content() {
        let a = SeriesConfig::default();
        let b = SeriesConfig {
            seed: 1,
            ..a.clone()
        };
        assert_eq!(a.digest(), a.clone().digest());
        assert_ne!(a.digest(), b.digest());
    }
}
