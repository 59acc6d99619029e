//! Prompt templates with `{Name}` placeholders.
//!
//! The default texts ship under `data/templates/` and are compiled in. Any of
//! them can be replaced at runtime through [`PromptSet::set`].

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("unclosed placeholder starting at byte {0}")]
    Unclosed(usize),
    #[error("no value for placeholder {{{0}}}")]
    MissingSlot(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Text(String),
    Slot(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    source: String,
    segments: Vec<Segment>,
}

impl Template {
    /// Parses `text`; trailing whitespace is dropped.
    pub fn parse(text: &str) -> Result<Template, TemplateError> {
        let source = text.trim_end().to_string();
        let mut segments = Vec::new();
        let mut rest = source.as_str();
        let mut offset = 0;
        while let Some(open) = rest.find('{') {
            let after = &rest[open + 1..];
            let close = after
                .find(['}', '{', '\n'])
                .filter(|i| after.as_bytes()[*i] == b'}')
                .ok_or(TemplateError::Unclosed(offset + open))?;
            if open > 0 {
                segments.push(Segment::Text(rest[..open].to_string()));
            }
            segments.push(Segment::Slot(after[..close].to_string()));
            let consumed = open + 1 + close + 1;
            offset += consumed;
            rest = &rest[consumed..];
        }
        if !rest.is_empty() {
            segments.push(Segment::Text(rest.to_string()));
        }
        Ok(Template { source, segments })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Distinct placeholder names in order of first appearance.
    pub fn placeholders(&self) -> Vec<&str> {
        let mut names: Vec<&str> = Vec::new();
        for seg in &self.segments {
            if let Segment::Slot(name) = seg {
                if !names.contains(&name.as_str()) {
                    names.push(name);
                }
            }
        }
        names
    }

    /// Fills every placeholder. Values are inserted verbatim and never re-scanned.
    pub fn render(&self, slots: &[(&str, &str)]) -> Result<String, TemplateError> {
        let mut out = String::with_capacity(self.source.len());
        for seg in &self.segments {
            match seg {
                Segment::Text(t) => out.push_str(t),
                Segment::Slot(name) => out.push_str(lookup(slots, name)?),
            }
        }
        Ok(out)
    }

    /// Like [`Template::render`], but a line is dropped when any placeholder
    /// on it receives an empty value.
    pub fn render_dropping_empty_lines(
        &self,
        slots: &[(&str, &str)],
    ) -> Result<String, TemplateError> {
        let rendered = self.render(slots)?;
        let mut kept: Vec<&str> = Vec::new();
        let mut source_lines = self.source.lines();
        for line in rendered.lines() {
            let template_line = source_lines.next().unwrap_or_default();
            let line_template = Template::parse(template_line)?;
            let empty = line_template
                .placeholders()
                .iter()
                .any(|name| lookup(slots, name).map(str::is_empty).unwrap_or(true));
            if !empty {
                kept.push(line);
            }
        }
        Ok(kept.join("\n"))
    }
}

fn lookup<'a>(slots: &[(&str, &'a str)], name: &str) -> Result<&'a str, TemplateError> {
    slots
        .iter()
        .find(|(k, _)| *k == name)
        .map(|(_, v)| *v)
        .ok_or_else(|| TemplateError::MissingSlot(name.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TemplateId {
    System,
    Summarization,
    Analysis,
    Planning,
    Action,
    Response,
    Suggestions,
    ImproveStrategy,
    OtherRoles,
    Experience,
    Extractor,
    JudgeSelfRecommendation,
    JudgeDeception,
    JudgeAttitude,
}

impl TemplateId {
    pub const ALL: [TemplateId; 14] = [
        TemplateId::System,
        TemplateId::Summarization,
        TemplateId::Analysis,
        TemplateId::Planning,
        TemplateId::Action,
        TemplateId::Response,
        TemplateId::Suggestions,
        TemplateId::ImproveStrategy,
        TemplateId::OtherRoles,
        TemplateId::Experience,
        TemplateId::Extractor,
        TemplateId::JudgeSelfRecommendation,
        TemplateId::JudgeDeception,
        TemplateId::JudgeAttitude,
    ];

    /// File name under a template directory.
    pub fn file_name(self) -> &'static str {
        match self {
            TemplateId::System => "system.txt",
            TemplateId::Summarization => "summarization.txt",
            TemplateId::Analysis => "analysis.txt",
            TemplateId::Planning => "planning.txt",
            TemplateId::Action => "action.txt",
            TemplateId::Response => "response.txt",
            TemplateId::Suggestions => "suggestions.txt",
            TemplateId::ImproveStrategy => "improve_strategy.txt",
            TemplateId::OtherRoles => "other_roles.txt",
            TemplateId::Experience => "experience.txt",
            TemplateId::Extractor => "extractor.txt",
            TemplateId::JudgeSelfRecommendation => "judge_self_recommendation.txt",
            TemplateId::JudgeDeception => "judge_deception.txt",
            TemplateId::JudgeAttitude => "judge_attitude.txt",
        }
    }

    pub fn default_text(self) -> &'static str {
        match self {
            TemplateId::System => include_str!("../data/templates/system.txt"),
            TemplateId::Summarization => include_str!("../data/templates/summarization.txt"),
            TemplateId::Analysis => include_str!("../data/templates/analysis.txt"),
            TemplateId::Planning => include_str!("../data/templates/planning.txt"),
            TemplateId::Action => include_str!("../data/templates/action.txt"),
            TemplateId::Response => include_str!("../data/templates/response.txt"),
            TemplateId::Suggestions => include_str!("../data/templates/suggestions.txt"),
            TemplateId::ImproveStrategy => include_str!("../data/templates/improve_strategy.txt"),
            TemplateId::OtherRoles => include_str!("../data/templates/other_roles.txt"),
            TemplateId::Experience => include_str!("../data/templates/experience.txt"),
            TemplateId::Extractor => include_str!("../data/templates/extractor.txt"),
            TemplateId::JudgeSelfRecommendation => {
                include_str!("../data/templates/judge_self_recommendation.txt")
            }
            TemplateId::JudgeDeception => include_str!("../data/templates/judge_deception.txt"),
            TemplateId::JudgeAttitude => include_str!("../data/templates/judge_attitude.txt"),
        }
    }
}

/// The full set of templates used by one game.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptSet {
    templates: BTreeMap<TemplateId, Template>,
}

impl Default for PromptSet {
    fn default() -> Self {
        let templates = TemplateId::ALL
            .into_iter()
            .map(|id| {
                let t = Template::parse(id.default_text()).expect("built-in templates parse");
                (id, t)
            })
            .collect();
        PromptSet { templates }
    }
}

impl PromptSet {
    pub fn get(&self, id: TemplateId) -> &Template {
        &self.templates[&id]
    }

    pub fn set(&mut self, id: TemplateId, text: &str) -> Result<(), TemplateError> {
        self.templates.insert(id, Template::parse(text)?);
        Ok(())
    }

    /// Sources of templates that differ from the built-in defaults.
    pub fn overrides(&self) -> BTreeMap<TemplateId, String> {
        self.templates
            .iter()
            .filter(|(id, t)| t.source() != id.default_text().trim_end())
            .map(|(id, t)| (*id, t.source().to_string()))
            .collect()
    }

    pub fn with_overrides(
        overrides: &BTreeMap<TemplateId, String>,
    ) -> Result<PromptSet, TemplateError> {
        let mut set = PromptSet::default();
        for (id, text) in overrides {
            set.set(*id, text)?;
        }
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_render() {
        let t = Template::parse("Goal: {Goal}\nPlan: {Plan}").unwrap();
        assert_eq!(t.placeholders(), ["Goal", "Plan"]);
        assert_eq!(
            t.render(&[("Goal", "win"), ("Plan", "{x}")]).unwrap(),
            "Goal: win\nPlan: {x}"
        );
        assert_eq!(
            t.render(&[("Goal", "win")]),
            Err(TemplateError::MissingSlot("Plan".to_string()))
        );
    }

    #[test]
    fn unclosed_is_error() {
        assert_eq!(Template::parse("a {b"), Err(TemplateError::Unclosed(2)));
        assert_eq!(Template::parse("a {b\n}"), Err(TemplateError::Unclosed(2)));
    }

    #[test]
    fn all_defaults_render_with_empty_slots_without_braces() {
        let set = PromptSet::default();
        for id in TemplateId::ALL {
            let t = set.get(id);
            let names = t.placeholders();
            assert!(!names.is_empty(), "{id:?} has placeholders");
            let slots: Vec<(&str, &str)> = names.iter().map(|n| (*n, "")).collect();
            let out = t.render(&slots).unwrap();
            assert!(!out.contains('{') && !out.contains('}'), "{id:?}");
        }
    }

    #[test]
    fn module_templates_carry_expected_slots() {
        let set = PromptSet::default();
        assert_eq!(
            set.get(TemplateId::Analysis).placeholders(),
            ["Name", "Role", "Summary"]
        );
        assert_eq!(
            set.get(TemplateId::Planning).placeholders(),
            [
                "Role Information",
                "Goal",
                "Strategy",
                "Plan",
                "Summary",
                "Analysis"
            ]
        );
        assert_eq!(
            set.get(TemplateId::Action).placeholders(),
            [
                "Role Information",
                "Goal",
                "Strategy",
                "Plan",
                "Summary",
                "Analysis",
                "Instruction"
            ]
        );
        assert_eq!(
            set.get(TemplateId::Response).placeholders(),
            [
                "Role Information",
                "Goal",
                "Strategy",
                "Plan",
                "Summary",
                "Instruction",
                "actions"
            ]
        );
        assert_eq!(
            set.get(TemplateId::Summarization).placeholders(),
            ["Player i", "conversations"]
        );
    }

    #[test]
    fn dropping_empty_lines() {
        let t = Template::parse("Header\nA: {a}\nB: {b}").unwrap();
        assert_eq!(
            t.render_dropping_empty_lines(&[("a", "1"), ("b", "")])
                .unwrap(),
            "Header\nA: 1"
        );
    }

    #[test]
    fn overrides_tracked() {
        let mut set = PromptSet::default();
        assert!(set.overrides().is_empty());
        set.set(TemplateId::Analysis, "Analyze {Name}").unwrap();
        let o = set.overrides();
        assert_eq!(o.len(), 1);
        assert_eq!(PromptSet::with_overrides(&o).unwrap(), set);
    }
}
