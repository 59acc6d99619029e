//! Learning across games.
//!
//! After each finished game every role gets three suggestions drawn from the
//! game's round summaries, its strategy is rewritten with them, and a
//! summary of the other roles' strategies is produced from its point of
//! view. The next game's system prompts carry the suggestions and the
//! summary. Stored text never names a seat: any seat reference a backend
//! emits is rewritten to the role that seat held.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::RoleProfile;
use crate::backend::{Backend, BackendError, ChatMessage, ModelSettings, Purpose, Stage};
use crate::log::{Audience, EventKind, GameLog};
use crate::prompts::{PromptSet, TemplateId};
use crate::rules::{Role, RoleAssignment, Seat};
use crate::text::replace_seat_mentions;

/// Suggestions produced per role per game.
pub const SUGGESTION_COUNT: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuggestionSet {
    pub role: Role,
    pub suggestions: Vec<String>,
    pub source_game: String,
}

impl SuggestionSet {
    pub fn is_valid(&self) -> bool {
        self.suggestions.len() == SUGGESTION_COUNT
            && self.suggestions.iter().all(|s| !s.trim().is_empty())
    }

    /// Single-line form used inside prompts.
    pub fn inline(&self) -> String {
        self.suggestions
            .iter()
            .enumerate()
            .map(|(i, s)| format!("{}. {}", i + 1, s))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Other roles' strategies, one text per viewing role.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OtherRoleStrategies {
    pub summaries: BTreeMap<Role, String>,
    pub source_game: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleExperience {
    pub strategy: String,
    pub suggestions: Option<SuggestionSet>,
    pub version: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyStore {
    pub version: u64,
    pub roles: BTreeMap<Role, RoleExperience>,
    pub others: Option<OtherRoleStrategies>,
}

impl StrategyStore {
    pub fn from_profiles(profiles: &BTreeMap<Role, RoleProfile>) -> Self {
        let roles = profiles
            .iter()
            .map(|(role, p)| {
                let entry = RoleExperience {
                    strategy: p.strategy.clone(),
                    suggestions: None,
                    version: 0,
                };
                (*role, entry)
            })
            .collect();
        StrategyStore {
            version: 0,
            roles,
            others: None,
        }
    }

    /// `profiles` with stored strategies substituted.
    pub fn apply_to(&self, profiles: &BTreeMap<Role, RoleProfile>) -> BTreeMap<Role, RoleProfile> {
        let mut out = profiles.clone();
        for (role, p) in out.iter_mut() {
            if let Some(entry) = self.roles.get(role) {
                p.strategy = entry.strategy.clone();
            }
        }
        out
    }

    /// Rendered experience block for each role; roles with nothing learned
    /// yet are absent.
    pub fn experience_blocks(&self, prompts: &PromptSet) -> BTreeMap<Role, String> {
        let mut out = BTreeMap::new();
        for role in Role::ALL {
            let suggestions = self.roles.get(&role).and_then(|e| e.suggestions.as_ref());
            let others = self.others.as_ref().and_then(|o| o.summaries.get(&role));
            let block = experience_block(prompts, suggestions, others.map(String::as_str));
            if !block.is_empty() {
                out.insert(role, block);
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExperienceError {
    #[error("cannot learn from an unfinished game")]
    IncompleteLog,
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// The experience section for one role's system prompt, or "" if both parts
/// are empty. A missing part drops its line.
pub fn experience_block(
    prompts: &PromptSet,
    suggestions: Option<&SuggestionSet>,
    others: Option<&str>,
) -> String {
    let suggestion = suggestions.map(SuggestionSet::inline).unwrap_or_default();
    let other = others.unwrap_or_default().trim();
    if suggestion.is_empty() && other.is_empty() {
        return String::new();
    }
    prompts
        .get(TemplateId::Experience)
        .render_dropping_empty_lines(&[("suggestion", &suggestion), ("other strategy", other)])
        .unwrap_or_default()
}

/// Appends a rendered experience block to the base instructions.
pub fn inject_experience(base: &str, block: &str) -> String {
    if block.trim().is_empty() {
        base.to_string()
    } else {
        format!("{base}\n\n{block}")
    }
}

/// Rewrites seat references to the role that seat held.
pub fn scrub_seats(text: &str, assignment: &RoleAssignment) -> String {
    replace_seat_mentions(text, |m| match m.seat() {
        Some(seat) => assignment.role_of(seat).display_name().to_string(),
        None => "another player".to_string(),
    })
}

/// Splits a reply into list items: numbered lines, bullet lines, or else
/// blank-line separated paragraphs, or else plain lines.
pub fn parse_list(text: &str) -> Vec<String> {
    fn marker_len(line: &str) -> Option<usize> {
        let t = line.trim_start();
        let lead = line.len() - t.len();
        for bullet in ["- ", "* ", "• "] {
            if t.starts_with(bullet) {
                return Some(lead + bullet.len());
            }
        }
        let digits = t.chars().take_while(char::is_ascii_digit).count();
        if digits > 0 && digits <= 2 {
            let rest = &t[digits..];
            if rest.starts_with(". ") || rest.starts_with(") ") || rest.starts_with(": ") {
                return Some(lead + digits + 2);
            }
        }
        None
    }
    let clean = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ");

    let lines: Vec<&str> = text.lines().collect();
    if lines.iter().any(|l| marker_len(l).is_some()) {
        let mut items: Vec<String> = Vec::new();
        let mut current: Option<String> = None;
        for line in lines {
            if let Some(n) = marker_len(line) {
                if let Some(done) = current.take() {
                    items.push(done);
                }
                current = Some(line[n..].to_string());
            } else if let Some(cur) = current.as_mut() {
                if line.trim().is_empty() {
                    items.push(current.take().unwrap_or_default());
                } else {
                    cur.push(' ');
                    cur.push_str(line.trim());
                }
            }
        }
        items.extend(current);
        return items
            .iter()
            .map(|s| clean(s))
            .filter(|s| !s.is_empty())
            .collect();
    }
    let paragraphs: Vec<String> = text
        .split("\n\n")
        .map(clean)
        .filter(|s| !s.is_empty())
        .collect();
    if paragraphs.len() > 1 {
        return paragraphs;
    }
    lines
        .into_iter()
        .map(clean)
        .filter(|s| !s.is_empty())
        .collect()
}

/// What one learning step needs besides the backend.
#[derive(Debug, Clone, Copy)]
pub struct LearningContext<'a> {
    pub prompts: &'a PromptSet,
    pub model: &'a ModelSettings,
    pub profiles: &'a BTreeMap<Role, RoleProfile>,
    /// Extra attempts after an unusable reply or a transient failure.
    pub retry_budget: u8,
}

/// Module switches for [`learn_from_game`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearningSwitches {
    pub improve_strategy: bool,
    pub other_roles: bool,
}

impl Default for LearningSwitches {
    fn default() -> Self {
        LearningSwitches {
            improve_strategy: true,
            other_roles: true,
        }
    }
}

/// Facts taken from one finished game's log.
#[derive(Debug, Clone)]
pub struct GameDigest {
    pub game_id: String,
    pub assignment: RoleAssignment,
    /// "Player 1: Merlin, ..." line.
    pub mapping: String,
    per_seat: BTreeMap<Seat, Vec<(u8, String)>>,
    public_rounds: Vec<(u8, String)>,
}

impl GameDigest {
    pub fn from_log(log: &GameLog) -> Result<GameDigest, ExperienceError> {
        let header = log.header().ok_or(ExperienceError::IncompleteLog)?;
        if !log.is_complete() {
            return Err(ExperienceError::IncompleteLog);
        }
        let assignment = header.assignment.clone();
        let mapping = assignment
            .iter()
            .map(|(s, r)| format!("{}: {}", s.name(), r.display_name()))
            .collect::<Vec<_>>()
            .join(", ");
        let mut per_seat: BTreeMap<Seat, Vec<(u8, String)>> = BTreeMap::new();
        let mut public: BTreeMap<u8, Vec<String>> = BTreeMap::new();
        for e in &log.events {
            match &e.kind {
                EventKind::MemorySnapshot {
                    owner,
                    closed_round,
                    summary,
                } => {
                    per_seat
                        .entry(*owner)
                        .or_default()
                        .push((*closed_round, summary.clone()));
                }
                EventKind::HostInstruction {
                    audience: Audience::All,
                    text,
                    ..
                } => public
                    .entry(e.round)
                    .or_default()
                    .push(format!("Host: {text}")),
                EventKind::PublicResponse { seat, text } => public
                    .entry(e.round)
                    .or_default()
                    .push(format!("{}: {text}", seat.name())),
                _ => {}
            }
        }
        Ok(GameDigest {
            game_id: header.game_id.clone(),
            assignment,
            mapping,
            per_seat,
            public_rounds: public
                .into_iter()
                .map(|(r, lines)| (r, lines.join("\n")))
                .collect(),
        })
    }

    /// Round summaries as seen by `seat`. Seats without memory (rule bots)
    /// fall back to another seat's summaries, then to the public transcript.
    pub fn round_summaries(&self, seat: Seat) -> String {
        let rounds = self
            .per_seat
            .get(&seat)
            .or_else(|| self.per_seat.values().next())
            .unwrap_or(&self.public_rounds);
        rounds
            .iter()
            .map(|(r, text)| format!("Round {r}: {text}"))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

fn call(
    backend: &mut dyn Backend,
    ctx: &LearningContext<'_>,
    stage: Stage,
    prompt: String,
) -> Result<Option<String>, BackendError> {
    let request = ctx
        .model
        .request(Purpose::Agent, stage, None, vec![ChatMessage::user(prompt)]);
    match backend.complete(&request) {
        Ok(text) => Ok(Some(text.replace("<EOS>", "").trim().to_string())),
        Err(e) if e.is_retryable() => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn render_suggestions_prompt(
    prompts: &PromptSet,
    digest: &GameDigest,
    role: Role,
    goal: &str,
    strategy: &str,
    previous: Option<&SuggestionSet>,
) -> String {
    let seat = digest.assignment.seat_of(role);
    let previous = previous
        .map(SuggestionSet::inline)
        .unwrap_or_else(|| "None".to_string());
    prompts
        .get(TemplateId::Suggestions)
        .render(&[
            ("player", &seat.name()),
            ("role", role.display_name()),
            ("player-role mapping", &digest.mapping),
            ("summary", &digest.round_summaries(seat)),
            ("goal", goal),
            ("current strategy", strategy),
            ("suggestions from last game", &previous),
        ])
        .unwrap_or_default()
}

/// Outcome of a suggestion pass. `flagged` means no usable reply arrived and
/// `set` is the previous set (if any).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuggestionOutcome {
    pub set: Option<SuggestionSet>,
    pub flagged: bool,
}

pub fn extract_suggestions(
    digest: &GameDigest,
    role: Role,
    strategy: &str,
    previous: Option<&SuggestionSet>,
    ctx: &LearningContext<'_>,
    backend: &mut dyn Backend,
) -> Result<SuggestionOutcome, BackendError> {
    let goal = ctx
        .profiles
        .get(&role)
        .map(|p| p.goal.as_str())
        .unwrap_or_default();
    let prompt = render_suggestions_prompt(ctx.prompts, digest, role, goal, strategy, previous);
    for _ in 0..=ctx.retry_budget {
        let Some(reply) = call(backend, ctx, Stage::Suggestions, prompt.clone())? else {
            continue;
        };
        let items = parse_list(&reply);
        if items.len() == SUGGESTION_COUNT {
            let set = SuggestionSet {
                role,
                suggestions: items
                    .iter()
                    .map(|s| scrub_seats(s, &digest.assignment))
                    .collect(),
                source_game: digest.game_id.clone(),
            };
            return Ok(SuggestionOutcome {
                set: Some(set),
                flagged: false,
            });
        }
    }
    Ok(SuggestionOutcome {
        set: previous.cloned(),
        flagged: true,
    })
}

pub fn render_improve_prompt(
    prompts: &PromptSet,
    player: &str,
    role: Role,
    current: &str,
    suggestions: &SuggestionSet,
) -> String {
    prompts
        .get(TemplateId::ImproveStrategy)
        .render(&[
            ("player", player),
            ("role", role.display_name()),
            ("current strategy", current),
            ("suggestions", &suggestions.inline()),
        ])
        .unwrap_or_default()
}

/// New strategy text; the current one is kept when the reply is empty.
pub fn improve_strategy(
    digest: &GameDigest,
    role: Role,
    current: &str,
    suggestions: &SuggestionSet,
    ctx: &LearningContext<'_>,
    backend: &mut dyn Backend,
) -> Result<String, BackendError> {
    let player = digest.assignment.seat_of(role).name();
    let prompt = render_improve_prompt(ctx.prompts, &player, role, current, suggestions);
    for _ in 0..=ctx.retry_budget {
        if let Some(reply) = call(backend, ctx, Stage::StrategyRewrite, prompt.clone())? {
            let text = reply.split_whitespace().collect::<Vec<_>>().join(" ");
            if !text.is_empty() {
                return Ok(scrub_seats(&text, &digest.assignment));
            }
        }
    }
    Ok(current.to_string())
}

pub fn render_other_roles_prompt(
    prompts: &PromptSet,
    digest: &GameDigest,
    role: Role,
    previous: &str,
) -> String {
    let seat = digest.assignment.seat_of(role);
    let previous = if previous.is_empty() {
        "None"
    } else {
        previous
    };
    prompts
        .get(TemplateId::OtherRoles)
        .render(&[
            ("player", &seat.name()),
            ("player-role mapping", &digest.mapping),
            ("summary", &digest.round_summaries(seat)),
            ("previous strategies", previous),
        ])
        .unwrap_or_default()
}

/// One summary per role; a role whose reply is empty keeps its previous text.
pub fn summarize_other_strategies(
    digest: &GameDigest,
    previous: Option<&OtherRoleStrategies>,
    ctx: &LearningContext<'_>,
    backend: &mut dyn Backend,
) -> Result<OtherRoleStrategies, BackendError> {
    let mut summaries = BTreeMap::new();
    for role in Role::ALL {
        let prev = previous
            .and_then(|o| o.summaries.get(&role))
            .map(String::as_str)
            .unwrap_or_default();
        let prompt = render_other_roles_prompt(ctx.prompts, digest, role, prev);
        let mut text = None;
        for _ in 0..=ctx.retry_budget {
            if let Some(reply) = call(backend, ctx, Stage::OtherRoles, prompt.clone())? {
                let reply = reply.split_whitespace().collect::<Vec<_>>().join(" ");
                if !reply.is_empty() {
                    text = Some(scrub_seats(&reply, &digest.assignment));
                    break;
                }
            }
        }
        match text {
            Some(t) => {
                summaries.insert(role, t);
            }
            None if !prev.is_empty() => {
                summaries.insert(role, prev.to_string());
            }
            None => {}
        }
    }
    Ok(OtherRoleStrategies {
        summaries,
        source_game: digest.game_id.clone(),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearningReport {
    /// Roles whose suggestions could not be parsed; their previous set was kept.
    pub flagged_roles: Vec<Role>,
}

/// One learning step over a finished game. Bumps the store version once.
pub fn learn_from_game(
    store: &mut StrategyStore,
    log: &GameLog,
    switches: LearningSwitches,
    ctx: &LearningContext<'_>,
    backend: &mut dyn Backend,
) -> Result<LearningReport, ExperienceError> {
    let digest = GameDigest::from_log(log)?;
    let mut next = store.clone();
    let mut report = LearningReport::default();
    for role in Role::ALL {
        let fallback = ctx
            .profiles
            .get(&role)
            .map(|p| p.strategy.clone())
            .unwrap_or_default();
        let entry = next.roles.entry(role).or_insert_with(|| RoleExperience {
            strategy: fallback,
            suggestions: None,
            version: 0,
        });
        let outcome = extract_suggestions(
            &digest,
            role,
            &entry.strategy,
            entry.suggestions.as_ref(),
            ctx,
            backend,
        )?;
        if outcome.flagged {
            report.flagged_roles.push(role);
        }
        if switches.improve_strategy && !outcome.flagged {
            if let Some(set) = &outcome.set {
                entry.strategy =
                    improve_strategy(&digest, role, &entry.strategy, set, ctx, backend)?;
            }
        }
        entry.suggestions = outcome.set;
        entry.version += 1;
    }
    if switches.other_roles {
        next.others = Some(summarize_other_strategies(
            &digest,
            store.others.as_ref(),
            ctx,
            backend,
        )?);
    }
    next.version += 1;
    *store = next;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::default_profiles;
    use crate::backend::{NullBackend, Recorder, ScriptedBackend};
    use crate::host::{run_game, GameSetup};
    use crate::rules::{GameConfig, ROLE_MULTISET};
    use crate::text::contains_seat_token;

    fn assignment() -> RoleAssignment {
        RoleAssignment::try_from(ROLE_MULTISET).unwrap()
    }

    fn finished_log() -> GameLog {
        run_game(
            &GameSetup::all_bots("g001", GameConfig::new(4)),
            &mut NullBackend,
        )
        .unwrap()
        .log
    }

    fn set(items: [&str; 3]) -> SuggestionSet {
        SuggestionSet {
            role: Role::Merlin,
            suggestions: items.iter().map(|s| s.to_string()).collect(),
            source_game: "g".to_string(),
        }
    }

    #[test]
    fn list_formats() {
        assert_eq!(parse_list("1. a\n2. b\n3. c"), ["a", "b", "c"]);
        assert_eq!(
            parse_list("Here:\n- a\n  more\n- b\n* c"),
            ["a more", "b", "c"]
        );
        assert_eq!(
            parse_list("first para\nline\n\nsecond\n\nthird"),
            ["first para line", "second", "third"]
        );
        assert_eq!(parse_list("1) x\n2) y"), ["x", "y"]);
    }

    #[test]
    fn scrub_rewrites_seats() {
        let a = assignment();
        let out = scrub_seats("Watch player 5 and Player6 closely; Player 9 too.", &a);
        assert_eq!(
            out,
            "Watch Morgana and Assassin closely; another player too."
        );
        assert!(!contains_seat_token(&out));
    }

    #[test]
    fn block_rendering() {
        let prompts = PromptSet::default();
        assert_eq!(experience_block(&prompts, None, None), "");
        assert_eq!(inject_experience("BASE", ""), "BASE");
        let s = set(["a", "b", "c"]);
        let only = experience_block(&prompts, Some(&s), None);
        assert!(only.contains("Suggestions from previous games: 1. a 2. b 3. c"));
        assert!(!only.contains("Strategies of other roles"));
        let both = experience_block(&prompts, Some(&s), Some("The strategy of Merlin is that"));
        let i = both.find("Suggestions from previous games").unwrap();
        let j = both
            .find("Strategies of other roles from previous games")
            .unwrap();
        assert!(i < j);
        assert!(inject_experience("BASE", &both).starts_with("BASE\n\nThere are experience"));
    }

    fn ctx<'a>(
        prompts: &'a PromptSet,
        model: &'a ModelSettings,
        profiles: &'a BTreeMap<Role, RoleProfile>,
    ) -> LearningContext<'a> {
        LearningContext {
            prompts,
            model,
            profiles,
            retry_budget: 2,
        }
    }

    #[test]
    fn suggestions_parsed_and_prompt_shape() {
        let (prompts, model, profiles) = (
            PromptSet::default(),
            ModelSettings::default(),
            default_profiles(),
        );
        let digest = GameDigest::from_log(&finished_log()).unwrap();
        let mut b = ScriptedBackend::new();
        b.push(
            Purpose::Agent,
            "1. Stay hidden.\n2. Watch player 3.\n3. Vote carefully.",
        );
        let mut rec = Recorder::new(&mut b, Vec::new());
        let out = extract_suggestions(
            &digest,
            Role::Merlin,
            "s",
            None,
            &ctx(&prompts, &model, &profiles),
            &mut rec,
        )
        .unwrap();
        let set = out.set.unwrap();
        assert!(!out.flagged);
        assert_eq!(set.suggestions.len(), 3);
        let role3 = digest
            .assignment
            .role_of(Seat::new(3).unwrap())
            .display_name();
        assert_eq!(set.suggestions[1], format!("Watch {role3}."));
        let prompt = &rec.sink()[0].request.messages[0].content;
        assert!(prompt.contains("Previous suggestions: None"));
    }

    #[test]
    fn bad_count_keeps_previous_and_flags() {
        let (prompts, model, profiles) = (
            PromptSet::default(),
            ModelSettings::default(),
            default_profiles(),
        );
        let digest = GameDigest::from_log(&finished_log()).unwrap();
        let mut b = ScriptedBackend::with_responder(|_, _| "1. only\n2. two".to_string());
        let prev = set(["x", "y", "z"]);
        let out = extract_suggestions(
            &digest,
            Role::Merlin,
            "s",
            Some(&prev),
            &ctx(&prompts, &model, &profiles),
            &mut b,
        )
        .unwrap();
        assert!(out.flagged);
        assert_eq!(out.set, Some(prev));
        assert_eq!(b.calls(Purpose::Agent), 3);
    }

    #[test]
    fn improve_prompt_and_empty_reply() {
        let (prompts, model, profiles) = (
            PromptSet::default(),
            ModelSettings::default(),
            default_profiles(),
        );
        let digest = GameDigest::from_log(&finished_log()).unwrap();
        let p = render_improve_prompt(
            &prompts,
            "Player 1",
            Role::Merlin,
            "cur",
            &set(["a", "b", "c"]),
        );
        assert!(p.contains("retaining the advantages of the original strategy"));
        let mut b = ScriptedBackend::with_responder(|_, _| "   ".to_string());
        let out = improve_strategy(
            &digest,
            Role::Merlin,
            "cur",
            &set(["a", "b", "c"]),
            &ctx(&prompts, &model, &profiles),
            &mut b,
        )
        .unwrap();
        assert_eq!(out, "cur");
    }

    #[test]
    fn other_roles_prompt_mentions_previous() {
        let digest = GameDigest::from_log(&finished_log()).unwrap();
        let p = render_other_roles_prompt(&PromptSet::default(), &digest, Role::Assassin, "");
        assert!(p.contains("Previous strategies of other roles: None"));
    }

    fn learn(switches: LearningSwitches) -> (StrategyStore, Vec<Stage>) {
        let (prompts, model, profiles) = (
            PromptSet::default(),
            ModelSettings::default(),
            default_profiles(),
        );
        let mut store = StrategyStore::from_profiles(&profiles);
        let scripted = ScriptedBackend::with_responder(|req, _| match req.stage {
            Stage::Suggestions => "1. Trust Player 2.\n2. Lead well.\n3. Be patient.".to_string(),
            Stage::StrategyRewrite => "Rewritten strategy naming Player 4.".to_string(),
            _ => "The strategy of Merlin is that Player 1 hides.".to_string(),
        });
        let mut rec = Recorder::new(scripted, Vec::new());
        learn_from_game(
            &mut store,
            &finished_log(),
            switches,
            &ctx(&prompts, &model, &profiles),
            &mut rec,
        )
        .unwrap();
        let stages = rec.sink().iter().map(|e| e.request.stage).collect();
        (store, stages)
    }

    #[test]
    fn full_learning_step() {
        let (store, stages) = learn(LearningSwitches::default());
        assert_eq!(store.version, 1);
        assert_eq!(
            stages.iter().filter(|s| **s == Stage::Suggestions).count(),
            5
        );
        assert_eq!(
            stages
                .iter()
                .filter(|s| **s == Stage::StrategyRewrite)
                .count(),
            5
        );
        assert_eq!(
            stages.iter().filter(|s| **s == Stage::OtherRoles).count(),
            5
        );
        for entry in store.roles.values() {
            assert_eq!(entry.version, 1);
            assert!(entry.suggestions.as_ref().unwrap().is_valid());
            assert!(!contains_seat_token(&entry.strategy));
        }
        for text in store.others.as_ref().unwrap().summaries.values() {
            assert!(!contains_seat_token(text));
        }
    }

    #[test]
    fn ablations_skip_their_calls() {
        let (store, stages) = learn(LearningSwitches {
            improve_strategy: false,
            other_roles: true,
        });
        assert!(!stages.contains(&Stage::StrategyRewrite));
        assert!(stages.contains(&Stage::Suggestions));
        assert_eq!(store.version, 1);
        assert_eq!(
            store.roles[&Role::Morgana].strategy,
            default_profiles()[&Role::Morgana].strategy
        );

        let (store, stages) = learn(LearningSwitches {
            improve_strategy: true,
            other_roles: false,
        });
        assert!(!stages.contains(&Stage::OtherRoles));
        assert!(store.others.is_none());
        let blocks = store.experience_blocks(&PromptSet::default());
        assert!(blocks
            .values()
            .all(|b| !b.contains("Strategies of other roles")));
    }

    #[test]
    fn unfinished_log_rejected() {
        let mut log = finished_log();
        log.events.pop();
        assert!(matches!(
            GameDigest::from_log(&log),
            Err(ExperienceError::IncompleteLog)
        ));
    }
}
