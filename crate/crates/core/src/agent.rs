//! One agent's cognition for a single host question.
//!
//! Every turn runs analysis, planning, action selection and response
//! generation, in that order, each as one stateless completion call built
//! from the agent's memory view and profile. Analysis, planning and action
//! selection can each be switched off; a disabled step makes no call and
//! leaves its slot empty downstream.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{Backend, BackendError, ChatMessage, ModelSettings, Purpose, Stage};
use crate::extraction::{Expected, Extractor, Signal};
use crate::memory::{MemoryObject, MemoryStore, MemoryView};
use crate::prompts::{PromptSet, TemplateId};
use crate::rules::{QuestCard, RevealView, Role, Seat, Vote};

/// Marker for the previous-plan slot before any plan exists.
pub const EMPTY_PLAN: &str = "None";

const SENTINEL: &str = "<EOS>";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleProfile {
    pub role: Role,
    pub introduction: String,
    pub goal: String,
    pub strategy: String,
}

impl RoleProfile {
    pub fn is_valid(&self) -> bool {
        [&self.introduction, &self.goal, &self.strategy]
            .iter()
            .all(|t| !t.trim().is_empty())
    }

    /// Role name and introduction, as filled into the module prompts.
    pub fn role_information(&self) -> String {
        format!(
            "Role: {}\nRole Introduction: {}",
            self.role, self.introduction
        )
    }
}

#[derive(Deserialize)]
struct ProfileText {
    introduction: String,
    goal: String,
    strategy: String,
}

/// Parses a profiles document: an object keyed by role variant name.
pub fn parse_profiles(json: &str) -> Result<BTreeMap<Role, RoleProfile>, serde_json::Error> {
    let raw: BTreeMap<Role, ProfileText> = serde_json::from_str(json)?;
    Ok(raw
        .into_iter()
        .map(|(role, p)| {
            let profile = RoleProfile {
                role,
                introduction: p.introduction,
                goal: p.goal,
                strategy: p.strategy,
            };
            (role, profile)
        })
        .collect())
}

pub fn default_profiles() -> BTreeMap<Role, RoleProfile> {
    parse_profiles(include_str!("../data/profiles.json")).expect("built-in profiles parse")
}

pub fn compose_system_prompt(prompts: &PromptSet, profile: &RoleProfile, seat: Seat) -> String {
    let player = seat.name();
    prompts
        .get(TemplateId::System)
        .render(&[
            ("player", &player),
            ("role", profile.role.display_name()),
            ("introduction", &profile.introduction),
            ("goal", &profile.goal),
            ("strategy", &profile.strategy),
        ])
        .unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub author: Seat,
    pub round: u8,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub author: Seat,
    pub round: u8,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    ChoosePlayers(Vec<Seat>),
    Vote(Vote),
    QuestCard(QuestCard),
    NonVerbal(Signal),
    Silent,
}

impl Action {
    /// Natural-language form used for the "current actions" slot.
    pub fn describe(&self) -> String {
        match self {
            Action::ChoosePlayers(seats) => {
                let names: Vec<String> = seats.iter().map(|s| s.name()).collect();
                format!("choose players {}", names.join(", "))
            }
            Action::Vote(Vote::Agree) => "vote agree".to_string(),
            Action::Vote(Vote::Disagree) => "vote disagree".to_string(),
            Action::QuestCard(QuestCard::Success) => "make the mission succeed".to_string(),
            Action::QuestCard(QuestCard::Fail) => "make the mission fail".to_string(),
            Action::NonVerbal(s) => s.describe().to_string(),
            Action::Silent => "remain silent".to_string(),
        }
    }

    /// A short public statement revealing only what is public anyway.
    pub fn fallback_response(&self) -> String {
        match self {
            Action::ChoosePlayers(seats) => {
                let names: Vec<String> = seats.iter().map(|s| s.name()).collect();
                format!("I choose {}.", names.join(" and "))
            }
            Action::Vote(Vote::Agree) => "I agree with the proposed team.".to_string(),
            Action::Vote(Vote::Disagree) => "I disagree with the proposed team.".to_string(),
            Action::QuestCard(_) => "I have made my choice for the quest.".to_string(),
            Action::NonVerbal(_) | Action::Silent => "I have nothing to add.".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HostInstruction {
    pub text: String,
    pub expected: Expected,
    pub round: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AnalysisScope {
    #[default]
    AllPlayers,
    TeammatesOnly,
    AdversariesOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineSettings {
    pub analysis: bool,
    pub planning: bool,
    pub action: bool,
    pub scope: AnalysisScope,
    /// Extra attempts for transient backend failures.
    pub retry_budget: u8,
    /// Times the host repeats a question when too few players are named.
    pub reask_budget: u8,
    /// Character budget for one prompt; beyond it memory is compacted first.
    pub char_budget: usize,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        PipelineSettings {
            analysis: true,
            planning: true,
            action: true,
            scope: AnalysisScope::AllPlayers,
            retry_budget: 2,
            reask_budget: 2,
            char_budget: 48_000,
        }
    }
}

/// Shared services an agent needs during a turn.
pub struct TurnEnv<'a> {
    pub backend: &'a mut dyn Backend,
    pub extractor: &'a Extractor,
    pub prompts: &'a PromptSet,
    pub model: &'a ModelSettings,
    pub rng: &'a mut ChaCha8Rng,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TurnOutcome {
    pub action: Action,
    pub response: String,
    /// The turn gave up on the backend and fell back to defaults.
    pub degraded: bool,
}

fn strip_sentinel(text: &str) -> String {
    text.replace(SENTINEL, "").trim().to_string()
}

fn with_retries(
    backend: &mut dyn Backend,
    request: &crate::backend::CompletionRequest,
    retry_budget: u8,
) -> Result<String, BackendError> {
    let mut attempt = 0;
    loop {
        match backend.complete(request) {
            Ok(text) => return Ok(text),
            Err(e) if e.is_retryable() && attempt < retry_budget => attempt += 1,
            Err(e) => return Err(e),
        }
    }
}

/// Analysis prompt for the given summary text.
pub fn render_analysis(
    prompts: &PromptSet,
    seat: Seat,
    role: Role,
    summary: &str,
    focus: &str,
) -> String {
    let name = seat.name();
    let mut prompt = prompts
        .get(TemplateId::Analysis)
        .render(&[
            ("Name", &name),
            ("Role", role.display_name()),
            ("Summary", summary),
        ])
        .unwrap_or_default();
    if !focus.is_empty() {
        prompt.push('\n');
        prompt.push_str(focus);
    }
    prompt
}

pub fn render_planning(
    prompts: &PromptSet,
    profile: &RoleProfile,
    previous_plan: &str,
    summary: &str,
    analysis: &str,
) -> String {
    let previous = if previous_plan.is_empty() {
        EMPTY_PLAN
    } else {
        previous_plan
    };
    prompts
        .get(TemplateId::Planning)
        .render(&[
            ("Role Information", &profile.role_information()),
            ("Goal", &profile.goal),
            ("Strategy", &profile.strategy),
            ("Plan", previous),
            ("Summary", summary),
            ("Analysis", analysis),
        ])
        .unwrap_or_default()
}

pub fn render_action(
    prompts: &PromptSet,
    profile: &RoleProfile,
    plan: &str,
    summary: &str,
    analysis: &str,
    instruction: &str,
) -> String {
    prompts
        .get(TemplateId::Action)
        .render(&[
            ("Role Information", &profile.role_information()),
            ("Goal", &profile.goal),
            ("Strategy", &profile.strategy),
            ("Plan", plan),
            ("Summary", summary),
            ("Analysis", analysis),
            ("Instruction", instruction),
        ])
        .unwrap_or_default()
}

pub fn render_response(
    prompts: &PromptSet,
    profile: &RoleProfile,
    plan: &str,
    summary: &str,
    instruction: &str,
    actions: &str,
) -> String {
    prompts
        .get(TemplateId::Response)
        .render(&[
            ("Role Information", &profile.role_information()),
            ("Goal", &profile.goal),
            ("Strategy", &profile.strategy),
            ("Plan", plan),
            ("Summary", summary),
            ("Instruction", instruction),
            ("actions", actions),
        ])
        .unwrap_or_default()
}

pub fn render_summarization(prompts: &PromptSet, seat: Seat, conversations: &str) -> String {
    let name = seat.name();
    prompts
        .get(TemplateId::Summarization)
        .render(&[("Player i", &name), ("conversations", conversations)])
        .unwrap_or_default()
}

/// An agent driven by the full module pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineAgent {
    pub seat: Seat,
    pub profile: RoleProfile,
    pub reveal: RevealView,
    pub settings: PipelineSettings,
    pub system_prompt: String,
    pub memory: MemoryStore,
    pub analysis: Option<AnalysisReport>,
    pub plan: Option<Plan>,
}

impl PipelineAgent {
    pub fn new(
        seat: Seat,
        profile: RoleProfile,
        reveal: RevealView,
        settings: PipelineSettings,
        system_prompt: String,
    ) -> Self {
        PipelineAgent {
            seat,
            profile,
            reveal,
            settings,
            system_prompt,
            memory: MemoryStore::new(seat),
            analysis: None,
            plan: None,
        }
    }

    pub fn observe(&mut self, object: MemoryObject) -> Result<(), crate::memory::MemoryError> {
        self.memory.record(object)
    }

    fn agent_call(
        &self,
        env: &mut TurnEnv<'_>,
        stage: Stage,
        prompt: String,
    ) -> Result<String, BackendError> {
        let request = env.model.request(
            Purpose::Agent,
            stage,
            Some(self.seat),
            vec![
                ChatMessage::system(self.system_prompt.clone()),
                ChatMessage::user(prompt),
            ],
        );
        with_retries(env.backend, &request, self.settings.retry_budget).map(|t| strip_sentinel(&t))
    }

    /// Sentence appended to the analysis prompt when its scope is restricted.
    pub fn analysis_focus(&self) -> String {
        let own_side = self.profile.role.side();
        let (teammates, adversaries): (Vec<Seat>, Vec<Seat>) =
            match (self.reveal.known_partner, self.reveal.known_evil_pair) {
                (Some((partner, _)), _) => (
                    vec![partner],
                    Seat::all()
                        .filter(|s| *s != partner && *s != self.seat)
                        .collect(),
                ),
                (None, Some(evil)) => (
                    Seat::all()
                        .filter(|s| !evil.contains(s) && *s != self.seat)
                        .collect(),
                    evil.to_vec(),
                ),
                _ => (Vec::new(), Vec::new()),
            };
        let names = |seats: &[Seat]| {
            seats
                .iter()
                .map(|s| s.name())
                .collect::<Vec<_>>()
                .join(", ")
        };
        let side = match own_side {
            crate::rules::Side::Good => "good",
            crate::rules::Side::Evil => "evil",
        };
        match self.settings.scope {
            AnalysisScope::AllPlayers => String::new(),
            AnalysisScope::TeammatesOnly if teammates.is_empty() => {
                format!("Only analyze the players you believe are on the {side} side with you.")
            }
            AnalysisScope::TeammatesOnly => {
                format!("Only analyze your teammates: {}.", names(&teammates))
            }
            AnalysisScope::AdversariesOnly if adversaries.is_empty() => {
                format!("Only analyze the players you believe are against the {side} side.")
            }
            AnalysisScope::AdversariesOnly => {
                format!("Only analyze your adversaries: {}.", names(&adversaries))
            }
        }
    }

    pub fn analyze(
        &self,
        view: &MemoryView<'_>,
        env: &mut TurnEnv<'_>,
    ) -> Result<AnalysisReport, BackendError> {
        let round = self.memory.round();
        if !self.settings.analysis {
            return Ok(AnalysisReport {
                author: self.seat,
                round,
                content: String::new(),
            });
        }
        let prompt = render_analysis(
            env.prompts,
            self.seat,
            self.profile.role,
            &view.render(),
            &self.analysis_focus(),
        );
        let content = self.agent_call(env, Stage::Analysis, prompt)?;
        Ok(AnalysisReport {
            author: self.seat,
            round,
            content,
        })
    }

    pub fn plan(
        &self,
        view: &MemoryView<'_>,
        analysis: &AnalysisReport,
        previous: Option<&Plan>,
        env: &mut TurnEnv<'_>,
    ) -> Result<Plan, BackendError> {
        let round = self.memory.round();
        if !self.settings.planning {
            return Ok(Plan {
                author: self.seat,
                round,
                content: String::new(),
            });
        }
        let previous = previous.map(|p| p.content.as_str()).unwrap_or_default();
        let prompt = render_planning(
            env.prompts,
            &self.profile,
            previous,
            &view.render(),
            &analysis.content,
        );
        let content = self.agent_call(env, Stage::Planning, prompt)?;
        Ok(Plan {
            author: self.seat,
            round,
            content,
        })
    }

    /// Structured action for `instruction`, read out of `text` by the extractor.
    pub fn extract_action(
        &self,
        text: &str,
        instruction: &HostInstruction,
        env: &mut TurnEnv<'_>,
        reask: &mut dyn FnMut(u8, &mut dyn Backend) -> Result<String, BackendError>,
    ) -> Result<Action, BackendError> {
        let seat = Some(self.seat);
        let question = instruction.text.as_str();
        Ok(match &instruction.expected {
            Expected::PlayerChoice {
                required,
                candidates,
            } => Action::ChoosePlayers(env.extractor.extract_players(
                text,
                question,
                *required,
                candidates,
                self.settings.reask_budget,
                seat,
                env.backend,
                env.rng,
                reask,
            )?),
            Expected::TeamVote => {
                Action::Vote(
                    env.extractor
                        .extract_team_vote(text, question, seat, env.backend)?,
                )
            }
            Expected::QuestCard => Action::QuestCard(env.extractor.extract_quest_card(
                text,
                question,
                seat,
                env.backend,
            )?),
            Expected::NonVerbal => {
                match env
                    .extractor
                    .extract_signal(text, question, seat, env.backend)?
                {
                    Some(signal) => Action::NonVerbal(signal),
                    None => Action::Silent,
                }
            }
            Expected::AssassinGuess {
                candidates,
                mandatory,
            } => {
                match env.extractor.extract_guess(
                    text,
                    question,
                    candidates,
                    *mandatory,
                    seat,
                    env.backend,
                    env.rng,
                )? {
                    Some(guess) => Action::ChoosePlayers(vec![guess]),
                    None => Action::Silent,
                }
            }
            Expected::FreeSpeech => env.extractor.free_speech_action(text),
        })
    }

    pub fn decide_action(
        &self,
        view: &MemoryView<'_>,
        analysis: &AnalysisReport,
        plan: &Plan,
        instruction: &HostInstruction,
        env: &mut TurnEnv<'_>,
    ) -> Result<Action, BackendError> {
        let summary = view.render();
        let prompt = render_action(
            env.prompts,
            &self.profile,
            &plan.content,
            &summary,
            &analysis.content,
            &instruction.text,
        );
        let text = self.agent_call(env, Stage::Action, prompt.clone())?;
        let system = self.system_prompt.clone();
        let model = env.model.clone();
        let seat = self.seat;
        let retry_budget = self.settings.retry_budget;
        let mut reask = move |attempt: u8, backend: &mut dyn Backend| {
            let required = match &instruction.expected {
                Expected::PlayerChoice { required, .. } => *required,
                _ => 1,
            };
            let repeated = format!(
                "{prompt}\nHost: You named too few players (attempt {attempt}). Choose exactly {required} players by name."
            );
            let request = model.request(
                Purpose::Agent,
                Stage::Reask,
                Some(seat),
                vec![
                    ChatMessage::system(system.clone()),
                    ChatMessage::user(repeated),
                ],
            );
            with_retries(backend, &request, retry_budget).map(|t| strip_sentinel(&t))
        };
        self.extract_action(&text, instruction, env, &mut reask)
    }

    pub fn respond(
        &self,
        view: &MemoryView<'_>,
        plan: &Plan,
        instruction: &HostInstruction,
        action: Option<&Action>,
        env: &mut TurnEnv<'_>,
    ) -> Result<String, BackendError> {
        let actions = action.map(Action::describe).unwrap_or_default();
        let prompt = render_response(
            env.prompts,
            &self.profile,
            &plan.content,
            &view.render(),
            &instruction.text,
            &actions,
        );
        self.agent_call(env, Stage::Response, prompt)
    }

    /// Summarizes the memory when the next prompt would exceed the budget.
    fn enforce_budget(&mut self, env: &mut TurnEnv<'_>) -> Result<(), BackendError> {
        let estimate = self.system_prompt.chars().count()
            + self.memory.visible_view().render().chars().count() * 2;
        if estimate + 2_000 <= self.settings.char_budget {
            return Ok(());
        }
        let seat = self.seat;
        let prompts = env.prompts;
        let model = env.model;
        let retry_budget = self.settings.retry_budget;
        let backend = &mut *env.backend;
        self.memory.compact(|input| {
            let request = model.request(
                Purpose::Summarizer,
                Stage::EmergencySummary,
                Some(seat),
                vec![ChatMessage::user(render_summarization(
                    prompts, seat, input,
                ))],
            );
            with_retries(backend, &request, retry_budget)
        })
    }

    fn run_turn(
        &mut self,
        instruction: &HostInstruction,
        env: &mut TurnEnv<'_>,
    ) -> Result<TurnOutcome, BackendError> {
        self.enforce_budget(env)?;
        let view = self.memory.visible_view();
        let analysis = self.analyze(&view, env)?;
        let plan = self.plan(&view, &analysis, self.plan.as_ref(), env)?;
        let (action, response) = if self.settings.action {
            let action = self.decide_action(&view, &analysis, &plan, instruction, env)?;
            let response = self.respond(&view, &plan, instruction, Some(&action), env)?;
            (action, response)
        } else {
            // without an action step the structured choice is read off the response
            let response = self.respond(&view, &plan, instruction, None, env)?;
            let action =
                self.extract_action(&response, instruction, env, &mut |_, _| Ok(String::new()))?;
            (action, response)
        };
        if self.settings.analysis {
            self.analysis = Some(analysis);
        }
        if self.settings.planning {
            self.plan = Some(plan);
        }
        Ok(TurnOutcome {
            action,
            response,
            degraded: false,
        })
    }

    /// One full turn. Transient backend failures that outlast the retry
    /// budget degrade the turn to default choices; any other backend error
    /// is returned.
    pub fn take_turn(
        &mut self,
        instruction: &HostInstruction,
        env: &mut TurnEnv<'_>,
    ) -> Result<TurnOutcome, BackendError> {
        match self.run_turn(instruction, env) {
            Ok(outcome) => Ok(outcome),
            Err(e) if e.is_retryable() => {
                let action = self.extract_action(
                    "",
                    instruction,
                    &mut TurnEnv {
                        backend: &mut crate::backend::NullBackend,
                        extractor: env.extractor,
                        prompts: env.prompts,
                        model: env.model,
                        rng: env.rng,
                    },
                    &mut |_, _| Ok(String::new()),
                )?;
                let response = action.fallback_response();
                Ok(TurnOutcome {
                    action,
                    response,
                    degraded: true,
                })
            }
            Err(e) => Err(e),
        }
    }

    /// Closes the round in memory, returning the new summary.
    pub fn end_round(&mut self, env: &mut TurnEnv<'_>) -> Result<String, BackendError> {
        let seat = self.seat;
        let prompts = env.prompts;
        let model = env.model;
        let retry_budget = self.settings.retry_budget;
        let backend = &mut *env.backend;
        let rolled = self.memory.roll_round(|input| {
            let request = model.request(
                Purpose::Summarizer,
                Stage::Summary,
                Some(seat),
                vec![ChatMessage::user(render_summarization(
                    prompts, seat, input,
                ))],
            );
            with_retries(backend, &request, retry_budget).map(|t| strip_sentinel(&t))
        });
        match rolled {
            Ok(()) => {}
            Err(e) if e.is_retryable() => {
                // keep the verbatim round rather than stalling the game
                self.memory
                    .roll_round(|input| Ok::<_, BackendError>(input.to_string()))?;
            }
            Err(e) => return Err(e),
        }
        Ok(self.memory.rolled_summary().to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::{Exchange, Recorder, ScriptedBackend};
    use crate::rules::{reveal_info, RoleAssignment, ROLE_MULTISET};
    use rand::SeedableRng;

    fn seat(i: u8) -> Seat {
        Seat::new(i).unwrap()
    }

    fn morgana() -> RoleProfile {
        default_profiles()[&Role::Morgana].clone()
    }

    fn agent(role: Role, settings: PipelineSettings) -> PipelineAgent {
        let assignment = RoleAssignment::try_from(ROLE_MULTISET).unwrap();
        let s = assignment.seat_of(role);
        let profile = default_profiles()[&role].clone();
        let system = compose_system_prompt(&PromptSet::default(), &profile, s);
        PipelineAgent::new(s, profile, reveal_info(&assignment, s), settings, system)
    }

    struct Fixture {
        extractor: Extractor,
        prompts: PromptSet,
        model: ModelSettings,
        rng: ChaCha8Rng,
    }

    impl Fixture {
        fn new() -> Self {
            Fixture {
                extractor: Extractor::rules_only(),
                prompts: PromptSet::default(),
                model: ModelSettings::default(),
                rng: ChaCha8Rng::seed_from_u64(0),
            }
        }

        fn env<'a>(&'a mut self, backend: &'a mut dyn Backend) -> TurnEnv<'a> {
            TurnEnv {
                backend,
                extractor: &self.extractor,
                prompts: &self.prompts,
                model: &self.model,
                rng: &mut self.rng,
            }
        }
    }

    fn vote_instruction() -> HostInstruction {
        HostInstruction {
            text: "Please vote on the quest team".to_string(),
            expected: Expected::TeamVote,
            round: 1,
        }
    }

    #[test]
    fn default_profiles_complete() {
        let p = default_profiles();
        assert_eq!(p.len(), 5);
        assert!(p.values().all(RoleProfile::is_valid));
    }

    #[test]
    fn system_prompt_contents() {
        let prompts = PromptSet::default();
        let m = compose_system_prompt(&prompts, &morgana(), seat(5));
        assert!(m.contains("pretend to be a loyal servant"));
        assert!(m.contains("Always end your response with"));
        assert!(m.trim_end().ends_with("‘<EOS>’."));
        assert!(m.contains("You are Player 5, the Morgana."));

        let other = compose_system_prompt(&prompts, &morgana(), seat(2));
        let diff: Vec<_> = m
            .lines()
            .zip(other.lines())
            .filter(|(a, b)| a != b)
            .collect();
        assert_eq!(diff.len(), 1);
        assert_eq!(m.replace("Player 5", "Player 2"), other);
    }

    #[test]
    fn analysis_prompt_embeds_summary() {
        let p = render_analysis(&PromptSet::default(), seat(1), Role::Merlin, "S", "");
        assert!(p.contains("The summary is S."));
        assert!(p.contains("Your name is Player 1 your role is Merlin."));
    }

    #[test]
    fn first_plan_uses_empty_marker_and_goal() {
        let profile = morgana();
        let p = render_planning(&PromptSet::default(), &profile, "", "", "");
        assert!(p.contains("Your previous plan: None\n"));
        assert!(p.contains(&format!("Goal: {}", profile.goal)));
    }

    #[test]
    fn response_prompt_limits_words() {
        let p = render_response(
            &PromptSet::default(),
            &morgana(),
            "",
            "",
            "vote",
            "vote agree",
        );
        assert!(p.contains("no more than 100 words"));
        assert!(p.ends_with("current actions: vote agree"));
    }

    #[test]
    fn scripted_pipeline_passes_text_through() {
        let mut fx = Fixture::new();
        let mut backend = ScriptedBackend::new();
        backend.extend(
            Purpose::Agent,
            [
                "ANALYSIS-OK",
                "PLAN-1",
                "I agree <EOS>",
                "I agree with this team.",
            ],
        );
        let mut a = agent(Role::Percival, PipelineSettings::default());
        let out = a
            .take_turn(&vote_instruction(), &mut fx.env(&mut backend))
            .unwrap();
        assert_eq!(out.action, Action::Vote(Vote::Agree));
        assert_eq!(out.response, "I agree with this team.");
        assert_eq!(a.analysis.as_ref().unwrap().content, "ANALYSIS-OK");
        assert_eq!(a.plan.as_ref().unwrap().content, "PLAN-1");
    }

    fn stages(log: &[Exchange]) -> Vec<Stage> {
        log.iter().map(|e| e.request.stage).collect()
    }

    #[test]
    fn call_order_and_ablation() {
        let mut fx = Fixture::new();
        let scripted = ScriptedBackend::with_responder(|_, _| "I agree".to_string());
        let mut rec = Recorder::new(scripted, Vec::new());
        let mut a = agent(Role::Merlin, PipelineSettings::default());
        a.take_turn(&vote_instruction(), &mut fx.env(&mut rec))
            .unwrap();
        assert_eq!(
            stages(rec.sink()),
            [
                Stage::Analysis,
                Stage::Planning,
                Stage::Action,
                Stage::Response
            ]
        );

        let mut rec = Recorder::new(
            ScriptedBackend::with_responder(|_, _| "I agree".to_string()),
            Vec::new(),
        );
        let settings = PipelineSettings {
            analysis: false,
            planning: false,
            ..PipelineSettings::default()
        };
        let mut a = agent(Role::Merlin, settings);
        a.take_turn(&vote_instruction(), &mut fx.env(&mut rec))
            .unwrap();
        assert_eq!(stages(rec.sink()), [Stage::Action, Stage::Response]);
        let action_prompt = &rec.sink()[0].request.messages[1].content;
        assert!(action_prompt.contains("Analysis about other players: .\n"));
        assert!(action_prompt.contains("Your current plan: \n"));
    }

    #[test]
    fn without_action_step_reads_response() {
        let mut fx = Fixture::new();
        let mut backend = ScriptedBackend::new();
        backend.extend(
            Purpose::Agent,
            ["a", "p", "I disagree, this team looks bad."],
        );
        let settings = PipelineSettings {
            action: false,
            ..PipelineSettings::default()
        };
        let mut a = agent(Role::Merlin, settings);
        let out = a
            .take_turn(&vote_instruction(), &mut fx.env(&mut backend))
            .unwrap();
        assert_eq!(out.action, Action::Vote(Vote::Disagree));
        assert_eq!(backend.calls(Purpose::Agent), 3);
    }

    #[test]
    fn overlong_pick_truncated() {
        let mut fx = Fixture::new();
        let mut backend = ScriptedBackend::new();
        backend.extend(
            Purpose::Agent,
            [
                "a",
                "p",
                "Player 1, Player 2, Player 3, Player 4",
                "I pick a strong team.",
            ],
        );
        let mut a = agent(Role::Merlin, PipelineSettings::default());
        let instruction = HostInstruction {
            text: "Choose 3 players".to_string(),
            expected: Expected::players(3, Seat::all().collect()).unwrap(),
            round: 1,
        };
        let out = a
            .take_turn(&instruction, &mut fx.env(&mut backend))
            .unwrap();
        assert_eq!(
            out.action,
            Action::ChoosePlayers(vec![seat(1), seat(2), seat(3)])
        );
    }

    #[test]
    fn transient_failure_degrades_turn() {
        let mut fx = Fixture::new();
        let mut backend = ScriptedBackend::with_responder(|_, _| String::new());
        struct Flaky<'a>(&'a mut ScriptedBackend);
        impl Backend for Flaky<'_> {
            fn complete(
                &mut self,
                r: &crate::backend::CompletionRequest,
            ) -> Result<String, BackendError> {
                let _ = self.0.complete(r);
                Err(BackendError::Transport {
                    attempts: 1,
                    message: "down".to_string(),
                })
            }
            fn kind(&self) -> crate::backend::BackendKind {
                crate::backend::BackendKind::LiveHttp
            }
        }
        let mut a = agent(Role::Assassin, PipelineSettings::default());
        let quest = HostInstruction {
            text: "Succeed or fail?".to_string(),
            expected: Expected::QuestCard,
            round: 1,
        };
        let mut flaky = Flaky(&mut backend);
        let out = a.take_turn(&quest, &mut fx.env(&mut flaky)).unwrap();
        assert!(out.degraded);
        assert_eq!(out.action, Action::QuestCard(QuestCard::Fail));
        assert_eq!(out.response, "I have made my choice for the quest.");
        // one call plus two retries for the analysis step, then give up
        assert_eq!(backend.calls(Purpose::Agent), 3);
    }

    #[test]
    fn hard_failure_propagates() {
        let mut fx = Fixture::new();
        let mut backend = ScriptedBackend::new();
        let mut a = agent(Role::Merlin, PipelineSettings::default());
        let err = a
            .take_turn(&vote_instruction(), &mut fx.env(&mut backend))
            .unwrap_err();
        assert!(matches!(err, BackendError::ScriptExhausted { .. }));
    }

    #[test]
    fn end_round_summarizes_once() {
        let mut fx = Fixture::new();
        let mut backend = ScriptedBackend::new();
        backend.push(Purpose::Summarizer, "R1-SUMMARY");
        let mut a = agent(Role::Merlin, PipelineSettings::default());
        a.observe(MemoryObject::public(
            crate::memory::Speaker::Host,
            "hello",
            1,
        ))
        .unwrap();
        let summary = a.end_round(&mut fx.env(&mut backend)).unwrap();
        assert_eq!(summary, "R1-SUMMARY");
        assert_eq!(a.memory.round(), 2);
        assert_eq!(backend.calls(Purpose::Summarizer), 1);
    }

    #[test]
    fn scoped_analysis_focus() {
        let mut a = agent(Role::Morgana, PipelineSettings::default());
        assert_eq!(a.analysis_focus(), "");
        a.settings.scope = AnalysisScope::TeammatesOnly;
        assert_eq!(a.analysis_focus(), "Only analyze your teammates: Player 6.");
        a.settings.scope = AnalysisScope::AdversariesOnly;
        assert_eq!(
            a.analysis_focus(),
            "Only analyze your adversaries: Player 1, Player 2, Player 3, Player 4."
        );
        let mut servant = agent(Role::LoyalServant, PipelineSettings::default());
        servant.settings.scope = AnalysisScope::TeammatesOnly;
        assert!(servant.analysis_focus().contains("good side"));
    }
}
