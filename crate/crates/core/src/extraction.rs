//! Turning free-form agent replies into structured choices.
//!
//! Each extraction runs in three layers: the extractor model (few-shot, zero
//! temperature), a keyword parser applied to the model's answer and then to
//! the original reply, and finally the fallback rules:
//!
//! * unclear team vote counts as Agree;
//! * unclear quest card counts as Fail;
//! * too many players are truncated in mention order;
//! * too few players make the host ask again, and after the retry budget the
//!   missing seats are drawn at random from the seeded game stream.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::backend::{Backend, BackendError, ChatMessage, ModelSettings, Purpose, Stage};
use crate::prompts::{PromptSet, TemplateId};
use crate::rules::{QuestCard, Seat, Vote};
use crate::text::{has_phrase, has_prefix_word, mentioned_seats, normalized};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Signal {
    RaiseHands,
    LowerHands,
    OpenEyes,
    CloseEyes,
}

impl Signal {
    pub fn describe(self) -> &'static str {
        match self {
            Signal::RaiseHands => "raise hands up",
            Signal::LowerHands => "put hands down",
            Signal::OpenEyes => "open eyes",
            Signal::CloseEyes => "close eyes",
        }
    }
}

/// What the host asked for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Expected {
    PlayerChoice {
        required: usize,
        candidates: Vec<Seat>,
    },
    TeamVote,
    QuestCard,
    NonVerbal,
    /// Assassin naming Merlin. Optional guesses may be declined.
    AssassinGuess {
        candidates: Vec<Seat>,
        mandatory: bool,
    },
    FreeSpeech,
}

impl Expected {
    /// Quest team pick; `required` must be 2 or 3.
    pub fn players(required: usize, candidates: Vec<Seat>) -> Option<Expected> {
        (matches!(required, 2 | 3) && candidates.len() >= required).then_some(
            Expected::PlayerChoice {
                required,
                candidates,
            },
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demonstration {
    pub question: String,
    pub answer: String,
    pub extracted: String,
}

/// Few-shot examples keyed by expected kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demonstrations {
    pub players: Vec<Demonstration>,
    pub team_vote: Vec<Demonstration>,
    pub quest_card: Vec<Demonstration>,
    pub nonverbal: Vec<Demonstration>,
    pub assassin_guess: Vec<Demonstration>,
}

impl Default for Demonstrations {
    fn default() -> Self {
        serde_json::from_str(include_str!("../data/demonstrations.json"))
            .expect("built-in demonstrations parse")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Players,
    TeamVote,
    QuestCard,
    NonVerbal,
    Guess,
}

impl Kind {
    fn target(self) -> &'static str {
        match self {
            Kind::Players => "the players the answer chooses, as a comma separated list like \"Player 1, Player 2\"",
            Kind::TeamVote => "whether the answer agrees or disagrees with the proposed team: agree or disagree",
            Kind::QuestCard => "whether the answer makes the quest succeed or fail: success or fail",
            Kind::NonVerbal => "the non-verbal signal: raise hands, put hands down, open eyes or close eyes",
            Kind::Guess => "the player the answer names as Merlin, like \"Player 3\", or none if it declines to guess",
        }
    }
}

// Keyword parsers. Each returns None when the text is unclear.

pub fn parse_players(text: &str, candidates: &[Seat]) -> Vec<Seat> {
    mentioned_seats(text)
        .into_iter()
        .filter(|s| candidates.contains(s))
        .collect()
}

pub fn parse_vote(text: &str) -> Option<Vote> {
    let n = normalized(text);
    const NO: [&str; 9] = [
        "disagree",
        "don't agree",
        "do not agree",
        "not agree",
        "reject",
        "oppose",
        "against",
        "veto",
        "vote no",
    ];
    const YES: [&str; 7] = [
        "agree",
        "approve",
        "support",
        "accept",
        "yes",
        "in favor",
        "in favour",
    ];
    if NO.iter().any(|p| has_phrase(&n, p)) {
        Some(Vote::Disagree)
    } else if YES.iter().any(|p| has_phrase(&n, p)) {
        Some(Vote::Agree)
    } else {
        None
    }
}

pub fn parse_quest_card(text: &str) -> Option<QuestCard> {
    let n = normalized(text);
    if has_prefix_word(&n, "fail") || has_prefix_word(&n, "sabotag") {
        Some(QuestCard::Fail)
    } else if has_prefix_word(&n, "succe") {
        Some(QuestCard::Success)
    } else {
        None
    }
}

pub fn parse_signal(text: &str) -> Option<Signal> {
    let n = normalized(text);
    let eyes = has_prefix_word(&n, "eye");
    if has_prefix_word(&n, "raise") {
        Some(Signal::RaiseHands)
    } else if has_prefix_word(&n, "lower")
        || has_phrase(&n, "hands down")
        || has_phrase(&n, "hand down")
    {
        Some(Signal::LowerHands)
    } else if eyes && has_prefix_word(&n, "open") {
        Some(Signal::OpenEyes)
    } else if eyes && has_prefix_word(&n, "clos") {
        Some(Signal::CloseEyes)
    } else {
        None
    }
}

pub fn parse_guess(text: &str, candidates: &[Seat]) -> Option<Seat> {
    parse_players(text, candidates).first().copied()
}

/// Keeps the first `required` seats of `picked`, then fills missing seats
/// at random from the unpicked candidates.
pub fn complete_selection<R: Rng + ?Sized>(
    mut picked: Vec<Seat>,
    required: usize,
    candidates: &[Seat],
    rng: &mut R,
) -> Vec<Seat> {
    picked.truncate(required);
    while picked.len() < required {
        let remaining: Vec<Seat> = candidates
            .iter()
            .copied()
            .filter(|s| !picked.contains(s))
            .collect();
        match remaining.choose(rng) {
            Some(s) => picked.push(*s),
            None => break,
        }
    }
    picked
}

/// Few-shot extractor backed by a model, with keyword fallbacks.
#[derive(Debug, Clone)]
pub struct Extractor {
    pub demonstrations: Demonstrations,
    pub prompts: PromptSet,
    pub model: ModelSettings,
    /// When false only the keyword layer runs and no backend call is made.
    pub use_model: bool,
}

impl Default for Extractor {
    fn default() -> Self {
        Extractor {
            demonstrations: Demonstrations::default(),
            prompts: PromptSet::default(),
            model: ModelSettings::default(),
            use_model: true,
        }
    }
}

impl Extractor {
    pub fn rules_only() -> Self {
        Extractor {
            use_model: false,
            ..Extractor::default()
        }
    }

    fn demos(&self, kind: Kind) -> &[Demonstration] {
        match kind {
            Kind::Players => &self.demonstrations.players,
            Kind::TeamVote => &self.demonstrations.team_vote,
            Kind::QuestCard => &self.demonstrations.quest_card,
            Kind::NonVerbal => &self.demonstrations.nonverbal,
            Kind::Guess => &self.demonstrations.assassin_guess,
        }
    }

    pub fn render_prompt(
        &self,
        kind_target: &str,
        demos: &[Demonstration],
        question: &str,
        answer: &str,
    ) -> String {
        let mut shots = String::new();
        for d in demos {
            shots.push_str(&format!(
                "Host's question: {}\nAnswer: {}\nExtracted: {}\n",
                d.question, d.answer, d.extracted
            ));
        }
        self.prompts
            .get(TemplateId::Extractor)
            .render(&[
                ("target", kind_target),
                ("demonstrations", shots.trim_end()),
                ("question", question),
                ("answer", answer),
            ])
            .unwrap_or_default()
    }

    /// Asks the extractor model. `Ok(None)` means the model layer was
    /// skipped or failed transiently and the caller should parse the reply itself.
    fn ask(
        &self,
        kind: Kind,
        question: &str,
        answer: &str,
        seat: Option<Seat>,
        backend: &mut dyn Backend,
    ) -> Result<Option<String>, BackendError> {
        if !self.use_model || answer.trim().is_empty() {
            return Ok(None);
        }
        let prompt = self.render_prompt(kind.target(), self.demos(kind), question, answer);
        let request = self.model.request(
            Purpose::Extractor,
            Stage::Extraction,
            seat,
            alloc::vec![ChatMessage::user(prompt)],
        );
        match backend.complete(&request) {
            Ok(reply) => Ok(Some(reply)),
            Err(e) if e.is_retryable() => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn layered<T>(
        &self,
        kind: Kind,
        question: &str,
        answer: &str,
        seat: Option<Seat>,
        backend: &mut dyn Backend,
        parse: impl Fn(&str) -> Option<T>,
    ) -> Result<Option<T>, BackendError> {
        if let Some(reply) = self.ask(kind, question, answer, seat, backend)? {
            if let Some(v) = parse(&reply) {
                return Ok(Some(v));
            }
        }
        Ok(parse(answer))
    }

    pub fn extract_team_vote(
        &self,
        answer: &str,
        question: &str,
        seat: Option<Seat>,
        backend: &mut dyn Backend,
    ) -> Result<Vote, BackendError> {
        let vote = self.layered(Kind::TeamVote, question, answer, seat, backend, parse_vote)?;
        Ok(vote.unwrap_or(Vote::Agree))
    }

    pub fn extract_quest_card(
        &self,
        answer: &str,
        question: &str,
        seat: Option<Seat>,
        backend: &mut dyn Backend,
    ) -> Result<QuestCard, BackendError> {
        let card = self.layered(
            Kind::QuestCard,
            question,
            answer,
            seat,
            backend,
            parse_quest_card,
        )?;
        Ok(card.unwrap_or(QuestCard::Fail))
    }

    pub fn extract_signal(
        &self,
        answer: &str,
        question: &str,
        seat: Option<Seat>,
        backend: &mut dyn Backend,
    ) -> Result<Option<Signal>, BackendError> {
        self.layered(
            Kind::NonVerbal,
            question,
            answer,
            seat,
            backend,
            parse_signal,
        )
    }

    /// `None` means the assassin declines. Mandatory guesses never decline.
    #[allow(clippy::too_many_arguments)]
    pub fn extract_guess<R: Rng + ?Sized>(
        &self,
        answer: &str,
        question: &str,
        candidates: &[Seat],
        mandatory: bool,
        seat: Option<Seat>,
        backend: &mut dyn Backend,
        rng: &mut R,
    ) -> Result<Option<Seat>, BackendError> {
        let guess = self.layered(Kind::Guess, question, answer, seat, backend, |t| {
            parse_guess(t, candidates)
        })?;
        Ok(match guess {
            Some(s) => Some(s),
            None if mandatory => candidates.choose(rng).copied(),
            None => None,
        })
    }

    fn players_once(
        &self,
        answer: &str,
        question: &str,
        candidates: &[Seat],
        seat: Option<Seat>,
        backend: &mut dyn Backend,
    ) -> Result<Vec<Seat>, BackendError> {
        if let Some(reply) = self.ask(Kind::Players, question, answer, seat, backend)? {
            let picked = parse_players(&reply, candidates);
            if !picked.is_empty() {
                return Ok(picked);
            }
        }
        Ok(parse_players(answer, candidates))
    }

    /// Always returns exactly `required` distinct candidates.
    ///
    /// `reask` is called with the attempt number when too few players were
    /// named; it returns the agent's new answer.
    #[allow(clippy::too_many_arguments)]
    pub fn extract_players<R: Rng + ?Sized>(
        &self,
        answer: &str,
        question: &str,
        required: usize,
        candidates: &[Seat],
        retry_budget: u8,
        seat: Option<Seat>,
        backend: &mut dyn Backend,
        rng: &mut R,
        reask: &mut dyn FnMut(u8, &mut dyn Backend) -> Result<String, BackendError>,
    ) -> Result<Vec<Seat>, BackendError> {
        let mut picked = self.players_once(answer, question, candidates, seat, backend)?;
        let mut attempt = 0;
        while picked.len() < required && attempt < retry_budget {
            attempt += 1;
            let again = reask(attempt, backend)?;
            picked = self.players_once(&again, question, candidates, seat, backend)?;
        }
        Ok(complete_selection(picked, required, candidates, rng))
    }

    /// Keyword-only reading of a discussion reply; never calls the backend.
    pub fn free_speech_action(&self, answer: &str) -> crate::agent::Action {
        use crate::agent::Action;
        let seats = mentioned_seats(answer);
        if !seats.is_empty() {
            return Action::ChoosePlayers(seats);
        }
        if let Some(signal) = parse_signal(answer) {
            return Action::NonVerbal(signal);
        }
        match parse_vote(answer) {
            Some(v) => Action::Vote(v),
            None => Action::Silent,
        }
    }
}
