//! Append-only game record.
//!
//! Event 0 is always a [`EventKind::GameStarted`] header carrying the full
//! setup, so a log is enough to re-run its game. Events carry no wall-clock
//! data; the same game always serializes to the same bytes.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::Action;
use crate::extraction::Expected;
use crate::host::GameSetup;
use crate::rules::{
    assign_roles, AssassinationOutcome, GameState, GuessContext, Move, Phase, QuestCard,
    QuestOutcome, RoleAssignment, Seat, Side, TransitionError, Vote, VoteOutcome,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Audience {
    All,
    Seat(Seat),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WinReason {
    ThreeQuestsFailed,
    MerlinAssassinated,
    /// Three quests succeeded and the final guess missed.
    MerlinSurvived,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameHeader {
    pub game_id: String,
    pub assignment: RoleAssignment,
    pub setup: GameSetup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type")]
#[allow(clippy::large_enum_variant)]
pub enum EventKind {
    GameStarted(GameHeader),
    HostInstruction {
        audience: Audience,
        text: String,
        expected: Option<Expected>,
    },
    PublicResponse {
        seat: Seat,
        text: String,
    },
    /// A reply only the host sees, such as talk about a quest card.
    PrivateResponse {
        seat: Seat,
        text: String,
    },
    PrivateAction {
        seat: Seat,
        action: Action,
    },
    TeamProposal {
        leader: Seat,
        team: Vec<Seat>,
        attempt: u8,
        forced: bool,
    },
    TeamVoteBallot {
        leader: Seat,
        attempt: u8,
        votes: Vec<(Seat, Vote)>,
        outcome: VoteOutcome,
    },
    QuestCardPlay {
        seat: Seat,
        card: QuestCard,
    },
    QuestResult {
        team: Vec<Seat>,
        outcome: QuestOutcome,
        fail_count: u8,
    },
    /// `guess` is `None` when an optional guess was declined.
    AssassinGuess {
        assassin: Seat,
        guess: Option<Seat>,
        context: GuessContext,
        outcome: Option<AssassinationOutcome>,
    },
    MemorySnapshot {
        owner: Seat,
        /// Last round folded into `summary`.
        closed_round: u8,
        summary: String,
    },
    GameOver {
        winner: Side,
        reason: WinReason,
    },
    Aborted {
        reason: String,
    },
}

impl EventKind {
    pub fn is_public(&self) -> bool {
        match self {
            EventKind::HostInstruction { audience, .. } => *audience == Audience::All,
            EventKind::PublicResponse { .. }
            | EventKind::TeamProposal { .. }
            | EventKind::TeamVoteBallot { .. }
            | EventKind::QuestResult { .. }
            | EventKind::GameOver { .. }
            | EventKind::Aborted { .. } => true,
            // declined guesses stay hidden; made ones are announced
            EventKind::AssassinGuess { guess, .. } => guess.is_some(),
            EventKind::GameStarted(_)
            | EventKind::PrivateResponse { .. }
            | EventKind::PrivateAction { .. }
            | EventKind::QuestCardPlay { .. }
            | EventKind::MemorySnapshot { .. } => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameEvent {
    pub seq: u32,
    pub round: u8,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("event {found} out of sequence, expected {expected}")]
    Sequence { expected: u32, found: u32 },
    #[error("log does not start with a game header")]
    MissingHeader,
    #[error("event {seq}: {source}")]
    Illegal { seq: u32, source: TransitionError },
    #[error("event {seq}: {what}")]
    Mismatch { seq: u32, what: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GameLog {
    pub events: Vec<GameEvent>,
}

impl GameLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, round: u8, kind: EventKind) {
        let seq = self.events.len() as u32;
        self.events.push(GameEvent { seq, round, kind });
    }

    pub fn header(&self) -> Option<&GameHeader> {
        match self.events.first().map(|e| &e.kind) {
            Some(EventKind::GameStarted(h)) => Some(h),
            _ => None,
        }
    }

    pub fn winner(&self) -> Option<Side> {
        self.events.iter().rev().find_map(|e| match e.kind {
            EventKind::GameOver { winner, .. } => Some(winner),
            _ => None,
        })
    }

    pub fn is_complete(&self) -> bool {
        self.winner().is_some()
    }

    /// Events every player could have witnessed.
    pub fn public_projection(&self) -> Vec<&GameEvent> {
        self.events.iter().filter(|e| e.kind.is_public()).collect()
    }

    /// One JSON object per line, each line newline-terminated.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).unwrap_or_default());
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<GameLog, LogError> {
        let mut events = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let event: GameEvent = serde_json::from_str(line).map_err(|e| LogError::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
            events.push(event);
        }
        Ok(GameLog { events })
    }

    /// Re-drives every move through the rules engine and checks each
    /// recorded outcome against what the engine computes. An aborted log is
    /// valid up to its abort marker.
    pub fn validate(&self) -> Result<GameState, LogError> {
        let header = self.header().ok_or(LogError::MissingHeader)?;
        let config = header.setup.config.clone();
        if assign_roles(config.seed) != header.assignment {
            return Err(LogError::Mismatch {
                seq: 0,
                what: "role assignment does not follow from the seed".to_string(),
            });
        }
        let mut state =
            GameState::with_assignment(config, header.assignment.clone()).map_err(|e| {
                LogError::Illegal {
                    seq: 0,
                    source: e.into(),
                }
            })?;
        let mut cards: Vec<(Seat, QuestCard)> = Vec::new();
        for (i, event) in self.events.iter().enumerate() {
            let seq = event.seq;
            if seq as usize != i {
                return Err(LogError::Sequence {
                    expected: i as u32,
                    found: seq,
                });
            }
            if i > 0 && matches!(event.kind, EventKind::GameStarted(_)) {
                return Err(mismatch(seq, "second game header"));
            }
            let step = |state: &GameState, mv: Move| {
                state
                    .advance(&mv)
                    .map_err(|source| LogError::Illegal { seq, source })
            };
            match &event.kind {
                EventKind::TeamProposal {
                    leader,
                    team,
                    attempt,
                    forced,
                } => {
                    if state.phase == Phase::Reveal {
                        state = step(&state, Move::EndReveal)?;
                    }
                    if *leader != state.leader
                        || *attempt != state.proposal_attempt
                        || *forced != state.is_forced_proposal()
                    {
                        return Err(mismatch(
                            seq,
                            "proposal leader or attempt disagrees with the rules",
                        ));
                    }
                    state = step(&state, Move::Propose { team: team.clone() })?;
                }
                EventKind::TeamVoteBallot { votes, outcome, .. } => {
                    let next = step(
                        &state,
                        Move::CastVotes {
                            votes: votes.clone(),
                        },
                    )?;
                    let passed = next.phase == Phase::Quest;
                    if passed != (*outcome == VoteOutcome::Pass) {
                        return Err(mismatch(seq, "ballot outcome disagrees with the tally"));
                    }
                    state = next;
                }
                EventKind::QuestCardPlay { seat, card } => cards.push((*seat, *card)),
                EventKind::QuestResult {
                    outcome,
                    fail_count,
                    ..
                } => {
                    let played = core::mem::take(&mut cards);
                    let fails = played.iter().filter(|(_, c)| *c == QuestCard::Fail).count();
                    state = step(&state, Move::PlayCards { cards: played })?;
                    let recorded = state.quest_history.last().map(|q| q.outcome);
                    if recorded != Some(*outcome) || fails != usize::from(*fail_count) {
                        return Err(mismatch(seq, "quest result disagrees with the cards"));
                    }
                }
                EventKind::AssassinGuess { guess, outcome, .. } => {
                    state = match guess {
                        Some(g) => {
                            let next = step(&state, Move::Assassinate { guess: *g })?;
                            if next.guesses.last().map(|r| r.outcome) != *outcome {
                                return Err(mismatch(
                                    seq,
                                    "guess outcome disagrees with the roles",
                                ));
                            }
                            next
                        }
                        None => step(&state, Move::PassGuess)?,
                    };
                }
                EventKind::GameOver { winner, .. } => {
                    if state.winner != Some(*winner) {
                        return Err(mismatch(seq, "winner disagrees with the final state"));
                    }
                }
                EventKind::Aborted { .. } => return Ok(state),
                _ => {}
            }
        }
        Ok(state)
    }
}

fn mismatch(seq: u32, what: &str) -> LogError {
    LogError::Mismatch {
        seq,
        what: what.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::NullBackend;
    use crate::host::{run_game, GameSetup};
    use crate::rules::GameConfig;

    fn bot_log(seed: u64) -> GameLog {
        let setup = GameSetup::all_bots("g000", GameConfig::new(seed));
        run_game(&setup, &mut NullBackend).unwrap().log
    }

    #[test]
    fn jsonl_roundtrip() {
        let log = bot_log(3);
        let text = log.to_jsonl();
        assert_eq!(text.lines().count(), log.events.len());
        let back = GameLog::from_jsonl(&text).unwrap();
        assert_eq!(back, log);
        assert_eq!(back.to_jsonl(), text);
    }

    #[test]
    fn pipeline_game_roundtrips() {
        use crate::backend::{Purpose, ScriptedBackend};
        let mut backend = ScriptedBackend::with_responder(|r, _| match r.purpose {
            Purpose::Agent => "I choose Player 1 and Player 2. I agree.".into(),
            _ => "summary".into(),
        });
        let log = run_game(&GameSetup::new("g", GameConfig::new(2)), &mut backend)
            .unwrap()
            .log;
        assert!(log
            .events
            .iter()
            .any(|e| matches!(e.kind, EventKind::MemorySnapshot { .. })));
        let text = log.to_jsonl();
        assert_eq!(GameLog::from_jsonl(&text).unwrap().to_jsonl(), text);
        let mut aborted = log.clone();
        aborted.push(1, EventKind::Aborted { reason: "x".into() });
        assert_eq!(GameLog::from_jsonl(&aborted.to_jsonl()).unwrap(), aborted);
    }

    #[test]
    fn bot_game_validates() {
        for seed in 0..20 {
            let log = bot_log(seed);
            let state = log.validate().unwrap();
            assert_eq!(state.winner, log.winner());
            assert!(log.is_complete());
        }
    }

    #[test]
    fn tampered_ballot_rejected() {
        let mut log = bot_log(5);
        let ballot = log
            .events
            .iter_mut()
            .find_map(|e| match &mut e.kind {
                EventKind::TeamVoteBallot { outcome, .. } => Some(outcome),
                _ => None,
            })
            .unwrap();
        *ballot = match *ballot {
            VoteOutcome::Pass => VoteOutcome::Reject,
            VoteOutcome::Reject => VoteOutcome::Pass,
        };
        assert!(matches!(log.validate(), Err(LogError::Mismatch { .. })));
    }

    #[test]
    fn projection_hides_private_events() {
        let log = bot_log(7);
        let public = log.public_projection();
        assert!(public.len() < log.events.len());
        assert!(public.iter().all(|e| !matches!(
            e.kind,
            EventKind::PrivateAction { .. }
                | EventKind::QuestCardPlay { .. }
                | EventKind::GameStarted(_)
        )));
    }

    #[test]
    fn bad_line_reports_number() {
        let err = GameLog::from_jsonl("{\"seq\":0}\nnot json").unwrap_err();
        assert!(matches!(err, LogError::Parse { line: 1, .. }));
    }
}
