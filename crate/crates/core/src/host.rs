//! The host: drives one game from reveal to verdict.
//!
//! The host owns the rules state, asks each seat in turn, broadcasts public
//! text into every pipeline agent's memory, delivers private text only to
//! its owner, and closes every round with a memory roll. All randomness
//! outside role assignment comes from one play stream derived from the seed.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{
    compose_system_prompt, default_profiles, Action, HostInstruction, PipelineAgent,
    PipelineSettings, RoleProfile, TurnEnv,
};
use crate::backend::{Backend, BackendError, ModelSettings};
use crate::bots::{RuleBot, TableView};
use crate::experience::inject_experience;
use crate::extraction::{complete_selection, Demonstrations, Expected, Extractor};
use crate::log::{Audience, EventKind, GameHeader, GameLog, WinReason};
use crate::memory::{MemoryError, MemoryObject, Speaker};
use crate::prompts::{PromptSet, TemplateError, TemplateId};
use crate::rules::{
    assign_roles, reveal_info, AssassinationOutcome, GameConfig, GameState, GuessContext, Move,
    Phase, QuestCard, QuestOutcome, Role, Seat, Side, TransitionError, Vote, VoteOutcome,
    POINTS_TO_WIN,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeatKind {
    Pipeline,
    Bot,
}

/// Everything needed to play, or re-play, one game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSetup {
    pub game_id: String,
    pub config: GameConfig,
    pub seat_kinds: [SeatKind; 6],
    pub profiles: BTreeMap<Role, RoleProfile>,
    /// Experience text appended to a role's system prompt; absent means none.
    pub experience: BTreeMap<Role, String>,
    pub pipeline: PipelineSettings,
    pub model: ModelSettings,
    /// When false, extraction uses keyword rules only.
    pub extractor_model: bool,
    pub prompt_overrides: BTreeMap<TemplateId, String>,
    /// Replaces the built-in extractor demonstrations.
    pub demonstrations: Option<Demonstrations>,
    pub strategy_version: u64,
}

impl GameSetup {
    /// Six pipeline agents with default profiles and settings.
    pub fn new(game_id: impl Into<String>, config: GameConfig) -> Self {
        GameSetup {
            game_id: game_id.into(),
            config,
            seat_kinds: [SeatKind::Pipeline; 6],
            profiles: default_profiles(),
            experience: BTreeMap::new(),
            pipeline: PipelineSettings::default(),
            model: ModelSettings::default(),
            extractor_model: true,
            prompt_overrides: BTreeMap::new(),
            demonstrations: None,
            strategy_version: 0,
        }
    }

    pub fn all_bots(game_id: impl Into<String>, config: GameConfig) -> Self {
        GameSetup {
            seat_kinds: [SeatKind::Bot; 6],
            ..GameSetup::new(game_id, config)
        }
    }

    pub fn kind_of(&self, seat: Seat) -> SeatKind {
        self.seat_kinds[usize::from(seat.index() - 1)]
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HostError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Rules(#[from] TransitionError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("invalid setup: {0}")]
    Setup(String),
}

/// A played game. `failure` is set when the game stopped early; the log
/// then ends with an abort marker.
#[derive(Debug, Clone)]
pub struct GameRecord {
    pub log: GameLog,
    pub state: GameState,
    pub failure: Option<HostError>,
}

impl GameRecord {
    pub fn winner(&self) -> Option<Side> {
        self.state.winner
    }

    /// Each pipeline seat's last rolled summary.
    pub fn final_summaries(&self) -> BTreeMap<Seat, String> {
        let mut out = BTreeMap::new();
        for e in &self.log.events {
            if let EventKind::MemorySnapshot { owner, summary, .. } = &e.kind {
                out.insert(*owner, summary.clone());
            }
        }
        out
    }
}

#[allow(clippy::large_enum_variant)]
enum SeatAgent {
    Pipeline(Box<PipelineAgent>),
    Bot(RuleBot),
}

fn names(seats: &[Seat]) -> String {
    seats
        .iter()
        .map(|s| s.name())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Play-stream generator for a game seed; independent of the role shuffle.
pub fn play_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

struct Host<'a> {
    setup: &'a GameSetup,
    state: GameState,
    log: GameLog,
    seats: Vec<SeatAgent>,
    prompts: PromptSet,
    extractor: Extractor,
    rng: ChaCha8Rng,
    backend: &'a mut dyn Backend,
    /// Round whose content is being recorded; lags the rules round until the
    /// memory roll closes it.
    mem_round: u8,
}

impl<'a> Host<'a> {
    fn new(setup: &'a GameSetup, backend: &'a mut dyn Backend) -> Result<Self, HostError> {
        let state = GameState::new(setup.config.clone()).map_err(TransitionError::from)?;
        let prompts = PromptSet::with_overrides(&setup.prompt_overrides)?;
        let extractor = Extractor {
            demonstrations: setup.demonstrations.clone().unwrap_or_default(),
            prompts: prompts.clone(),
            model: setup.model.clone(),
            use_model: setup.extractor_model,
        };
        let mut seats = Vec::new();
        for (seat, role) in state.assignment.iter() {
            let reveal = reveal_info(&state.assignment, seat);
            let agent = match setup.kind_of(seat) {
                SeatKind::Bot => SeatAgent::Bot(RuleBot::new(seat, role, reveal)),
                SeatKind::Pipeline => {
                    let profile = setup
                        .profiles
                        .get(&role)
                        .filter(|p| p.is_valid() && p.role == role)
                        .ok_or_else(|| HostError::Setup(format!("no usable profile for {role}")))?
                        .clone();
                    let base = compose_system_prompt(&prompts, &profile, seat);
                    let system = match setup.experience.get(&role) {
                        Some(block) => inject_experience(&base, block),
                        None => base,
                    };
                    SeatAgent::Pipeline(Box::new(PipelineAgent::new(
                        seat,
                        profile,
                        reveal,
                        setup.pipeline.clone(),
                        system,
                    )))
                }
            };
            seats.push(agent);
        }
        Ok(Host {
            setup,
            state,
            log: GameLog::new(),
            seats,
            prompts,
            extractor,
            rng: play_rng(setup.config.seed),
            backend,
            mem_round: 1,
        })
    }

    fn table(&self) -> TableView {
        TableView {
            round: self.state.round,
            team: self.state.current_team.clone(),
            failed_teams: self
                .state
                .quest_history
                .iter()
                .filter(|q| q.outcome == QuestOutcome::Failed)
                .map(|q| {
                    let fails = q.cards.values().filter(|c| **c == QuestCard::Fail).count() as u8;
                    (q.team.clone(), fails)
                })
                .collect(),
            good_points: self.state.good_points,
            evil_points: self.state.evil_points,
        }
    }

    fn event(&mut self, kind: EventKind) {
        self.log.push(self.mem_round, kind);
    }

    fn deliver(
        &mut self,
        speaker: Speaker,
        text: &str,
        audience: Audience,
    ) -> Result<(), HostError> {
        let round = self.mem_round;
        for agent in &mut self.seats {
            if let SeatAgent::Pipeline(a) = agent {
                let object = match audience {
                    Audience::All => MemoryObject::public(speaker, text, round),
                    Audience::Seat(owner) if owner == a.seat => {
                        MemoryObject::private(speaker, text, round, owner)
                    }
                    Audience::Seat(_) => continue,
                };
                a.observe(object)?;
            }
        }
        Ok(())
    }

    fn announce(
        &mut self,
        audience: Audience,
        text: String,
        expected: Option<Expected>,
    ) -> Result<(), HostError> {
        self.deliver(Speaker::Host, &text, audience)?;
        self.event(EventKind::HostInstruction {
            audience,
            text,
            expected,
        });
        Ok(())
    }

    /// Asks `seat`, records its reply and private action, returns the action.
    fn turn(
        &mut self,
        seat: Seat,
        audience: Audience,
        text: String,
        expected: Expected,
    ) -> Result<Action, HostError> {
        self.announce(audience, text.clone(), Some(expected.clone()))?;
        let instruction = HostInstruction {
            text,
            expected,
            round: self.mem_round,
        };
        let table = self.table();
        let idx = usize::from(seat.index() - 1);
        let outcome = match &mut self.seats[idx] {
            SeatAgent::Bot(bot) => bot.take_turn(&instruction, &table, &mut self.rng),
            SeatAgent::Pipeline(agent) => {
                let mut env = TurnEnv {
                    backend: &mut *self.backend,
                    extractor: &self.extractor,
                    prompts: &self.prompts,
                    model: &self.setup.model,
                    rng: &mut self.rng,
                };
                agent.take_turn(&instruction, &mut env)?
            }
        };
        self.deliver(Speaker::Player(seat), &outcome.response, audience)?;
        self.event(match audience {
            Audience::All => EventKind::PublicResponse {
                seat,
                text: outcome.response,
            },
            Audience::Seat(_) => EventKind::PrivateResponse {
                seat,
                text: outcome.response,
            },
        });
        self.event(EventKind::PrivateAction {
            seat,
            action: outcome.action.clone(),
        });
        Ok(outcome.action)
    }

    fn advance(&mut self, mv: Move) -> Result<(), HostError> {
        self.state = self.state.advance(&mv)?;
        Ok(())
    }

    fn reveal(&mut self) -> Result<(), HostError> {
        for (seat, role) in self.state.assignment.clone().iter() {
            let view = reveal_info(&self.state.assignment, seat);
            let mut text = format!("{}, you are {}.", seat.name(), role.display_name());
            if let Some([a, b]) = view.known_evil_pair {
                text.push_str(&format!(
                    " You see that {a} and {b} are the agents of evil."
                ));
            }
            if let Some([a, b]) = view.known_merlin_morgana_pair {
                text.push_str(&format!(
                    " You see that {a} and {b} are Merlin and Morgana, but you do not know which is which."
                ));
            }
            if let Some((partner, partner_role)) = view.known_partner {
                text.push_str(&format!(
                    " Your teammate {partner} is {}.",
                    partner_role.display_name()
                ));
            }
            if role == Role::LoyalServant {
                text.push_str(" You have no information about the other players.");
            }
            self.announce(Audience::Seat(seat), text, None)?;
        }
        self.advance(Move::EndReveal)
    }

    fn propose_and_vote(&mut self) -> Result<(), HostError> {
        let all: Vec<Seat> = Seat::all().collect();
        loop {
            let leader = self.state.leader;
            let size = self.state.team_size();
            let forced = self.state.is_forced_proposal();
            let attempt = self.state.proposal_attempt;
            let mut ask = format!(
                "{}, you are the leader for proposal {attempt} of round {}. Please choose {size} players to go on the quest.",
                leader.name(),
                self.state.round
            );
            if forced {
                ask.push_str(" This is the last proposal of the round, so your team goes on the quest without a vote.");
            }
            let expected = Expected::players(size, all.clone())
                .ok_or_else(|| HostError::Setup("team size must be 2 or 3".to_string()))?;
            let picked = match self.turn(leader, Audience::All, ask, expected)? {
                Action::ChoosePlayers(seats) => seats,
                _ => Vec::new(),
            };
            let team = complete_selection(picked, size, &all, &mut self.rng);
            self.event(EventKind::TeamProposal {
                leader,
                team: team.clone(),
                attempt,
                forced,
            });
            self.advance(Move::Propose { team: team.clone() })?;
            let team_names = names(&team);
            if forced {
                return self.announce(
                    Audience::All,
                    format!(
                        "{} assigned the team {team_names}. It goes on the quest without a vote.",
                        leader.name()
                    ),
                    None,
                );
            }
            let mut order = leader;
            for _ in 1..6 {
                order = crate::rules::next_leader(order);
                let text = format!(
                    "{} proposed the team {team_names}. {}, please discuss the proposed team.",
                    leader.name(),
                    order.name()
                );
                self.turn(order, Audience::All, text, Expected::FreeSpeech)?;
            }
            let mut votes = Vec::new();
            for seat in Seat::all() {
                let text = format!(
                    "{}, please vote agree or disagree on the team {team_names}.",
                    seat.name()
                );
                let vote = match self.turn(seat, Audience::All, text, Expected::TeamVote)? {
                    Action::Vote(v) => v,
                    _ => Vote::Agree,
                };
                votes.push((seat, vote));
            }
            self.advance(Move::CastVotes {
                votes: votes.clone(),
            })?;
            let outcome = if self.state.phase == Phase::Quest {
                VoteOutcome::Pass
            } else {
                VoteOutcome::Reject
            };
            let tally = votes
                .iter()
                .map(|(s, v)| {
                    let word = match v {
                        Vote::Agree => "agree",
                        Vote::Disagree => "disagree",
                    };
                    format!("{} {word}", s.name())
                })
                .collect::<Vec<_>>()
                .join(", ");
            self.event(EventKind::TeamVoteBallot {
                leader,
                attempt,
                votes,
                outcome,
            });
            let verdict = match outcome {
                VoteOutcome::Pass => "approved",
                VoteOutcome::Reject => "rejected",
            };
            self.announce(
                Audience::All,
                format!("The team {team_names} was {verdict}. Votes: {tally}."),
                None,
            )?;
            if outcome == VoteOutcome::Pass {
                return Ok(());
            }
        }
    }

    fn quest(&mut self) -> Result<(), HostError> {
        let team = self.state.current_team.clone().unwrap_or_default();
        let mut cards = Vec::new();
        for seat in &team {
            let seat = *seat;
            let others: Vec<Seat> = team.iter().copied().filter(|s| *s != seat).collect();
            let card = if self.state.assignment.side_of(seat) == Side::Good {
                let text = format!(
                    "{}, you are on the quest with {}. As a good player your card is a success.",
                    seat.name(),
                    names(&others)
                );
                self.announce(Audience::Seat(seat), text, None)?;
                QuestCard::Success
            } else {
                let text = format!(
                    "{}, you are on the quest with {}. Do you want the quest to succeed or fail?",
                    seat.name(),
                    names(&others)
                );
                match self.turn(seat, Audience::Seat(seat), text, Expected::QuestCard)? {
                    Action::QuestCard(c) => c,
                    _ => QuestCard::Fail,
                }
            };
            cards.push((seat, card));
        }
        for (seat, card) in &cards {
            self.event(EventKind::QuestCardPlay {
                seat: *seat,
                card: *card,
            });
        }
        let fail_count = cards.iter().filter(|(_, c)| *c == QuestCard::Fail).count() as u8;
        self.advance(Move::PlayCards { cards })?;
        let outcome = self
            .state
            .quest_history
            .last()
            .map(|q| q.outcome)
            .unwrap_or(QuestOutcome::Failed);
        self.event(EventKind::QuestResult {
            team: team.clone(),
            outcome,
            fail_count,
        });
        let word = match outcome {
            QuestOutcome::Succeeded => "succeeded",
            QuestOutcome::Failed => "failed",
        };
        let text = format!(
            "The quest with {} {word} with {fail_count} fail card(s). Good {} : Evil {}.",
            names(&team),
            self.state.good_points,
            self.state.evil_points
        );
        self.announce(Audience::All, text, None)
    }

    fn assassin_window(&mut self) -> Result<(), HostError> {
        while let Phase::AssassinWindow(context) = self.state.phase {
            let assassin = self.state.assignment.seat_of(Role::Assassin);
            let candidates: Vec<Seat> = Seat::all().filter(|s| *s != assassin).collect();
            let mandatory = context == GuessContext::FinalWindow;
            let text = if mandatory {
                format!(
                    "Good has completed {POINTS_TO_WIN} quests. {}, as the Assassin you must now name the player you believe is Merlin.",
                    assassin.name()
                )
            } else {
                format!(
                    "{}, as the Assassin you may name the player you believe is Merlin now. A wrong guess reveals you as the Assassin. You may also decline and wait.",
                    assassin.name()
                )
            };
            let expected = Expected::AssassinGuess {
                candidates: candidates.clone(),
                mandatory,
            };
            let mut guess = match self.turn(assassin, Audience::Seat(assassin), text, expected)? {
                Action::ChoosePlayers(v) => v.first().copied().filter(|s| candidates.contains(s)),
                _ => None,
            };
            if guess.is_none() && mandatory {
                guess = complete_selection(Vec::new(), 1, &candidates, &mut self.rng)
                    .first()
                    .copied();
            }
            match guess {
                Some(g) => {
                    self.advance(Move::Assassinate { guess: g })?;
                    let outcome = self.state.guesses.last().map(|r| r.outcome);
                    self.event(EventKind::AssassinGuess {
                        assassin,
                        guess: Some(g),
                        context,
                        outcome,
                    });
                    let verdict = match outcome {
                        Some(AssassinationOutcome::EvilWins) => format!("{g} is Merlin."),
                        Some(AssassinationOutcome::Exposed) => {
                            format!(
                                "{g} is not Merlin, and {} is revealed as the Assassin.",
                                assassin.name()
                            )
                        }
                        _ => format!("{g} is not Merlin."),
                    };
                    self.announce(
                        Audience::All,
                        format!(
                            "The Assassin {} named {g} as Merlin. {verdict}",
                            assassin.name()
                        ),
                        None,
                    )?;
                }
                None => {
                    self.advance(Move::PassGuess)?;
                    self.event(EventKind::AssassinGuess {
                        assassin,
                        guess: None,
                        context,
                        outcome: None,
                    });
                }
            }
        }
        Ok(())
    }

    fn close_round(&mut self) -> Result<(), HostError> {
        let round = self.mem_round;
        let mut snapshots = Vec::new();
        for agent in &mut self.seats {
            if let SeatAgent::Pipeline(a) = agent {
                let mut env = TurnEnv {
                    backend: &mut *self.backend,
                    extractor: &self.extractor,
                    prompts: &self.prompts,
                    model: &self.setup.model,
                    rng: &mut self.rng,
                };
                let summary = a.end_round(&mut env)?;
                snapshots.push((a.seat, summary));
            }
        }
        for (owner, summary) in snapshots {
            self.event(EventKind::MemorySnapshot {
                owner,
                closed_round: round,
                summary,
            });
        }
        self.mem_round += 1;
        Ok(())
    }

    fn finish(&mut self) -> Result<(), HostError> {
        let Some(winner) = self.state.winner else {
            return Ok(());
        };
        let reason = if self.state.evil_points >= POINTS_TO_WIN {
            WinReason::ThreeQuestsFailed
        } else if self.state.guesses.last().map(|g| g.outcome)
            == Some(AssassinationOutcome::EvilWins)
        {
            WinReason::MerlinAssassinated
        } else {
            WinReason::MerlinSurvived
        };
        self.announce(
            Audience::All,
            format!("The game is over. {winner} wins."),
            None,
        )?;
        self.event(EventKind::GameOver { winner, reason });
        Ok(())
    }

    fn play(&mut self) -> Result<(), HostError> {
        self.reveal()?;
        while !self.state.is_finished() {
            let round = self.state.round;
            let text = format!(
                "Round {round} begins. The quest needs {} players and the leader is {}. Good {} : Evil {}.",
                self.state.team_size(),
                self.state.leader.name(),
                self.state.good_points,
                self.state.evil_points
            );
            self.announce(Audience::All, text, None)?;
            self.propose_and_vote()?;
            self.quest()?;
            self.assassin_window()?;
            if self.state.is_finished() {
                self.finish()?;
            }
            self.close_round()?;
        }
        Ok(())
    }
}

/// Plays one game. Backend or memory failures stop the game and are
/// reported in the record; only an unusable setup is an error.
pub fn run_game(setup: &GameSetup, backend: &mut dyn Backend) -> Result<GameRecord, HostError> {
    let mut host = Host::new(setup, backend)?;
    let header = GameHeader {
        game_id: setup.game_id.clone(),
        assignment: assign_roles(setup.config.seed),
        setup: setup.clone(),
    };
    host.event(EventKind::GameStarted(header));
    let failure = host.play().err();
    if let Some(err) = &failure {
        host.event(EventKind::Aborted {
            reason: err.to_string(),
        });
    }
    Ok(GameRecord {
        log: host.log,
        state: host.state,
        failure,
    })
}
