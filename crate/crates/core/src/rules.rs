//! Six-player Avalon rules as a deterministic state machine.
//!
//! [`GameState`] is a value; [`GameState::advance`] consumes a [`Move`] and
//! returns the next state without touching the old one.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PLAYER_COUNT: u8 = 6;
pub const MAX_PROPOSALS_PER_ROUND: u8 = 5;
pub const POINTS_TO_WIN: u8 = 3;
pub const QUEST_ROUNDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    Merlin,
    Percival,
    LoyalServant,
    Morgana,
    Assassin,
}

/// The fixed role multiset of a six-player game.
pub const ROLE_MULTISET: [Role; 6] = [
    Role::Merlin,
    Role::Percival,
    Role::LoyalServant,
    Role::LoyalServant,
    Role::Morgana,
    Role::Assassin,
];

impl Role {
    pub const ALL: [Role; 5] = [
        Role::Merlin,
        Role::Percival,
        Role::LoyalServant,
        Role::Morgana,
        Role::Assassin,
    ];

    pub fn side(self) -> Side {
        match self {
            Role::Merlin | Role::Percival | Role::LoyalServant => Side::Good,
            Role::Morgana | Role::Assassin => Side::Evil,
        }
    }

    /// Name as it appears in prompts and transcripts.
    pub fn display_name(self) -> &'static str {
        match self {
            Role::Merlin => "Merlin",
            Role::Percival => "Percival",
            Role::LoyalServant => "Loyal Servant",
            Role::Morgana => "Morgana",
            Role::Assassin => "Assassin",
        }
    }

    /// Case-insensitive lookup by display name or variant name.
    pub fn from_name(name: &str) -> Option<Role> {
        let wanted: alloc::string::String = name
            .chars()
            .filter(|c| c.is_alphanumeric())
            .flat_map(char::to_lowercase)
            .collect();
        Role::ALL.into_iter().find(|r| {
            let candidate: alloc::string::String = r
                .display_name()
                .chars()
                .filter(|c| c.is_alphanumeric())
                .flat_map(char::to_lowercase)
                .collect();
            candidate == wanted
        })
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.display_name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    Good,
    Evil,
}

impl Side {
    pub fn opponent(self) -> Side {
        match self {
            Side::Good => Side::Evil,
            Side::Evil => Side::Good,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Good => "Good",
            Side::Evil => "Evil",
        })
    }
}

/// A seat at the table, numbered 1 through 6.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Seat(u8);

impl Seat {
    pub const fn new(index: u8) -> Option<Seat> {
        if index >= 1 && index <= PLAYER_COUNT {
            Some(Seat(index))
        } else {
            None
        }
    }

    pub const fn index(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = Seat> + Clone {
        (1..=PLAYER_COUNT).map(Seat)
    }

    /// Name used for this seat in every prompt and transcript.
    pub fn name(self) -> alloc::string::String {
        alloc::format!("Player {}", self.0)
    }

    fn slot(self) -> usize {
        usize::from(self.0 - 1)
    }
}

impl TryFrom<u8> for Seat {
    type Error = RuleError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Seat::new(value).ok_or(RuleError::SeatOutOfRange(value))
    }
}

impl From<Seat> for u8 {
    fn from(seat: Seat) -> u8 {
        seat.0
    }
}

impl fmt::Display for Seat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Player {}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("seat {0} is outside 1..=6")]
    SeatOutOfRange(u8),
    #[error("role multiset must be Merlin, Percival, 2x Loyal Servant, Morgana, Assassin")]
    BadRoleMultiset,
    #[error("malformed ballot: {0}")]
    MalformedBallot(&'static str),
    #[error("quest protocol violation: {0}")]
    QuestProtocol(&'static str),
    #[error("good-side {0} cannot play a Fail card")]
    GoodSeatFailed(Seat),
    #[error("the assassin cannot name their own seat")]
    SelfGuess,
    #[error("team must have {expected} distinct seats, got {got}")]
    TeamSize { expected: usize, got: usize },
    #[error("invalid game config: {0}")]
    Config(&'static str),
}

/// Total, bijective mapping from seats onto [`ROLE_MULTISET`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[Role; 6]", into = "[Role; 6]")]
pub struct RoleAssignment {
    roles: [Role; 6],
}

impl TryFrom<[Role; 6]> for RoleAssignment {
    type Error = RuleError;

    fn try_from(roles: [Role; 6]) -> Result<Self, Self::Error> {
        let mut sorted = roles;
        sorted.sort();
        let mut expected = ROLE_MULTISET;
        expected.sort();
        if sorted == expected {
            Ok(RoleAssignment { roles })
        } else {
            Err(RuleError::BadRoleMultiset)
        }
    }
}

impl From<RoleAssignment> for [Role; 6] {
    fn from(a: RoleAssignment) -> [Role; 6] {
        a.roles
    }
}

impl RoleAssignment {
    pub fn role_of(&self, seat: Seat) -> Role {
        self.roles[seat.slot()]
    }

    pub fn side_of(&self, seat: Seat) -> Side {
        self.role_of(seat).side()
    }

    /// Seats holding `role`, ascending.
    pub fn seats_of(&self, role: Role) -> Vec<Seat> {
        Seat::all().filter(|s| self.role_of(*s) == role).collect()
    }

    /// First seat holding `role`. Every role appears at least once.
    pub fn seat_of(&self, role: Role) -> Seat {
        Seat::all()
            .find(|s| self.role_of(*s) == role)
            .expect("every role is assigned")
    }

    pub fn seats_on(&self, side: Side) -> Vec<Seat> {
        Seat::all().filter(|s| self.side_of(*s) == side).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Seat, Role)> + '_ {
        Seat::all().map(move |s| (s, self.role_of(s)))
    }
}

/// Shuffles the role multiset over the six seats with a seeded ChaCha stream.
pub fn assign_roles(seed: u64) -> RoleAssignment {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut roles = ROLE_MULTISET;
    roles.shuffle(&mut rng);
    RoleAssignment { roles }
}

/// What a seat learns during the reveal phase.
///
/// Pairs are stored in ascending seat order so their layout carries no hint
/// of which seat holds which role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevealView {
    pub viewer: Seat,
    pub known_evil_pair: Option<[Seat; 2]>,
    pub known_merlin_morgana_pair: Option<[Seat; 2]>,
    pub known_partner: Option<(Seat, Role)>,
}

fn unordered_pair(a: Seat, b: Seat) -> [Seat; 2] {
    if a <= b {
        [a, b]
    } else {
        [b, a]
    }
}

pub fn reveal_info(assignment: &RoleAssignment, viewer: Seat) -> RevealView {
    let mut view = RevealView {
        viewer,
        known_evil_pair: None,
        known_merlin_morgana_pair: None,
        known_partner: None,
    };
    let morgana = assignment.seat_of(Role::Morgana);
    let assassin = assignment.seat_of(Role::Assassin);
    match assignment.role_of(viewer) {
        Role::Merlin => view.known_evil_pair = Some(unordered_pair(morgana, assassin)),
        Role::Percival => {
            let merlin = assignment.seat_of(Role::Merlin);
            view.known_merlin_morgana_pair = Some(unordered_pair(merlin, morgana));
        }
        Role::Morgana => view.known_partner = Some((assassin, Role::Assassin)),
        Role::Assassin => view.known_partner = Some((morgana, Role::Morgana)),
        Role::LoyalServant => {}
    }
    view
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Vote {
    Agree,
    Disagree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VoteOutcome {
    Pass,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum QuestCard {
    Success,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuestOutcome {
    Succeeded,
    Failed,
}

/// Strict majority of all six seats.
pub fn tally_team_vote(votes: &[(Seat, Vote)]) -> Result<VoteOutcome, RuleError> {
    let mut seen = [false; PLAYER_COUNT as usize];
    for (seat, _) in votes {
        if core::mem::replace(&mut seen[seat.slot()], true) {
            return Err(RuleError::MalformedBallot("duplicate seat vote"));
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(RuleError::MalformedBallot("missing seat vote"));
    }
    let agree = votes.iter().filter(|(_, v)| *v == Vote::Agree).count();
    if agree > usize::from(PLAYER_COUNT) / 2 {
        Ok(VoteOutcome::Pass)
    } else {
        Ok(VoteOutcome::Reject)
    }
}

/// A quest fails on any Fail card. Cards must cover the team exactly.
pub fn resolve_quest(
    cards: &[(Seat, QuestCard)],
    team: &[Seat],
) -> Result<QuestOutcome, RuleError> {
    for (i, (seat, _)) in cards.iter().enumerate() {
        if !team.contains(seat) {
            return Err(RuleError::QuestProtocol(
                "card from a seat outside the team",
            ));
        }
        if cards[..i].iter().any(|(s, _)| s == seat) {
            return Err(RuleError::QuestProtocol("seat played more than one card"));
        }
    }
    if cards.len() != team.len() {
        return Err(RuleError::QuestProtocol(
            "a team member did not play a card",
        ));
    }
    if cards.iter().any(|(_, c)| *c == QuestCard::Fail) {
        Ok(QuestOutcome::Failed)
    } else {
        Ok(QuestOutcome::Succeeded)
    }
}

pub fn next_leader(current: Seat) -> Seat {
    Seat(current.0 % PLAYER_COUNT + 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GuessContext {
    /// Optional guess at the end of a round while the game is undecided.
    MidGame,
    /// Mandatory guess once Good has three successful quests.
    FinalWindow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssassinationOutcome {
    EvilWins,
    Exposed,
    GoodWins,
}

pub fn assassinate(
    assignment: &RoleAssignment,
    guess: Seat,
    context: GuessContext,
) -> Result<AssassinationOutcome, RuleError> {
    if assignment.role_of(guess) == Role::Assassin {
        return Err(RuleError::SelfGuess);
    }
    Ok(match (assignment.role_of(guess) == Role::Merlin, context) {
        (true, _) => AssassinationOutcome::EvilWins,
        (false, GuessContext::MidGame) => AssassinationOutcome::Exposed,
        (false, GuessContext::FinalWindow) => AssassinationOutcome::GoodWins,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameConfig {
    pub quest_team_sizes: [u8; QUEST_ROUNDS],
    pub seed: u64,
}

impl GameConfig {
    pub fn new(seed: u64) -> Self {
        GameConfig {
            quest_team_sizes: [2, 3, 3, 3, 3],
            seed,
        }
    }

    pub const fn player_count(&self) -> u8 {
        PLAYER_COUNT
    }

    pub const fn max_proposals_per_round(&self) -> u8 {
        MAX_PROPOSALS_PER_ROUND
    }

    pub const fn points_to_win(&self) -> u8 {
        POINTS_TO_WIN
    }

    pub fn validate(&self) -> Result<(), RuleError> {
        if self.quest_team_sizes.iter().all(|s| matches!(s, 2 | 3)) {
            Ok(())
        } else {
            Err(RuleError::Config("quest team sizes must each be 2 or 3"))
        }
    }

    /// Team size for a 1-based round.
    pub fn team_size(&self, round: u8) -> usize {
        usize::from(self.quest_team_sizes[usize::from(round - 1)])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Reveal,
    Discussion,
    TeamVote,
    Quest,
    AssassinWindow(GuessContext),
    Finished,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestRecord {
    pub round: u8,
    pub team: Vec<Seat>,
    /// Empty when the team was leader-assigned on the last proposal.
    pub team_votes: BTreeMap<Seat, Vote>,
    pub proposal_attempts_used: u8,
    pub cards: BTreeMap<Seat, QuestCard>,
    pub outcome: QuestOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuessRecord {
    pub round: u8,
    pub guess: Seat,
    pub context: GuessContext,
    pub outcome: AssassinationOutcome,
}

/// One legal input to the state machine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Move {
    EndReveal,
    /// The current leader names a team.
    Propose {
        team: Vec<Seat>,
    },
    CastVotes {
        votes: Vec<(Seat, Vote)>,
    },
    PlayCards {
        cards: Vec<(Seat, QuestCard)>,
    },
    Assassinate {
        guess: Seat,
    },
    PassGuess,
}

impl Move {
    fn name(&self) -> &'static str {
        match self {
            Move::EndReveal => "EndReveal",
            Move::Propose { .. } => "Propose",
            Move::CastVotes { .. } => "CastVotes",
            Move::PlayCards { .. } => "PlayCards",
            Move::Assassinate { .. } => "Assassinate",
            Move::PassGuess => "PassGuess",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransitionError {
    #[error("{found} is illegal during {phase:?}; it requires phase {expected}")]
    WrongPhase {
        found: &'static str,
        phase: Phase,
        expected: &'static str,
    },
    #[error("the final assassination guess cannot be skipped")]
    MandatoryGuess,
    #[error(transparent)]
    Rule(#[from] RuleError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameState {
    pub config: GameConfig,
    pub assignment: RoleAssignment,
    pub round: u8,
    pub phase: Phase,
    pub leader: Seat,
    pub proposal_attempt: u8,
    pub good_points: u8,
    pub evil_points: u8,
    pub current_team: Option<Vec<Seat>>,
    /// Ballot that approved `current_team`, kept until the quest resolves.
    pub approving_votes: BTreeMap<Seat, Vote>,
    pub quest_history: Vec<QuestRecord>,
    pub guesses: Vec<GuessRecord>,
    pub assassin_exposed: bool,
    pub winner: Option<Side>,
    /// Team-vote phases run in the current round.
    pub votes_this_round: u8,
}

impl GameState {
    /// A fresh game with roles drawn from `config.seed`.
    pub fn new(config: GameConfig) -> Result<GameState, RuleError> {
        let assignment = assign_roles(config.seed);
        GameState::with_assignment(config, assignment)
    }

    pub fn with_assignment(
        config: GameConfig,
        assignment: RoleAssignment,
    ) -> Result<GameState, RuleError> {
        config.validate()?;
        Ok(GameState {
            config,
            assignment,
            round: 1,
            phase: Phase::Reveal,
            leader: Seat(1),
            proposal_attempt: 1,
            good_points: 0,
            evil_points: 0,
            current_team: None,
            approving_votes: BTreeMap::new(),
            quest_history: Vec::new(),
            guesses: Vec::new(),
            assassin_exposed: false,
            winner: None,
            votes_this_round: 0,
        })
    }

    pub fn team_size(&self) -> usize {
        self.config.team_size(self.round)
    }

    pub fn is_finished(&self) -> bool {
        self.phase == Phase::Finished
    }

    /// True when the next proposal is leader-assigned without a vote.
    pub fn is_forced_proposal(&self) -> bool {
        self.proposal_attempt == MAX_PROPOSALS_PER_ROUND
    }

    pub fn advance(&self, mv: &Move) -> Result<GameState, TransitionError> {
        let mut next = self.clone();
        next.apply(mv)?;
        Ok(next)
    }

    fn wrong_phase(&self, mv: &Move, expected: &'static str) -> TransitionError {
        TransitionError::WrongPhase {
            found: mv.name(),
            phase: self.phase,
            expected,
        }
    }

    fn apply(&mut self, mv: &Move) -> Result<(), TransitionError> {
        match (self.phase, mv) {
            (Phase::Reveal, Move::EndReveal) => {
                self.phase = Phase::Discussion;
            }
            (Phase::Discussion, Move::Propose { team }) => {
                let expected = self.team_size();
                let distinct = team.iter().enumerate().all(|(i, s)| !team[..i].contains(s));
                if team.len() != expected || !distinct {
                    return Err(RuleError::TeamSize {
                        expected,
                        got: team.len(),
                    }
                    .into());
                }
                self.current_team = Some(team.clone());
                self.approving_votes.clear();
                self.phase = if self.is_forced_proposal() {
                    Phase::Quest
                } else {
                    Phase::TeamVote
                };
            }
            (Phase::TeamVote, Move::CastVotes { votes }) => {
                let outcome = tally_team_vote(votes)?;
                self.votes_this_round += 1;
                match outcome {
                    VoteOutcome::Pass => {
                        self.approving_votes = votes.iter().copied().collect();
                        self.phase = Phase::Quest;
                    }
                    VoteOutcome::Reject => {
                        self.proposal_attempt += 1;
                        self.leader = next_leader(self.leader);
                        self.current_team = None;
                        self.phase = Phase::Discussion;
                    }
                }
            }
            (Phase::Quest, Move::PlayCards { cards }) => {
                let team = self.current_team.clone().unwrap_or_default();
                let outcome = resolve_quest(cards, &team)?;
                if let Some((seat, _)) = cards.iter().find(|(s, c)| {
                    *c == QuestCard::Fail && self.assignment.side_of(*s) == Side::Good
                }) {
                    return Err(RuleError::GoodSeatFailed(*seat).into());
                }
                self.quest_history.push(QuestRecord {
                    round: self.round,
                    team,
                    team_votes: core::mem::take(&mut self.approving_votes),
                    proposal_attempts_used: self.proposal_attempt,
                    cards: cards.iter().copied().collect(),
                    outcome,
                });
                match outcome {
                    QuestOutcome::Succeeded => self.good_points += 1,
                    QuestOutcome::Failed => self.evil_points += 1,
                }
                if self.evil_points >= POINTS_TO_WIN {
                    self.finish(Side::Evil);
                } else if self.good_points >= POINTS_TO_WIN {
                    self.phase = Phase::AssassinWindow(GuessContext::FinalWindow);
                } else if self.assassin_exposed {
                    self.start_next_round();
                } else {
                    self.phase = Phase::AssassinWindow(GuessContext::MidGame);
                }
            }
            (Phase::AssassinWindow(context), Move::Assassinate { guess }) => {
                let outcome = assassinate(&self.assignment, *guess, context)?;
                self.guesses.push(GuessRecord {
                    round: self.round,
                    guess: *guess,
                    context,
                    outcome,
                });
                match outcome {
                    AssassinationOutcome::EvilWins => self.finish(Side::Evil),
                    AssassinationOutcome::GoodWins => self.finish(Side::Good),
                    AssassinationOutcome::Exposed => {
                        self.assassin_exposed = true;
                        self.start_next_round();
                    }
                }
            }
            (Phase::AssassinWindow(GuessContext::MidGame), Move::PassGuess) => {
                self.start_next_round()
            }
            (Phase::AssassinWindow(GuessContext::FinalWindow), Move::PassGuess) => {
                return Err(TransitionError::MandatoryGuess)
            }
            (Phase::Reveal, _) => return Err(self.wrong_phase(mv, "EndReveal")),
            (Phase::Discussion, _) => return Err(self.wrong_phase(mv, "Propose")),
            (Phase::TeamVote, _) => return Err(self.wrong_phase(mv, "CastVotes")),
            (Phase::Quest, _) => return Err(self.wrong_phase(mv, "PlayCards")),
            (Phase::AssassinWindow(_), _) => {
                return Err(self.wrong_phase(mv, "Assassinate or PassGuess"))
            }
            (Phase::Finished, _) => return Err(self.wrong_phase(mv, "none (game over)")),
        }
        Ok(())
    }

    fn finish(&mut self, winner: Side) {
        self.winner = Some(winner);
        self.phase = Phase::Finished;
        self.current_team = None;
    }

    fn start_next_round(&mut self) {
        self.round += 1;
        self.leader = next_leader(self.leader);
        self.proposal_attempt = 1;
        self.votes_this_round = 0;
        self.current_team = None;
        self.phase = Phase::Discussion;
    }
}
