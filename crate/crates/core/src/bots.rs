//! Seeded rule-based players.
//!
//! Bots never call a backend. They use only their own reveal view and the
//! public table state, so they are safe stand-ins for any seat.

use alloc::vec::Vec;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{Action, HostInstruction, TurnOutcome};
use crate::extraction::Expected;
use crate::rules::{QuestCard, RevealView, Role, Seat, Side, Vote};

/// Public facts a bot may use when deciding.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TableView {
    pub round: u8,
    pub team: Option<Vec<Seat>>,
    /// Teams of failed quests, with their fail counts.
    pub failed_teams: Vec<(Vec<Seat>, u8)>,
    pub good_points: u8,
    pub evil_points: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleBot {
    pub seat: Seat,
    pub role: Role,
    pub reveal: RevealView,
}

/// Chance that an evil seat on a quest plays Fail.
const EVIL_FAIL_RATE: f64 = 0.85;
/// Chance that the assassin takes an optional guess.
const MIDGAME_GUESS_RATE: f64 = 0.15;

impl RuleBot {
    pub fn new(seat: Seat, role: Role, reveal: RevealView) -> Self {
        RuleBot { seat, role, reveal }
    }

    fn side(&self) -> Side {
        self.role.side()
    }

    fn partner(&self) -> Option<Seat> {
        self.reveal.known_partner.map(|(s, _)| s)
    }

    /// Seats this bot believes are evil.
    fn suspects(&self, table: &TableView) -> Vec<Seat> {
        if let Some(pair) = self.reveal.known_evil_pair {
            return pair.to_vec();
        }
        let mut out: Vec<Seat> = Vec::new();
        for (team, _) in &table.failed_teams {
            for s in team {
                if *s != self.seat && !out.contains(s) {
                    out.push(*s);
                }
            }
        }
        out
    }

    fn propose<R: Rng + ?Sized>(
        &self,
        size: usize,
        candidates: &[Seat],
        table: &TableView,
        rng: &mut R,
    ) -> Vec<Seat> {
        let mut team = alloc::vec![self.seat];
        let mut pool: Vec<Seat> = candidates
            .iter()
            .copied()
            .filter(|s| *s != self.seat)
            .collect();
        pool.shuffle(rng);
        if self.side() == Side::Good {
            let suspects = self.suspects(table);
            // trusted seats first, stable within the shuffled order
            pool.sort_by_key(|s| suspects.contains(s));
        } else if let Some(p) = self.partner() {
            pool.retain(|s| *s != p);
        }
        team.extend(pool.into_iter().take(size.saturating_sub(1)));
        team
    }

    fn vote<R: Rng + ?Sized>(&self, table: &TableView, rng: &mut R) -> Vote {
        let team = table.team.clone().unwrap_or_default();
        match self.side() {
            Side::Good => {
                let suspects = self.suspects(table);
                let flagged = team.iter().any(|s| suspects.contains(s));
                if flagged && (self.reveal.known_evil_pair.is_some() || rng.random_bool(0.7)) {
                    Vote::Disagree
                } else {
                    Vote::Agree
                }
            }
            Side::Evil => {
                let evil_on_team =
                    team.contains(&self.seat) || self.partner().is_some_and(|p| team.contains(&p));
                if evil_on_team || rng.random_bool(0.3) {
                    Vote::Agree
                } else {
                    Vote::Disagree
                }
            }
        }
    }

    fn card<R: Rng + ?Sized>(&self, rng: &mut R) -> QuestCard {
        if self.side() == Side::Evil && rng.random_bool(EVIL_FAIL_RATE) {
            QuestCard::Fail
        } else {
            QuestCard::Success
        }
    }

    fn guess<R: Rng + ?Sized>(
        &self,
        candidates: &[Seat],
        mandatory: bool,
        rng: &mut R,
    ) -> Option<Seat> {
        if !mandatory && !rng.random_bool(MIDGAME_GUESS_RATE) {
            return None;
        }
        let partner = self.partner();
        let good: Vec<Seat> = candidates
            .iter()
            .copied()
            .filter(|s| Some(*s) != partner)
            .collect();
        good.choose(rng).or_else(|| candidates.choose(rng)).copied()
    }

    pub fn take_turn<R: Rng + ?Sized>(
        &self,
        instruction: &HostInstruction,
        table: &TableView,
        rng: &mut R,
    ) -> TurnOutcome {
        let action = match &instruction.expected {
            Expected::PlayerChoice {
                required,
                candidates,
            } => Action::ChoosePlayers(self.propose(*required, candidates, table, rng)),
            Expected::TeamVote => Action::Vote(self.vote(table, rng)),
            Expected::QuestCard => Action::QuestCard(self.card(rng)),
            Expected::AssassinGuess {
                candidates,
                mandatory,
            } => match self.guess(candidates, *mandatory, rng) {
                Some(g) => Action::ChoosePlayers(alloc::vec![g]),
                None => Action::Silent,
            },
            Expected::NonVerbal | Expected::FreeSpeech => Action::Silent,
        };
        let response = action.fallback_response();
        TurnOutcome {
            action,
            response,
            degraded: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::{reveal_info, RoleAssignment, ROLE_MULTISET};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bot(role: Role) -> RuleBot {
        let a = RoleAssignment::try_from(ROLE_MULTISET).unwrap();
        let s = a.seat_of(role);
        RuleBot::new(s, role, reveal_info(&a, s))
    }

    fn instr(expected: Expected) -> HostInstruction {
        HostInstruction {
            text: alloc::string::String::new(),
            expected,
            round: 1,
        }
    }

    #[test]
    fn proposals_are_legal_and_include_self() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for role in Role::ALL {
            let b = bot(role);
            for size in [2, 3] {
                let e = Expected::players(size, Seat::all().collect()).unwrap();
                let out = b.take_turn(&instr(e), &TableView::default(), &mut rng);
                let Action::ChoosePlayers(team) = out.action else {
                    panic!()
                };
                assert_eq!(team.len(), size);
                assert_eq!(team[0], b.seat);
                let mut d = team.clone();
                d.sort();
                d.dedup();
                assert_eq!(d.len(), size);
            }
        }
    }

    #[test]
    fn merlin_rejects_known_evil() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = bot(Role::Merlin);
        let table = TableView {
            team: Some(alloc::vec![Seat::new(2).unwrap(), Seat::new(6).unwrap()]),
            ..TableView::default()
        };
        let out = b.take_turn(&instr(Expected::TeamVote), &table, &mut rng);
        assert_eq!(out.action, Action::Vote(Vote::Disagree));
    }

    #[test]
    fn good_bots_never_fail() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let out = bot(Role::Percival).take_turn(
                &instr(Expected::QuestCard),
                &TableView::default(),
                &mut rng,
            );
            assert_eq!(out.action, Action::QuestCard(QuestCard::Success));
        }
    }

    #[test]
    fn final_guess_never_declined_nor_partner() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = bot(Role::Assassin);
        let cands: Vec<Seat> = Seat::all().filter(|s| *s != b.seat).collect();
        for _ in 0..50 {
            let e = Expected::AssassinGuess {
                candidates: cands.clone(),
                mandatory: true,
            };
            let Action::ChoosePlayers(g) = b
                .take_turn(&instr(e), &TableView::default(), &mut rng)
                .action
            else {
                panic!()
            };
            assert_ne!(Some(g[0]), b.partner());
        }
    }
}
