//! Outcome metrics and social-behavior measurements over game logs.
//!
//! Only complete logs count; aborted games are skipped and reported. All
//! metrics are keyed by role, pooling every seat that held the role.
//!
//! * winning rate: wins of a side ÷ games;
//! * quest engagement: executed quests the role sat on ÷ executed quests;
//! * failure votes: Fail cards the role played ÷ cards it played;
//! * leader approval: Agree votes on the role's ballots ÷ votes on them.
//!
//! Utterance labels come from a [`Judge`]. A judge failure excludes the
//! utterance and is counted, so classified + excluded always equals total.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{Backend, BackendError, ChatMessage, ModelSettings, Purpose, Stage};
use crate::log::{EventKind, GameLog};
use crate::prompts::{PromptSet, TemplateId};
use crate::rules::{QuestCard, Role, RoleAssignment, Seat, Side, Vote};
use crate::text::{has_phrase, mentioned_seats, normalized, seat_mentions};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("no complete games to measure")]
    NoGames,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn assignment(log: &GameLog) -> Option<&RoleAssignment> {
    log.header().map(|h| &h.assignment)
}

fn complete<'a>(
    logs: &'a [GameLog],
) -> impl Iterator<Item = (&'a GameLog, &'a RoleAssignment)> + 'a {
    logs.iter()
        .filter(|l| l.is_complete())
        .filter_map(|l| assignment(l).map(|a| (l, a)))
}

pub fn winning_rate(logs: &[GameLog], side: Side) -> Result<f64, MetricError> {
    let mut games = 0;
    let mut wins = 0;
    for (log, _) in complete(logs) {
        games += 1;
        if log.winner() == Some(side) {
            wins += 1;
        }
    }
    ratio(wins, games).ok_or(MetricError::NoGames)
}

pub fn quest_engagement_rate(logs: &[GameLog], role: Role) -> Option<f64> {
    let (mut on, mut total) = (0, 0);
    for (log, a) in complete(logs) {
        let seats = a.seats_of(role);
        for e in &log.events {
            if let EventKind::QuestResult { team, .. } = &e.kind {
                for s in &seats {
                    total += 1;
                    if team.contains(s) {
                        on += 1;
                    }
                }
            }
        }
    }
    ratio(on, total)
}

pub fn failure_vote_rate(logs: &[GameLog], role: Role) -> Option<f64> {
    let (mut fails, mut cards) = (0, 0);
    for (log, a) in complete(logs) {
        for e in &log.events {
            if let EventKind::QuestCardPlay { seat, card } = e.kind {
                if a.role_of(seat) == role {
                    cards += 1;
                    if card == QuestCard::Fail {
                        fails += 1;
                    }
                }
            }
        }
    }
    ratio(fails, cards)
}

pub fn leader_approval_rate(logs: &[GameLog], role: Role) -> Option<f64> {
    let (mut agree, mut votes) = (0, 0);
    for (log, a) in complete(logs) {
        for e in &log.events {
            if let EventKind::TeamVoteBallot {
                leader,
                votes: ballot,
                ..
            } = &e.kind
            {
                if a.role_of(*leader) == role {
                    votes += ballot.len() as u64;
                    agree += ballot.iter().filter(|(_, v)| *v == Vote::Agree).count() as u64;
                }
            }
        }
    }
    ratio(agree, votes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum JudgeKind {
    BackendJudge,
    RuleJudge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Deception {
    SelfDisclosure,
    Camouflage,
    Withholding,
}

impl Deception {
    pub const ALL: [Deception; 3] = [
        Deception::SelfDisclosure,
        Deception::Camouflage,
        Deception::Withholding,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Attitude {
    Trust,
    Distrust,
    Ambivalent,
}

impl Attitude {
    pub const ALL: [Attitude; 3] = [Attitude::Trust, Attitude::Distrust, Attitude::Ambivalent];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeVerdict<L> {
    pub label: L,
    pub rationale: String,
    pub judge: JudgeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum JudgeError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("judge reply has no label: {0}")]
    Unparseable(String),
}

pub trait Judge {
    fn kind(&self) -> JudgeKind;

    /// Whether the speaker proposes themself for the quest.
    fn self_recommendation(
        &mut self,
        speaker: Seat,
        role: Role,
        response: &str,
    ) -> Result<JudgeVerdict<bool>, JudgeError>;

    fn deception(
        &mut self,
        role: Role,
        response: &str,
    ) -> Result<JudgeVerdict<Deception>, JudgeError>;

    fn attitude(
        &mut self,
        speaker: Seat,
        target: Seat,
        response: &str,
    ) -> Result<JudgeVerdict<Attitude>, JudgeError>;
}

/// Keyword judge. Deterministic and backend-free.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleJudge;

const SELF_PHRASES: [&str; 10] = [
    "include me",
    "choose me",
    "pick me",
    "select me",
    "take me",
    "myself",
    "i volunteer",
    "i will go",
    "i should go",
    "me and",
];

const DISTRUST: [&str; 12] = [
    "don't trust",
    "do not trust",
    "not trust",
    "distrust",
    "suspicious",
    "suspect",
    "doubt",
    "wary",
    "evil",
    "not sure about",
    "against",
    "lying",
];

const TRUST: [&str; 8] = [
    "trust",
    "confident in",
    "believe in",
    "rely on",
    "reliable",
    "support",
    "agree with",
    "loyal",
];

fn claimed_identity(text: &str) -> Option<Result<Role, Side>> {
    let n = normalized(text);
    let intros = ["i am", "i'm", "as a", "as the", "as"];
    for intro in intros {
        for article in ["", " a", " an", " the"] {
            for role in Role::ALL {
                let lowered = role.display_name().to_lowercase();
                let mut names = vec![lowered];
                if role == Role::LoyalServant {
                    names.push("servant".to_string());
                    names.push("loyal servant of arthur".to_string());
                }
                for name in names {
                    if has_phrase(&n, &format!("{intro}{article} {name}")) {
                        return Some(Ok(role));
                    }
                }
            }
        }
        for (word, side) in [("good", Side::Good), ("evil", Side::Evil)] {
            if has_phrase(&n, &format!("{intro} {word}"))
                || has_phrase(&n, &format!("{intro} on the {word} side"))
            {
                return Some(Err(side));
            }
        }
    }
    None
}

/// Sentences of `text` that mention `seat`.
fn sentences_about(text: &str, seat: Seat) -> String {
    text.split(['.', '!', '?', ';', '\n'])
        .filter(|s| seat_mentions(s).iter().any(|m| m.seat() == Some(seat)))
        .collect::<Vec<_>>()
        .join(". ")
}

impl Judge for RuleJudge {
    fn kind(&self) -> JudgeKind {
        JudgeKind::RuleJudge
    }

    fn self_recommendation(
        &mut self,
        speaker: Seat,
        _role: Role,
        response: &str,
    ) -> Result<JudgeVerdict<bool>, JudgeError> {
        let n = normalized(response);
        let names_self = mentioned_seats(response).contains(&speaker);
        let phrase = SELF_PHRASES.iter().find(|p| has_phrase(&n, p));
        let label = names_self || phrase.is_some();
        let rationale = match (names_self, phrase) {
            (true, _) => format!("names own seat {}", speaker.name()),
            (false, Some(p)) => format!("phrase \"{p}\""),
            _ => "no self reference".to_string(),
        };
        Ok(JudgeVerdict {
            label,
            rationale,
            judge: JudgeKind::RuleJudge,
        })
    }

    fn deception(
        &mut self,
        role: Role,
        response: &str,
    ) -> Result<JudgeVerdict<Deception>, JudgeError> {
        let (label, rationale) = match claimed_identity(response) {
            Some(Ok(claimed)) if claimed == role => {
                (Deception::SelfDisclosure, format!("claims {claimed}"))
            }
            Some(Ok(claimed)) => (Deception::Camouflage, format!("claims {claimed}")),
            Some(Err(side)) if side == role.side() => {
                (Deception::SelfDisclosure, format!("claims the {side} side"))
            }
            Some(Err(side)) => (Deception::Camouflage, format!("claims the {side} side")),
            None => (Deception::Withholding, "no identity claim".to_string()),
        };
        Ok(JudgeVerdict {
            label,
            rationale,
            judge: JudgeKind::RuleJudge,
        })
    }

    fn attitude(
        &mut self,
        _speaker: Seat,
        target: Seat,
        response: &str,
    ) -> Result<JudgeVerdict<Attitude>, JudgeError> {
        let about = normalized(&sentences_about(response, target));
        let (label, rationale) = if let Some(p) = DISTRUST.iter().find(|p| has_phrase(&about, p)) {
            (Attitude::Distrust, format!("phrase \"{p}\""))
        } else if let Some(p) = TRUST.iter().find(|p| has_phrase(&about, p)) {
            (Attitude::Trust, format!("phrase \"{p}\""))
        } else {
            (Attitude::Ambivalent, "no attitude phrase".to_string())
        };
        Ok(JudgeVerdict {
            label,
            rationale,
            judge: JudgeKind::RuleJudge,
        })
    }
}

/// Judge that asks a backend, at judge temperature.
pub struct BackendJudge<B> {
    pub backend: B,
    pub prompts: PromptSet,
    pub model: ModelSettings,
}

impl<B: Backend> BackendJudge<B> {
    pub fn new(backend: B) -> Self {
        BackendJudge {
            backend,
            prompts: PromptSet::default(),
            model: ModelSettings::default(),
        }
    }

    fn ask(
        &mut self,
        id: TemplateId,
        seat: Option<Seat>,
        slots: &[(&str, &str)],
    ) -> Result<String, JudgeError> {
        let prompt = self.prompts.get(id).render(slots).unwrap_or_default();
        let request = self.model.request(
            Purpose::Judge,
            Stage::Judge,
            seat,
            vec![ChatMessage::user(prompt)],
        );
        Ok(self.backend.complete(&request)?)
    }

    pub fn render_self_recommendation(&self, speaker: Seat, role: Role, response: &str) -> String {
        self.prompts
            .get(TemplateId::JudgeSelfRecommendation)
            .render(&[
                ("speaker", &speaker.name()),
                ("role", role.display_name()),
                ("response", response),
            ])
            .unwrap_or_default()
    }
}

/// First label word found in a judge reply.
fn first_label<L: Copy>(reply: &str, labels: &[(&str, L)]) -> Option<L> {
    let n = normalized(reply);
    labels
        .iter()
        .filter_map(|(word, l)| n.find(&format!(" {word}")).map(|pos| (pos, *l)))
        .min_by_key(|(pos, _)| *pos)
        .map(|(_, l)| l)
}

impl<B: Backend> Judge for BackendJudge<B> {
    fn kind(&self) -> JudgeKind {
        JudgeKind::BackendJudge
    }

    fn self_recommendation(
        &mut self,
        speaker: Seat,
        role: Role,
        response: &str,
    ) -> Result<JudgeVerdict<bool>, JudgeError> {
        let name = speaker.name();
        let reply = self.ask(
            TemplateId::JudgeSelfRecommendation,
            Some(speaker),
            &[
                ("speaker", &name),
                ("role", role.display_name()),
                ("response", response),
            ],
        )?;
        let label = first_label(&reply, &[("yes", true), ("no", false)])
            .ok_or(JudgeError::Unparseable(reply.clone()))?;
        Ok(JudgeVerdict {
            label,
            rationale: reply,
            judge: JudgeKind::BackendJudge,
        })
    }

    fn deception(
        &mut self,
        role: Role,
        response: &str,
    ) -> Result<JudgeVerdict<Deception>, JudgeError> {
        let reply = self.ask(
            TemplateId::JudgeDeception,
            None,
            &[("role", role.display_name()), ("response", response)],
        )?;
        let label = first_label(
            &reply,
            &[
                ("self disclosure", Deception::SelfDisclosure),
                ("camouflage", Deception::Camouflage),
                ("withholding", Deception::Withholding),
            ],
        )
        .ok_or(JudgeError::Unparseable(reply.clone()))?;
        Ok(JudgeVerdict {
            label,
            rationale: reply,
            judge: JudgeKind::BackendJudge,
        })
    }

    fn attitude(
        &mut self,
        speaker: Seat,
        target: Seat,
        response: &str,
    ) -> Result<JudgeVerdict<Attitude>, JudgeError> {
        let (s, t) = (speaker.name(), target.name());
        let reply = self.ask(
            TemplateId::JudgeAttitude,
            Some(speaker),
            &[("speaker", &s), ("target", &t), ("response", response)],
        )?;
        let label = first_label(
            &reply,
            &[
                ("distrust", Attitude::Distrust),
                ("trust", Attitude::Trust),
                ("ambivalent", Attitude::Ambivalent),
            ],
        )
        .ok_or(JudgeError::Unparseable(reply.clone()))?;
        Ok(JudgeVerdict {
            label,
            rationale: reply,
            judge: JudgeKind::BackendJudge,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coverage {
    pub total: u64,
    pub classified: u64,
    pub excluded: u64,
}

impl Coverage {
    fn add<T, E>(&mut self, r: &Result<T, E>) {
        self.total += 1;
        match r {
            Ok(_) => self.classified += 1,
            Err(_) => self.excluded += 1,
        }
    }

    fn merge(&mut self, other: Coverage) {
        self.total += other.total;
        self.classified += other.classified;
        self.excluded += other.excluded;
    }
}

/// Label counts and their shares over classified items.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution<L: Ord> {
    pub counts: BTreeMap<L, u64>,
    pub shares: BTreeMap<L, f64>,
}

impl<L: Ord + Copy> Distribution<L> {
    fn from_counts(labels: &[L], counts: &BTreeMap<L, u64>) -> Self {
        let total: u64 = counts.values().sum();
        let counts: BTreeMap<L, u64> = labels
            .iter()
            .map(|l| (*l, counts.get(l).copied().unwrap_or(0)))
            .collect();
        let shares = if total == 0 {
            BTreeMap::new()
        } else {
            counts
                .iter()
                .map(|(l, c)| (*l, *c as f64 / total as f64))
                .collect()
        };
        Distribution { counts, shares }
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfRecommendation {
    pub rate: f64,
    /// Absent when the role never recommended itself.
    pub success_rate: Option<f64>,
}

/// Self-recommendation over every round each seat of `role` played.
pub fn self_recommendation(
    logs: &[GameLog],
    role: Role,
    judge: &mut dyn Judge,
) -> (Option<SelfRecommendation>, Coverage) {
    let mut coverage = Coverage::default();
    let (mut rounds, mut recommended, mut succeeded) = (0u64, 0u64, 0u64);
    for (log, a) in complete(logs) {
        let quests: BTreeMap<u8, Vec<Seat>> = log
            .events
            .iter()
            .filter_map(|e| match &e.kind {
                EventKind::QuestResult { team, .. } => Some((e.round, team.clone())),
                _ => None,
            })
            .collect();
        for seat in a.seats_of(role) {
            for (round, team) in &quests {
                rounds += 1;
                let mut hit = false;
                for e in log.events.iter().filter(|e| e.round == *round) {
                    if let EventKind::PublicResponse { seat: s, text } = &e.kind {
                        if *s == seat {
                            let r = judge.self_recommendation(seat, role, text);
                            coverage.add(&r);
                            hit |= matches!(r, Ok(JudgeVerdict { label: true, .. }));
                        }
                    }
                }
                if hit {
                    recommended += 1;
                    if team.contains(&seat) {
                        succeeded += 1;
                    }
                }
            }
        }
    }
    let result = ratio(recommended, rounds).map(|rate| SelfRecommendation {
        rate,
        success_rate: ratio(succeeded, recommended),
    });
    (result, coverage)
}

/// The first public reply of each seat in round 1, with the seat's role.
pub fn first_round_responses(log: &GameLog) -> Vec<(Seat, Role, &str)> {
    let Some(a) = assignment(log) else {
        return Vec::new();
    };
    let mut seen: Vec<Seat> = Vec::new();
    let mut out = Vec::new();
    for e in log.events.iter().filter(|e| e.round == 1) {
        if let EventKind::PublicResponse { seat, text } = &e.kind {
            if !seen.contains(seat) {
                seen.push(*seat);
                out.push((*seat, a.role_of(*seat), text.as_str()));
            }
        }
    }
    out
}

pub type AttitudeMatrix = BTreeMap<Role, BTreeMap<Role, Distribution<Attitude>>>;

pub fn attitude_matrix(logs: &[GameLog], judge: &mut dyn Judge) -> (AttitudeMatrix, Coverage) {
    let mut counts: BTreeMap<Role, BTreeMap<Role, BTreeMap<Attitude, u64>>> = BTreeMap::new();
    let mut coverage = Coverage::default();
    for (log, a) in complete(logs) {
        for e in &log.events {
            if let EventKind::PublicResponse { seat, text } = &e.kind {
                for target in mentioned_seats(text).into_iter().filter(|t| t != seat) {
                    let r = judge.attitude(*seat, target, text);
                    coverage.add(&r);
                    if let Ok(v) = r {
                        *counts
                            .entry(a.role_of(*seat))
                            .or_default()
                            .entry(a.role_of(target))
                            .or_default()
                            .entry(v.label)
                            .or_default() += 1;
                    }
                }
            }
        }
    }
    let matrix = counts
        .into_iter()
        .map(|(speaker, row)| {
            let row = row
                .into_iter()
                .map(|(target, c)| (target, Distribution::from_counts(&Attitude::ALL, &c)))
                .collect();
            (speaker, row)
        })
        .collect();
    (matrix, coverage)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoleMetrics {
    pub quest_engagement_rate: Option<f64>,
    pub failure_vote_rate: Option<f64>,
    pub leader_approval_rate: Option<f64>,
    pub self_recommendation: Option<SelfRecommendation>,
    pub deception: Distribution<Deception>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub self_recommendation: Coverage,
    pub deception: Coverage,
    pub attitude: Coverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub games: usize,
    /// Incomplete logs left out of every denominator.
    pub excluded_games: usize,
    pub judge: JudgeKind,
    pub winning_rate: BTreeMap<Side, f64>,
    pub roles: BTreeMap<Role, RoleMetrics>,
    pub attitude: AttitudeMatrix,
    pub coverage: CoverageReport,
}

pub fn build_report(logs: &[GameLog], judge: &mut dyn Judge) -> Result<MetricsReport, MetricError> {
    let games = complete(logs).count();
    if games == 0 {
        return Err(MetricError::NoGames);
    }
    let mut coverage = CoverageReport::default();
    let mut winning = BTreeMap::new();
    for side in [Side::Good, Side::Evil] {
        winning.insert(side, winning_rate(logs, side)?);
    }
    let mut deception: BTreeMap<Role, BTreeMap<Deception, u64>> = BTreeMap::new();
    for (log, _) in complete(logs) {
        for (_, role, text) in first_round_responses(log) {
            let r = judge.deception(role, text);
            coverage.deception.add(&r);
            if let Ok(v) = r {
                *deception
                    .entry(role)
                    .or_default()
                    .entry(v.label)
                    .or_default() += 1;
            }
        }
    }
    let mut roles = BTreeMap::new();
    for role in Role::ALL {
        let (sr, cov) = self_recommendation(logs, role, judge);
        coverage.self_recommendation.merge(cov);
        let metrics = RoleMetrics {
            quest_engagement_rate: quest_engagement_rate(logs, role),
            failure_vote_rate: failure_vote_rate(logs, role),
            leader_approval_rate: leader_approval_rate(logs, role),
            self_recommendation: sr,
            deception: Distribution::from_counts(
                &Deception::ALL,
                &deception.remove(&role).unwrap_or_default(),
            ),
        };
        roles.insert(role, metrics);
    }
    let (attitude, cov) = attitude_matrix(logs, judge);
    coverage.attitude = cov;
    Ok(MetricsReport {
        games,
        excluded_games: logs.len() - games,
        judge: judge.kind(),
        winning_rate: winning,
        roles,
        attitude,
        coverage,
    })
}

fn cell(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.3}"),
        None => "-".to_string(),
    }
}

fn share<L: Ord + Copy>(d: &Distribution<L>, l: L) -> Option<f64> {
    d.shares.get(&l).copied()
}

/// Aligned plain-text rendering of a report.
pub fn render_table(report: &MetricsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "games: {} (excluded: {})  judge: {:?}",
        report.games, report.excluded_games, report.judge
    );
    for (side, wr) in &report.winning_rate {
        let _ = writeln!(out, "winning rate {:<5} {:.3}", side.to_string(), wr);
    }
    let _ = writeln!(out);
    let header = [
        "role",
        "QER",
        "FVR",
        "LAR",
        "self-rec",
        "self-succ",
        "disclose",
        "camouflage",
        "withhold",
    ];
    let mut rows: Vec<[String; 9]> = Vec::new();
    for (role, m) in &report.roles {
        let sr = m.self_recommendation;
        rows.push([
            role.display_name().to_string(),
            cell(m.quest_engagement_rate),
            cell(m.failure_vote_rate),
            cell(m.leader_approval_rate),
            cell(sr.map(|s| s.rate)),
            cell(sr.and_then(|s| s.success_rate)),
            cell(share(&m.deception, Deception::SelfDisclosure)),
            cell(share(&m.deception, Deception::Camouflage)),
            cell(share(&m.deception, Deception::Withholding)),
        ]);
    }
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &rows {
        for (w, c) in widths.iter_mut().zip(row) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
            if i == 0 {
                let _ = write!(s, "{c:<w$}");
            } else {
                let _ = write!(s, "  {c:>w$}");
            }
        }
        s.push('\n');
        s
    };
    out.push_str(&line(&header.map(String::from)));
    for row in &rows {
        out.push_str(&line(row));
    }
    if !report.attitude.is_empty() {
        let _ = writeln!(
            out,
            "\nattitude (speaker -> target: trust / distrust / ambivalent)"
        );
        for (speaker, row) in &report.attitude {
            for (target, d) in row {
                let _ = writeln!(
                    out,
                    "{:<13} -> {:<13} {} / {} / {}  (n={})",
                    speaker.display_name(),
                    target.display_name(),
                    cell(share(d, Attitude::Trust)),
                    cell(share(d, Attitude::Distrust)),
                    cell(share(d, Attitude::Ambivalent)),
                    d.total()
                );
            }
        }
    }
    let c = &report.coverage;
    let _ = writeln!(
        out,
        "\ncoverage classified/total: self-rec {}/{}  deception {}/{}  attitude {}/{}",
        c.self_recommendation.classified,
        c.self_recommendation.total,
        c.deception.classified,
        c.deception.total,
        c.attitude.classified,
        c.attitude.total
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ScriptedBackend;

    fn seat(i: u8) -> Seat {
        Seat::new(i).unwrap()
    }

    #[test]
    fn rule_judge_deception() {
        let mut j = RuleJudge;
        assert_eq!(
            j.deception(Role::Merlin, "I am Merlin.").unwrap().label,
            Deception::SelfDisclosure
        );
        assert_eq!(
            j.deception(Role::Morgana, "As a loyal servant, I support this team.")
                .unwrap()
                .label,
            Deception::Camouflage
        );
        assert_eq!(
            j.deception(Role::Assassin, "I think Player 2 should go.")
                .unwrap()
                .label,
            Deception::Withholding
        );
    }

    #[test]
    fn rule_judge_attitude() {
        let mut j = RuleJudge;
        assert_eq!(
            j.attitude(seat(1), seat(4), "I trust Player4.")
                .unwrap()
                .label,
            Attitude::Trust
        );
        assert_eq!(
            j.attitude(seat(1), seat(4), "I don't trust Player 4 at all.")
                .unwrap()
                .label,
            Attitude::Distrust
        );
        assert_eq!(
            j.attitude(seat(1), seat(4), "Player 2 is suspicious. Player 4 spoke.")
                .unwrap()
                .label,
            Attitude::Ambivalent
        );
    }

    #[test]
    fn rule_judge_self_recommendation() {
        let mut j = RuleJudge;
        assert!(
            j.self_recommendation(seat(3), Role::Morgana, "I choose Player 3 and Player 1.")
                .unwrap()
                .label
        );
        assert!(
            j.self_recommendation(seat(3), Role::Morgana, "Please include me.")
                .unwrap()
                .label
        );
        assert!(
            !j.self_recommendation(seat(3), Role::Morgana, "Player 1 and Player 2.")
                .unwrap()
                .label
        );
    }

    #[test]
    fn backend_judge_parses_and_fails_cleanly() {
        let mut b = ScriptedBackend::new();
        b.extend(Purpose::Judge, ["Label: camouflage", "no idea"]);
        let mut j = BackendJudge::new(&mut b);
        assert_eq!(
            j.deception(Role::Morgana, "x").unwrap().label,
            Deception::Camouflage
        );
        assert!(matches!(
            j.deception(Role::Morgana, "x"),
            Err(JudgeError::Unparseable(_))
        ));
        assert!(matches!(
            j.attitude(seat(1), seat(2), "x"),
            Err(JudgeError::Backend(_))
        ));
    }

    #[test]
    fn judge_prompt_quotes_response() {
        let j = BackendJudge::new(ScriptedBackend::new());
        let p =
            j.render_self_recommendation(seat(2), Role::Percival, "I should lead with Player 2.");
        assert!(p.contains("I should lead with Player 2."));
    }

    #[test]
    fn empty_logs_are_an_error() {
        assert_eq!(winning_rate(&[], Side::Good), Err(MetricError::NoGames));
        assert!(build_report(&[], &mut RuleJudge).is_err());
    }
}
