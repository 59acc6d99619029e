use avalon_core::backend::{ChatRole, CompletionRequest, Purpose, ScriptedBackend, Stage};
use avalon_core::host::{run_game, GameSetup};
use avalon_core::log::{EventKind, WinReason};
use avalon_core::rules::{assign_roles, GameConfig, QuestOutcome, Role, Side};

fn instruction(req: &CompletionRequest) -> String {
    let user = req
        .messages
        .iter()
        .rev()
        .find(|m| m.role == ChatRole::User)
        .unwrap();
    user.content
        .rsplit("Host's Instruction:")
        .next()
        .unwrap_or("")
        .to_lowercase()
}

/// Everyone agrees; proposals always include an evil seat; evil always fails.
fn saboteur_script(seed: u64) -> ScriptedBackend {
    let a = assign_roles(seed);
    let evil = a.seat_of(Role::Morgana);
    let other = a.seat_of(Role::Merlin);
    let third = a.seat_of(Role::Percival);
    ScriptedBackend::with_responder(move |req, _| {
        if req.purpose != Purpose::Agent || !matches!(req.stage, Stage::Action | Stage::Reask) {
            return "noted".to_string();
        }
        let text = instruction(req);
        if text.contains("players to go on the quest") {
            format!(
                "I choose {}, {} and {}.",
                evil.name(),
                other.name(),
                third.name()
            )
        } else if text.contains("vote agree or disagree") {
            "I agree.".to_string()
        } else if text.contains("succeed or fail") {
            "Fail.".to_string()
        } else if text.contains("believe is merlin") {
            "I decline.".to_string()
        } else {
            "I stay silent.".to_string()
        }
    })
}

#[test]
fn evil_on_every_team_failing_wins_in_three_rounds() {
    for seed in 0..4 {
        let setup = GameSetup::new("s", GameConfig::new(seed));
        let record = run_game(&setup, &mut saboteur_script(seed)).unwrap();
        assert!(record.failure.is_none(), "{:?}", record.failure);
        let s = &record.state;
        assert_eq!(s.winner, Some(Side::Evil));
        assert_eq!(s.evil_points, 3);
        assert_eq!(s.quest_history.len(), 3);
        assert!(s
            .quest_history
            .iter()
            .all(|q| q.outcome == QuestOutcome::Failed));
        let reason = record.log.events.iter().find_map(|e| match &e.kind {
            EventKind::GameOver { reason, .. } => Some(*reason),
            _ => None,
        });
        assert_eq!(reason, Some(WinReason::ThreeQuestsFailed));
    }
}

#[test]
fn unanimous_agreement_uses_one_proposal_per_round() {
    let setup = GameSetup::new("u", GameConfig::new(11));
    let record = run_game(&setup, &mut saboteur_script(11)).unwrap();
    assert!(!record.state.quest_history.is_empty());
    for q in &record.state.quest_history {
        assert_eq!(q.proposal_attempts_used, 1);
        assert_eq!(q.team_votes.len(), 6);
    }
}

#[test]
fn pipeline_games_are_byte_stable() {
    let run = || {
        let setup = GameSetup::new("b", GameConfig::new(5));
        run_game(&setup, &mut saboteur_script(5))
            .unwrap()
            .log
            .to_jsonl()
    };
    assert_eq!(run(), run());
}
