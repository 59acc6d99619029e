//! Offline responder that lets every module run without a live model.
//!
//! Replies depend only on the request, so games driven by it are
//! reproducible. They are plausible enough to exercise the extraction
//! layer and the judges, not to play well.

use avalon_core::backend::{ChatRole, CompletionRequest, Purpose, ScriptedBackend, Stage};
use avalon_core::rules::Seat;

fn mix(request: &CompletionRequest) -> u64 {
    let d = request.digest();
    u64::from_str_radix(&d[..16], 16).unwrap_or(0)
}

fn last_user(request: &CompletionRequest) -> &str {
    request
        .messages
        .iter()
        .rev()
        .find(|m| m.role == ChatRole::User)
        .map(|m| m.content.as_str())
        .unwrap_or("")
}

/// The host's instruction inside an action or reask prompt, else the whole prompt.
fn instruction(prompt: &str) -> &str {
    match prompt.rfind("Host's Instruction:") {
        Some(i) => &prompt[i..],
        None => prompt,
    }
}

fn required_players(text: &str) -> usize {
    if text.contains("choose 3") {
        3
    } else {
        2
    }
}

fn pick(own: Option<Seat>, n: usize, h: u64) -> Vec<Seat> {
    let mut out: Vec<Seat> = own.into_iter().collect();
    let mut k = h;
    while out.len() < n {
        let s = Seat::new((k % 6) as u8 + 1).unwrap_or(Seat::new(1).expect("seat 1"));
        if !out.contains(&s) {
            out.push(s);
        }
        k = k / 6 + 7;
    }
    out
}

fn names(seats: &[Seat]) -> String {
    seats
        .iter()
        .map(|s| s.name())
        .collect::<Vec<_>>()
        .join(" and ")
}

fn action_reply(request: &CompletionRequest, h: u64) -> String {
    let text = instruction(last_user(request)).to_lowercase();
    let own = request.seat;
    if text.contains("players to go on the quest") {
        format!(
            "I choose {}.",
            names(&pick(own, required_players(&text), h))
        )
    } else if text.contains("vote agree or disagree") {
        if h.is_multiple_of(4) {
            "I disagree with this team.".to_string()
        } else {
            "I agree with this team.".to_string()
        }
    } else if text.contains("succeed or fail") {
        if h.is_multiple_of(5) {
            "I will make the quest succeed.".to_string()
        } else {
            "I will make the quest fail.".to_string()
        }
    } else if text.contains("believe is merlin") {
        if text.contains("may also decline") && !h.is_multiple_of(3) {
            "I decline and wait.".to_string()
        } else {
            let others: Vec<Seat> = Seat::all().filter(|s| Some(*s) != own).collect();
            others[(h % others.len() as u64) as usize].name()
        }
    } else {
        "I choose to remain silent.".to_string()
    }
}

fn response_reply(request: &CompletionRequest, h: u64) -> String {
    let other = pick(request.seat, 2, h)[1].name();
    match h % 4 {
        0 => format!("I trust {other}; their choices so far look honest to me."),
        1 => format!("I suspect {other}. Their votes do not add up."),
        2 => "I am a loyal servant and I want a safe team. Please include me.".to_string(),
        _ => "Let us look carefully at the voting before we decide.".to_string(),
    }
}

/// Reply for one request.
pub fn reply(request: &CompletionRequest) -> String {
    let h = mix(request);
    match (request.purpose, request.stage) {
        (Purpose::Extractor, _) => "unclear".to_string(),
        (Purpose::Judge, _) => "unclear".to_string(),
        (_, Stage::Summary | Stage::EmergencySummary) => {
            "The previous rounds were discussed; teams were proposed and voted on.".to_string()
        }
        (_, Stage::Analysis) => "No player has been confirmed yet; voting patterns need watching.".to_string(),
        (_, Stage::Planning) => {
            "Round 1: observe votes. Round 2: back consistent players. Round 3: press suspects.".to_string()
        }
        (_, Stage::Action | Stage::Reask) => action_reply(request, h),
        (_, Stage::Response) => response_reply(request, h),
        (_, Stage::Suggestions) => "1. Watch who approves failed teams.\n\
             2. Keep your claims consistent across rounds.\n\
             3. Propose teams built from players with clean records."
            .to_string(),
        (_, Stage::StrategyRewrite) => {
            "Track votes and quest results, keep claims consistent, and build teams from trusted players.".to_string()
        }
        (_, Stage::OtherRoles) => "This role argued for small, trusted teams and voted against outsiders.".to_string(),
        (_, Stage::Extraction | Stage::Judge) => "unclear".to_string(),
    }
}

pub fn canned_backend() -> ScriptedBackend {
    ScriptedBackend::with_responder(|request, _| reply(request))
}

#[cfg(test)]
mod tests {
    use super::*;
    use avalon_core::backend::{ChatMessage, ModelSettings};

    fn action(text: &str, seat: u8) -> CompletionRequest {
        ModelSettings::default().request(
            Purpose::Agent,
            Stage::Action,
            Seat::new(seat),
            vec![
                ChatMessage::system("sys"),
                ChatMessage::user(format!("plan...\nHost's Instruction: {text}.")),
            ],
        )
    }

    #[test]
    fn proposals_name_the_right_count_with_self_first() {
        let r = reply(&action(
            "Player 2, you are the leader. Please choose 3 players to go on the quest",
            2,
        ));
        let seats = avalon_core::text::mentioned_seats(&r);
        assert_eq!(seats.len(), 3);
        assert_eq!(seats[0], Seat::new(2).unwrap());
    }

    #[test]
    fn votes_and_cards_parse() {
        let v = reply(&action(
            "Player 1, please vote agree or disagree on the team Player 1, Player 2",
            1,
        ));
        assert!(avalon_core::extraction::parse_vote(&v).is_some());
        let c = reply(&action("Do you want the quest to succeed or fail?", 5));
        assert!(avalon_core::extraction::parse_quest_card(&c).is_some());
    }

    #[test]
    fn deterministic() {
        let r = action("please discuss", 3);
        assert_eq!(reply(&r), reply(&r));
    }
}
