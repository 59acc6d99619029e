//! Per-agent memory pools and the round-boundary summary roll.
//!
//! A store holds the rolled summary of every finished round plus the objects
//! recorded during the current round. At a round boundary the summarizer sees
//! the old summary followed by the round's objects serialized as JSON, and
//! its output becomes the new summary.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rules::Seat;
use crate::text::truncate_chars;

/// Upper bound on a stored summary, in characters.
pub const SUMMARY_CHAR_CAP: usize = 4_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Speaker {
    Host,
    Player(Seat),
}

impl Speaker {
    pub fn name(&self) -> String {
        match self {
            Speaker::Host => "Host".to_string(),
            Speaker::Player(seat) => seat.name(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Visibility {
    Public,
    Private { owner: Seat },
}

impl Visibility {
    pub fn readable_by(&self, seat: Seat) -> bool {
        match self {
            Visibility::Public => true,
            Visibility::Private { owner } => *owner == seat,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryObject {
    pub speaker: Speaker,
    pub content: String,
    pub round: u8,
    pub visibility: Visibility,
}

impl MemoryObject {
    pub fn public(speaker: Speaker, content: impl Into<String>, round: u8) -> Self {
        MemoryObject {
            speaker,
            content: content.into(),
            round,
            visibility: Visibility::Public,
        }
    }

    pub fn private(speaker: Speaker, content: impl Into<String>, round: u8, owner: Seat) -> Self {
        MemoryObject {
            speaker,
            content: content.into(),
            round,
            visibility: Visibility::Private { owner },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MemoryError {
    #[error("private object owned by {owner} offered to the store of {store}")]
    VisibilityViolation { owner: Seat, store: Seat },
    #[error("object from round {object} recorded during round {store}")]
    RoundMismatch { object: u8, store: u8 },
}

/// Entry shape fed to the summarization prompt.
#[derive(Serialize)]
struct ConversationEntry<'a> {
    message: &'a str,
    name: String,
    message_type: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryStore {
    owner: Seat,
    round: u8,
    rolled_summary: String,
    current_objects: Vec<MemoryObject>,
}

/// Read-only view handed to the agent pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryView<'a> {
    pub summary: &'a str,
    pub objects: &'a [MemoryObject],
}

impl MemoryView<'_> {
    /// Text for the "Summary" slot of the module prompts.
    pub fn render(&self) -> String {
        let mut out = String::new();
        if !self.summary.is_empty() {
            out.push_str(self.summary);
        }
        if !self.objects.is_empty() {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str("Current round:");
            for obj in self.objects {
                let tag = match obj.visibility {
                    Visibility::Public => "",
                    Visibility::Private { .. } => " (private)",
                };
                let _ = write!(out, "\n{}{}: {}", obj.speaker.name(), tag, obj.content);
            }
        }
        out
    }
}

impl MemoryStore {
    pub fn new(owner: Seat) -> Self {
        MemoryStore {
            owner,
            round: 1,
            rolled_summary: String::new(),
            current_objects: Vec::new(),
        }
    }

    pub fn owner(&self) -> Seat {
        self.owner
    }

    pub fn round(&self) -> u8 {
        self.round
    }

    pub fn rolled_summary(&self) -> &str {
        &self.rolled_summary
    }

    pub fn record(&mut self, object: MemoryObject) -> Result<(), MemoryError> {
        if let Visibility::Private { owner } = object.visibility {
            if owner != self.owner {
                return Err(MemoryError::VisibilityViolation {
                    owner,
                    store: self.owner,
                });
            }
        }
        if object.round != self.round {
            return Err(MemoryError::RoundMismatch {
                object: object.round,
                store: self.round,
            });
        }
        self.current_objects.push(object);
        Ok(())
    }

    pub fn visible_view(&self) -> MemoryView<'_> {
        MemoryView {
            summary: &self.rolled_summary,
            objects: &self.current_objects,
        }
    }

    /// Current-round objects as the JSON array the summarization prompt expects.
    pub fn serialize_current(&self) -> String {
        let entries: Vec<ConversationEntry<'_>> = self
            .current_objects
            .iter()
            .map(|o| ConversationEntry {
                message: &o.content,
                name: o.speaker.name(),
                message_type: match o.visibility {
                    Visibility::Public => "public",
                    Visibility::Private { .. } => "private",
                },
            })
            .collect();
        serde_json::to_string(&entries).unwrap_or_default()
    }

    /// Old summary followed by the serialized current round.
    pub fn summarization_input(&self) -> String {
        let current = self.serialize_current();
        if self.rolled_summary.is_empty() {
            current
        } else {
            let mut out = String::with_capacity(self.rolled_summary.len() + 1 + current.len());
            out.push_str(&self.rolled_summary);
            out.push('\n');
            out.push_str(&current);
            out
        }
    }

    /// Closes the current round. On summarizer failure nothing changes.
    pub fn roll_round<E>(
        &mut self,
        summarizer: impl FnOnce(&str) -> Result<String, E>,
    ) -> Result<(), E> {
        self.compact(summarizer)?;
        self.round = self.round.saturating_add(1);
        Ok(())
    }

    /// Folds the current objects into the summary without ending the round.
    /// Used when a prompt outgrows the character budget.
    pub fn compact<E>(
        &mut self,
        summarizer: impl FnOnce(&str) -> Result<String, E>,
    ) -> Result<(), E> {
        let summary = summarizer(&self.summarization_input())?;
        self.rolled_summary = truncate_chars(&summary, SUMMARY_CHAR_CAP).to_string();
        self.current_objects.clear();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::convert::Infallible;

    fn seat(i: u8) -> Seat {
        Seat::new(i).unwrap()
    }

    fn identity(s: &str) -> Result<String, Infallible> {
        Ok(s.to_string())
    }

    #[test]
    fn record_appends() {
        let mut store = MemoryStore::new(seat(1));
        store
            .record(MemoryObject::public(Speaker::Host, "Discuss the team.", 1))
            .unwrap();
        assert_eq!(store.visible_view().objects.len(), 1);
    }

    #[test]
    fn foreign_private_rejected() {
        let mut store = MemoryStore::new(seat(5));
        let err = store
            .record(MemoryObject::private(Speaker::Host, "secret", 1, seat(3)))
            .unwrap_err();
        assert_eq!(
            err,
            MemoryError::VisibilityViolation {
                owner: seat(3),
                store: seat(5)
            }
        );
        assert!(store.visible_view().objects.is_empty());
    }

    #[test]
    fn reveal_message_is_private_to_owner() {
        let mut merlin = MemoryStore::new(seat(2));
        let msg = MemoryObject::private(
            Speaker::Host,
            "Merlin, open your eyes and see the agents of evil",
            1,
            seat(2),
        );
        merlin.record(msg.clone()).unwrap();
        assert_eq!(merlin.visible_view().objects, &[msg]);
    }

    #[test]
    fn round_mismatch_rejected() {
        let mut store = MemoryStore::new(seat(1));
        assert!(matches!(
            store.record(MemoryObject::public(Speaker::Host, "x", 2)),
            Err(MemoryError::RoundMismatch { .. })
        ));
    }

    #[test]
    fn empty_view() {
        let store = MemoryStore::new(seat(1));
        let view = store.visible_view();
        assert_eq!(view.summary, "");
        assert!(view.objects.is_empty());
        assert_eq!(view.render(), "");
    }

    #[test]
    fn identity_roll_keeps_serialization() {
        let mut store = MemoryStore::new(seat(1));
        store
            .record(MemoryObject::public(Speaker::Host, "Hello", 1))
            .unwrap();
        store
            .record(MemoryObject::private(
                Speaker::Host,
                "You are Merlin",
                1,
                seat(1),
            ))
            .unwrap();
        let expected = store.serialize_current();
        assert_eq!(
            expected,
            r#"[{"message":"Hello","name":"Host","message_type":"public"},{"message":"You are Merlin","name":"Host","message_type":"private"}]"#
        );
        store.roll_round(identity).unwrap();
        assert_eq!(store.rolled_summary(), expected);
        assert!(store.visible_view().objects.is_empty());
        assert_eq!(store.round(), 2);
    }

    #[test]
    fn mock_summary_replaces_round() {
        let mut store = MemoryStore::new(seat(3));
        store
            .record(MemoryObject::public(
                Speaker::Player(seat(4)),
                "I trust Player 1",
                1,
            ))
            .unwrap();
        store
            .roll_round(|_| Ok::<_, Infallible>("R1-SUMMARY".to_string()))
            .unwrap();
        assert_eq!(store.visible_view().summary, "R1-SUMMARY");
        assert!(store.visible_view().objects.is_empty());
    }

    #[test]
    fn empty_round_still_rolls() {
        let mut store = MemoryStore::new(seat(3));
        store
            .roll_round(|_| Ok::<_, Infallible>("S1".to_string()))
            .unwrap();
        let mut seen = String::new();
        store
            .roll_round(|input| {
                seen = input.to_string();
                Ok::<_, Infallible>("S2".to_string())
            })
            .unwrap();
        assert_eq!(seen, "S1\n[]");
        assert_eq!(store.rolled_summary(), "S2");
    }

    #[test]
    fn failed_summary_leaves_store_untouched() {
        let mut store = MemoryStore::new(seat(3));
        store
            .record(MemoryObject::public(Speaker::Host, "x", 1))
            .unwrap();
        let before = store.clone();
        assert_eq!(store.roll_round(|_| Err("down")), Err("down"));
        assert_eq!(store, before);
    }

    #[test]
    fn summary_capped() {
        let mut store = MemoryStore::new(seat(1));
        let long = "a".repeat(SUMMARY_CHAR_CAP * 2);
        store
            .roll_round(|_| Ok::<_, Infallible>(long.clone()))
            .unwrap();
        assert_eq!(store.rolled_summary().chars().count(), SUMMARY_CHAR_CAP);
    }
}
