//! Small text scanners shared by extraction, experience hygiene and the rule judge.

use alloc::string::String;
use alloc::vec::Vec;

use crate::rules::Seat;

/// One "Player 3" / "player3" / "seat 3" style reference in a text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeatMention {
    /// Byte range of the whole token, keyword included.
    pub start: usize,
    pub end: usize,
    pub number: u32,
}

impl SeatMention {
    pub fn seat(&self) -> Option<Seat> {
        u8::try_from(self.number).ok().and_then(Seat::new)
    }
}

const KEYWORDS: [&[u8]; 2] = [b"player", b"seat"];

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// All seat references in order of appearance.
pub fn seat_mentions(text: &str) -> Vec<SeatMention> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let boundary = i == 0 || !is_word_byte(bytes[i - 1]);
        let keyword = if boundary {
            KEYWORDS.iter().find(|k| {
                bytes.len() >= i + k.len() && bytes[i..i + k.len()].eq_ignore_ascii_case(k)
            })
        } else {
            None
        };
        let Some(keyword) = keyword else {
            i += 1;
            continue;
        };
        let mut j = i + keyword.len();
        let mut gap = 0;
        while j < bytes.len() && gap < 3 && matches!(bytes[j], b' ' | b'#' | b'_' | b'-' | b':') {
            j += 1;
            gap += 1;
        }
        let digits_start = j;
        while j < bytes.len() && bytes[j].is_ascii_digit() {
            j += 1;
        }
        let trailing_ok = j == bytes.len() || !bytes[j].is_ascii_alphabetic();
        if j > digits_start && j - digits_start <= 3 && trailing_ok {
            let number = text[digits_start..j].parse().unwrap_or(u32::MAX);
            out.push(SeatMention {
                start: i,
                end: j,
                number,
            });
            i = j;
        } else {
            i += keyword.len();
        }
    }
    out
}

/// Distinct in-range seats, first mention first.
pub fn mentioned_seats(text: &str) -> Vec<Seat> {
    let mut seats = Vec::new();
    for seat in seat_mentions(text).iter().filter_map(SeatMention::seat) {
        if !seats.contains(&seat) {
            seats.push(seat);
        }
    }
    seats
}

pub fn contains_seat_token(text: &str) -> bool {
    !seat_mentions(text).is_empty()
}

/// Rewrites every seat reference with `replace`.
pub fn replace_seat_mentions(
    text: &str,
    mut replace: impl FnMut(&SeatMention) -> String,
) -> String {
    let mut out = String::with_capacity(text.len());
    let mut last = 0;
    for m in seat_mentions(text) {
        out.push_str(&text[last..m.start]);
        out.push_str(&replace(&m));
        last = m.end;
    }
    out.push_str(&text[last..]);
    out
}

/// Cuts `text` to at most `max` characters.
pub fn truncate_chars(text: &str, max: usize) -> &str {
    match text.char_indices().nth(max) {
        Some((idx, _)) => &text[..idx],
        None => text,
    }
}

/// ASCII-lowercased copy with punctuation folded to spaces, padded with a
/// leading and trailing space so `" word "` lookups respect word edges.
pub fn normalized(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push(' ');
    for c in text.chars() {
        if c.is_alphanumeric() || c == '\'' {
            out.extend(c.to_lowercase());
        } else if c == '’' {
            out.push('\'');
        } else {
            out.push(' ');
        }
    }
    out.push(' ');
    out
}

/// Word or phrase lookup on text produced by [`normalized`].
pub fn has_phrase(normalized: &str, phrase: &str) -> bool {
    let mut needle = String::with_capacity(phrase.len() + 2);
    needle.push(' ');
    needle.push_str(phrase);
    needle.push(' ');
    normalized.contains(needle.as_str())
}

/// Same as [`has_phrase`] but also accepts the phrase as a word prefix
/// ("succeed" matches "succeeded").
pub fn has_prefix_word(normalized: &str, prefix: &str) -> bool {
    let mut needle = String::with_capacity(prefix.len() + 1);
    needle.push(' ');
    needle.push_str(prefix);
    normalized.contains(needle.as_str())
}
