//! Six-player Avalon with LLM-driven agents.
//!
//! This crate is `no_std` (it needs `alloc`). It holds everything that is
//! pure logic: the rules engine, per-agent memory, prompt templates, the
//! analysis/plan/action/response pipeline, action extraction, cross-game
//! experience learning, the host loop that drives one game, and the metrics
//! computed from game logs. File formats, HTTP and the command line live in
//! the `avalon` companion crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod agent;
pub mod analytics;
pub mod backend;
pub mod bots;
pub mod experience;
pub mod extraction;
pub mod host;
pub mod log;
pub mod memory;
pub mod prompts;
pub mod rules;
pub mod text;

pub use rules::{Role, Seat, Side};
