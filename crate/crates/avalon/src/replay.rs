//! Re-driving a recorded game from its exchange log.

use avalon_core::backend::{BackendError, Exchange, ReplayBackend};
use avalon_core::host::{run_game, HostError};
use avalon_core::log::{EventKind, GameLog, LogError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("game log: {0}")]
    Log(#[from] LogError),
    #[error("game log has no header")]
    MissingHeader,
    #[error("{0}")]
    Backend(BackendError),
    #[error("replay setup failed: {0}")]
    Host(HostError),
    #[error("regenerated log differs from the recording at event {seq}")]
    Diverged { seq: u64 },
    #[error("{0} recorded exchange(s) were never requested")]
    Unused(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplaySummary {
    pub game_id: String,
    pub events: usize,
    pub exchanges: usize,
}

fn first_difference(a: &GameLog, b: &GameLog) -> u64 {
    let n = a.events.len().min(b.events.len());
    (0..n).find(|&i| a.events[i] != b.events[i]).unwrap_or(n) as u64
}

/// Events other than a trailing abort marker.
fn body(log: &GameLog) -> &[avalon_core::log::GameEvent] {
    match log.events.last().map(|e| &e.kind) {
        Some(EventKind::Aborted { .. }) => &log.events[..log.events.len() - 1],
        _ => &log.events,
    }
}

/// Replays `recorded` against `exchanges` and checks that the regenerated
/// log is byte-identical.
///
/// A recording that ended in an abort replays up to the point where the
/// exchange log runs out; its abort reason is not compared.
pub fn replay_game(
    recorded_text: &str,
    exchanges: Vec<Exchange>,
) -> Result<ReplaySummary, ReplayError> {
    let recorded = GameLog::from_jsonl(recorded_text)?;
    let header = recorded.header().ok_or(ReplayError::MissingHeader)?;
    let setup = header.setup.clone();
    let total = exchanges.len();
    let mut backend = ReplayBackend::new(exchanges);
    let record = run_game(&setup, &mut backend).map_err(ReplayError::Host)?;
    let aborted_original = matches!(
        recorded.events.last().map(|e| &e.kind),
        Some(EventKind::Aborted { .. })
    );
    match record.failure {
        None => {}
        Some(HostError::Backend(BackendError::ReplayExhausted { .. })) if aborted_original => {
            if body(&record.log) != body(&recorded) {
                return Err(ReplayError::Diverged {
                    seq: first_difference(&record.log, &recorded),
                });
            }
            return Ok(ReplaySummary {
                game_id: setup.game_id,
                events: recorded.events.len(),
                exchanges: total,
            });
        }
        Some(HostError::Backend(e)) => return Err(ReplayError::Backend(e)),
        Some(_) => {}
    }
    if record.log.to_jsonl() != recorded_text {
        return Err(ReplayError::Diverged {
            seq: first_difference(&record.log, &recorded),
        });
    }
    if backend.remaining() > 0 {
        return Err(ReplayError::Unused(backend.remaining()));
    }
    Ok(ReplaySummary {
        game_id: setup.game_id,
        events: recorded.events.len(),
        exchanges: total,
    })
}
