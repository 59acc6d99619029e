//! Text-completion backends.
//!
//! Everything that talks to a language model goes through [`Backend`]. The
//! scripted and replay implementations here are deterministic; the live HTTP
//! client lives in the `avalon` crate.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::rules::Seat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChatRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: ChatRole,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: ChatRole::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: ChatRole::User,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Purpose {
    Agent,
    Extractor,
    Judge,
    Summarizer,
}

/// Which module issued a call. Finer than [`Purpose`]; used for call
/// accounting and ablation checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stage {
    Analysis,
    Planning,
    Action,
    /// Host repeats a question after too few players were named.
    Reask,
    Response,
    Summary,
    /// Extra summary pass when a prompt outgrows its budget.
    EmergencySummary,
    Extraction,
    Suggestions,
    StrategyRewrite,
    OtherRoles,
    Judge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub purpose: Purpose,
    pub stage: Stage,
    /// Seat the call was made for, when it belongs to one agent.
    pub seat: Option<Seat>,
}

impl CompletionRequest {
    /// Stable hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).unwrap_or_default();
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(BackendError::InvalidRequest("temperature outside [0, 2]"));
        }
        if self.messages.is_empty() {
            return Err(BackendError::InvalidRequest("no messages"));
        }
        let blank = self
            .messages
            .iter()
            .any(|m| m.role != ChatRole::Assistant && m.content.trim().is_empty());
        if blank {
            return Err(BackendError::InvalidRequest("empty system or user message"));
        }
        Ok(())
    }
}

/// Per-purpose sampling temperatures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Temperatures {
    pub agent: f64,
    pub extractor: f64,
    pub judge: f64,
    pub summarizer: f64,
}

impl Default for Temperatures {
    fn default() -> Self {
        Temperatures {
            agent: 0.3,
            extractor: 0.0,
            judge: 0.0,
            summarizer: 0.0,
        }
    }
}

impl Temperatures {
    pub fn for_purpose(&self, purpose: Purpose) -> f64 {
        match purpose {
            Purpose::Agent => self.agent,
            Purpose::Extractor => self.extractor,
            Purpose::Judge => self.judge,
            Purpose::Summarizer => self.summarizer,
        }
    }
}

/// Model name and temperatures used to build every request of a game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSettings {
    pub model: String,
    #[serde(default)]
    pub temperatures: Temperatures,
}

impl Default for ModelSettings {
    fn default() -> Self {
        ModelSettings {
            model: String::from("gpt-3.5-turbo-16k"),
            temperatures: Temperatures::default(),
        }
    }
}

impl ModelSettings {
    pub fn request(
        &self,
        purpose: Purpose,
        stage: Stage,
        seat: Option<Seat>,
        messages: Vec<ChatMessage>,
    ) -> CompletionRequest {
        CompletionRequest {
            model: self.model.clone(),
            messages,
            temperature: self.temperatures.for_purpose(purpose),
            purpose,
            stage,
            seat,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BackendKind {
    LiveHttp,
    Scripted,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    /// The service refused the request; repeating it will not help.
    #[error("request rejected with status {status}: {message}")]
    Rejected { status: u16, message: String },
    #[error("replay mismatch at turn {turn}: recorded digest {recorded}, request digest {actual}")]
    ReplayMismatch {
        turn: usize,
        recorded: String,
        actual: String,
    },
    #[error("replay log exhausted at turn {turn}")]
    ReplayExhausted { turn: usize },
    #[error("no scripted line left for {purpose:?} call #{index}")]
    ScriptExhausted { purpose: Purpose, index: usize },
    #[error("could not record exchange: {0}")]
    Recording(String),
    #[error("invalid request: {0}")]
    InvalidRequest(&'static str),
}

impl BackendError {
    /// Transport errors may succeed on a later attempt; everything else is final.
    pub fn is_retryable(&self) -> bool {
        matches!(self, BackendError::Transport { .. })
    }
}

pub trait Backend {
    fn complete(&mut self, request: &CompletionRequest) -> Result<String, BackendError>;

    fn kind(&self) -> BackendKind;
}

impl<B: Backend + ?Sized> Backend for &mut B {
    fn complete(&mut self, request: &CompletionRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }

    fn kind(&self) -> BackendKind {
        (**self).kind()
    }
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn complete(&mut self, request: &CompletionRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }

    fn kind(&self) -> BackendKind {
        (**self).kind()
    }
}

type Responder = Box<dyn FnMut(&CompletionRequest, usize) -> String + Send>;

/// Deterministic backend fed from per-purpose queues.
///
/// A queued line is popped for every call of that purpose. When a queue runs
/// dry the optional responder answers instead; it receives the request and
/// the per-purpose call index.
#[derive(Default)]
pub struct ScriptedBackend {
    queues: BTreeMap<Purpose, VecDeque<String>>,
    calls: BTreeMap<Purpose, usize>,
    responder: Option<Responder>,
}

impl ScriptedBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_responder(
        responder: impl FnMut(&CompletionRequest, usize) -> String + Send + 'static,
    ) -> Self {
        ScriptedBackend {
            responder: Some(Box::new(responder)),
            ..Self::default()
        }
    }

    pub fn push(&mut self, purpose: Purpose, line: impl Into<String>) -> &mut Self {
        self.queues
            .entry(purpose)
            .or_default()
            .push_back(line.into());
        self
    }

    pub fn extend<I, S>(&mut self, purpose: Purpose, lines: I) -> &mut Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let queue = self.queues.entry(purpose).or_default();
        queue.extend(lines.into_iter().map(Into::into));
        self
    }

    pub fn calls(&self, purpose: Purpose) -> usize {
        self.calls.get(&purpose).copied().unwrap_or(0)
    }
}

impl Backend for ScriptedBackend {
    fn complete(&mut self, request: &CompletionRequest) -> Result<String, BackendError> {
        let index = {
            let n = self.calls.entry(request.purpose).or_insert(0);
            *n += 1;
            *n - 1
        };
        if let Some(line) = self
            .queues
            .get_mut(&request.purpose)
            .and_then(VecDeque::pop_front)
        {
            return Ok(line);
        }
        match self.responder.as_mut() {
            Some(responder) => Ok(responder(request, index)),
            None => Err(BackendError::ScriptExhausted {
                purpose: request.purpose,
                index,
            }),
        }
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Scripted
    }
}

/// A transient failure that reached the caller, kept so replay can repeat it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordedFailure {
    pub attempts: u32,
    pub message: String,
}

/// One recorded request/response pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub digest: String,
    pub purpose: Purpose,
    pub request: CompletionRequest,
    /// Empty when `failure` is set.
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<RecordedFailure>,
}

impl Exchange {
    pub fn new(request: &CompletionRequest, response: &str) -> Self {
        Exchange {
            digest: request.digest(),
            purpose: request.purpose,
            request: request.clone(),
            response: String::from(response),
            failure: None,
        }
    }

    pub fn failed(request: &CompletionRequest, attempts: u32, message: &str) -> Self {
        Exchange {
            failure: Some(RecordedFailure {
                attempts,
                message: String::from(message),
            }),
            ..Exchange::new(request, "")
        }
    }
}

/// Destination for recorded exchanges.
pub trait ExchangeSink {
    fn record(&mut self, exchange: Exchange) -> Result<(), BackendError>;
}

impl ExchangeSink for Vec<Exchange> {
    fn record(&mut self, exchange: Exchange) -> Result<(), BackendError> {
        self.push(exchange);
        Ok(())
    }
}

impl<S: ExchangeSink + ?Sized> ExchangeSink for &mut S {
    fn record(&mut self, exchange: Exchange) -> Result<(), BackendError> {
        (**self).record(exchange)
    }
}

/// Wraps a backend and appends every exchange to a sink: successes, and
/// transport failures that survived the inner retries. Other errors are
/// final and end the game, so they are not recorded.
pub struct Recorder<B, S> {
    inner: B,
    sink: S,
}

impl<B: Backend, S: ExchangeSink> Recorder<B, S> {
    pub fn new(inner: B, sink: S) -> Self {
        Recorder { inner, sink }
    }

    pub fn into_parts(self) -> (B, S) {
        (self.inner, self.sink)
    }

    pub fn sink(&self) -> &S {
        &self.sink
    }
}

impl<B: Backend, S: ExchangeSink> Backend for Recorder<B, S> {
    fn complete(&mut self, request: &CompletionRequest) -> Result<String, BackendError> {
        match self.inner.complete(request) {
            Ok(response) => {
                self.sink.record(Exchange::new(request, &response))?;
                Ok(response)
            }
            Err(BackendError::Transport { attempts, message }) => {
                self.sink
                    .record(Exchange::failed(request, attempts, &message))?;
                Err(BackendError::Transport { attempts, message })
            }
            Err(e) => Err(e),
        }
    }

    fn kind(&self) -> BackendKind {
        self.inner.kind()
    }
}

/// Answers from a recorded exchange log, in order.
///
/// Each call must hash to the digest stored for its turn; the stored
/// response is returned as-is.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    exchanges: Vec<Exchange>,
    cursor: usize,
}

impl ReplayBackend {
    pub fn new(exchanges: Vec<Exchange>) -> Self {
        ReplayBackend {
            exchanges,
            cursor: 0,
        }
    }

    pub fn remaining(&self) -> usize {
        self.exchanges.len() - self.cursor
    }
}

impl Backend for ReplayBackend {
    fn complete(&mut self, request: &CompletionRequest) -> Result<String, BackendError> {
        let turn = self.cursor;
        let recorded = self
            .exchanges
            .get(turn)
            .ok_or(BackendError::ReplayExhausted { turn })?;
        let actual = request.digest();
        if recorded.digest != actual {
            return Err(BackendError::ReplayMismatch {
                turn,
                recorded: recorded.digest.clone(),
                actual,
            });
        }
        self.cursor += 1;
        match &recorded.failure {
            Some(f) => Err(BackendError::Transport {
                attempts: f.attempts,
                message: f.message.clone(),
            }),
            None => Ok(recorded.response.clone()),
        }
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Replay
    }
}

/// Backend that has nothing to say. Useful for games played only by rule bots.
#[derive(Debug, Default, Clone, Copy)]
pub struct NullBackend;

impl Backend for NullBackend {
    fn complete(&mut self, request: &CompletionRequest) -> Result<String, BackendError> {
        Err(BackendError::ScriptExhausted {
            purpose: request.purpose,
            index: 0,
        })
    }

    fn kind(&self) -> BackendKind {
        BackendKind::Scripted
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn req(purpose: Purpose, text: &str) -> CompletionRequest {
        ModelSettings::default().request(
            purpose,
            Stage::Action,
            None,
            vec![ChatMessage::user(text)],
        )
    }

    #[test]
    fn scripted_pops_in_order() {
        let mut b = ScriptedBackend::new();
        b.extend(Purpose::Agent, ["A", "B"]);
        assert_eq!(b.complete(&req(Purpose::Agent, "x")).unwrap(), "A");
        assert_eq!(b.complete(&req(Purpose::Agent, "x")).unwrap(), "B");
        assert!(matches!(
            b.complete(&req(Purpose::Agent, "x")),
            Err(BackendError::ScriptExhausted { index: 2, .. })
        ));
    }

    #[test]
    fn scripted_queues_are_per_purpose() {
        let mut b = ScriptedBackend::with_responder(|r, i| alloc::format!("{:?}#{i}", r.purpose));
        b.push(Purpose::Extractor, "agree");
        assert_eq!(b.complete(&req(Purpose::Agent, "x")).unwrap(), "Agent#0");
        assert_eq!(b.complete(&req(Purpose::Extractor, "x")).unwrap(), "agree");
        assert_eq!(
            b.complete(&req(Purpose::Extractor, "x")).unwrap(),
            "Extractor#1"
        );
    }

    #[test]
    fn default_temperatures() {
        assert_eq!(req(Purpose::Agent, "x").temperature, 0.3);
        assert_eq!(req(Purpose::Extractor, "x").temperature, 0.0);
        assert_eq!(req(Purpose::Summarizer, "x").temperature, 0.0);
        assert_eq!(req(Purpose::Judge, "x").temperature, 0.0);
    }

    #[test]
    fn digest_is_stable_and_sensitive() {
        let a = req(Purpose::Agent, "hello");
        assert_eq!(a.digest(), req(Purpose::Agent, "hello").digest());
        assert_ne!(a.digest(), req(Purpose::Agent, "hello!").digest());
        assert_eq!(a.digest().len(), 64);
    }

    #[test]
    fn record_then_replay() {
        let mut scripted = ScriptedBackend::new();
        scripted.extend(Purpose::Agent, ["one", "two"]);
        let mut rec = Recorder::new(scripted, Vec::new());
        rec.complete(&req(Purpose::Agent, "a")).unwrap();
        rec.complete(&req(Purpose::Agent, "b")).unwrap();
        let (_, mut log) = rec.into_parts();
        log[1].response = String::from("tampered");
        let mut replay = ReplayBackend::new(log);
        assert_eq!(replay.complete(&req(Purpose::Agent, "a")).unwrap(), "one");
        assert_eq!(
            replay.complete(&req(Purpose::Agent, "b")).unwrap(),
            "tampered"
        );
        assert!(matches!(
            replay.complete(&req(Purpose::Agent, "c")),
            Err(BackendError::ReplayExhausted { turn: 2 })
        ));
    }

    struct Flaky;

    impl Backend for Flaky {
        fn complete(&mut self, _: &CompletionRequest) -> Result<String, BackendError> {
            Err(BackendError::Transport {
                attempts: 3,
                message: String::from("timeout"),
            })
        }

        fn kind(&self) -> BackendKind {
            BackendKind::LiveHttp
        }
    }

    #[test]
    fn transient_failures_are_recorded_and_replayed() {
        let mut rec = Recorder::new(Flaky, Vec::new());
        let err = rec.complete(&req(Purpose::Agent, "a")).unwrap_err();
        let (_, log) = rec.into_parts();
        assert_eq!(log.len(), 1);
        assert!(log[0].response.is_empty());
        let mut replay = ReplayBackend::new(log);
        assert_eq!(replay.complete(&req(Purpose::Agent, "a")).unwrap_err(), err);
        assert_eq!(replay.remaining(), 0);
    }

    #[test]
    fn replay_mismatch_names_turn() {
        let log = vec![
            Exchange::new(&req(Purpose::Agent, "a"), "1"),
            Exchange::new(&req(Purpose::Agent, "b"), "2"),
        ];
        let mut replay = ReplayBackend::new(log);
        replay.complete(&req(Purpose::Agent, "a")).unwrap();
        match replay.complete(&req(Purpose::Agent, "different")) {
            Err(BackendError::ReplayMismatch { turn, .. }) => assert_eq!(turn, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn validation() {
        assert!(req(Purpose::Agent, "x").validate().is_ok());
        assert!(req(Purpose::Agent, "  ").validate().is_err());
        let mut hot = req(Purpose::Agent, "x");
        hot.temperature = 2.5;
        assert!(hot.validate().is_err());
    }

    #[test]
    fn retryability() {
        assert!(BackendError::Transport {
            attempts: 1,
            message: String::new()
        }
        .is_retryable());
        assert!(!BackendError::ReplayExhausted { turn: 0 }.is_retryable());
    }
}
