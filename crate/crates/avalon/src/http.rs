//! Chat-completion client over HTTP.

use std::sync::{Arc, Condvar, Mutex};
use std::thread;
use std::time::Duration;

use avalon_core::backend::{Backend, BackendError, BackendKind, ChatMessage, CompletionRequest};
use serde::{Deserialize, Serialize};

pub const API_KEY_VAR: &str = "AVALON_API_KEY";
pub const DEFAULT_ENDPOINT: &str = "https://api.openai.com/v1/chat/completions";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpSettings {
    pub endpoint: String,
    /// Wire attempts per request, the first included.
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub timeout_secs: u64,
    /// Requests allowed in flight at once across every game sharing the limiter.
    pub max_in_flight: usize,
}

impl Default for HttpSettings {
    fn default() -> Self {
        HttpSettings {
            endpoint: DEFAULT_ENDPOINT.to_string(),
            max_attempts: 3,
            initial_backoff_ms: 500,
            timeout_secs: 120,
            max_in_flight: 4,
        }
    }
}

/// Counting gate shared by every client built from the same limiter.
#[derive(Debug, Clone)]
pub struct InFlightLimit {
    inner: Arc<(Mutex<usize>, Condvar)>,
    cap: usize,
}

impl InFlightLimit {
    pub fn new(cap: usize) -> Self {
        InFlightLimit {
            inner: Arc::new((Mutex::new(0), Condvar::new())),
            cap: cap.max(1),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let (lock, cv) = &*self.inner;
        let mut n = lock.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.cap {
            n = cv.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        Permit(self)
    }

    pub fn in_flight(&self) -> usize {
        *self.inner.0.lock().unwrap_or_else(|e| e.into_inner())
    }
}

struct Permit<'a>(&'a InFlightLimit);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let (lock, cv) = &*self.0.inner;
        let mut n = lock.lock().unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        cv.notify_one();
    }
}

/// Bearer token from the environment.
pub fn api_key() -> Result<String, String> {
    match std::env::var(API_KEY_VAR) {
        Ok(key) if !key.trim().is_empty() => Ok(key),
        _ => Err(format!("{API_KEY_VAR} is not set")),
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    temperature: f64,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
}

/// Body of the POST for `request`: model, messages and temperature only.
pub fn wire_body(request: &CompletionRequest) -> serde_json::Value {
    serde_json::to_value(WireRequest {
        model: &request.model,
        messages: &request.messages,
        temperature: request.temperature,
    })
    .unwrap_or_default()
}

pub fn parse_wire_response(body: &str) -> Result<String, String> {
    let parsed: WireResponse =
        serde_json::from_str(body).map_err(|e| format!("bad response body: {e}"))?;
    parsed
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message.content)
        .ok_or_else(|| "response has no message content".to_string())
}

pub struct HttpBackend {
    agent: ureq::Agent,
    api_key: String,
    settings: HttpSettings,
    limit: InFlightLimit,
}

enum Attempt {
    Done(String),
    Retry(String),
    Fatal(BackendError),
}

impl HttpBackend {
    pub fn new(api_key: String, settings: HttpSettings, limit: InFlightLimit) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(settings.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        HttpBackend {
            agent,
            api_key,
            settings,
            limit,
        }
    }

    fn attempt(&self, request: &CompletionRequest) -> Attempt {
        let _permit = self.limit.acquire();
        let sent = self
            .agent
            .post(&self.settings.endpoint)
            .header("Authorization", &format!("Bearer {}", self.api_key))
            .send_json(wire_body(request));
        let mut response = match sent {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        let status = response.status().as_u16();
        let body = match response.body_mut().read_to_string() {
            Ok(b) => b,
            Err(e) => return Attempt::Retry(e.to_string()),
        };
        match status {
            200..=299 => match parse_wire_response(&body) {
                Ok(text) => Attempt::Done(text),
                Err(message) => Attempt::Fatal(BackendError::Rejected { status, message }),
            },
            408 | 429 | 500..=599 => Attempt::Retry(format!("status {status}: {body}")),
            _ => Attempt::Fatal(BackendError::Rejected {
                status,
                message: body,
            }),
        }
    }
}

impl Backend for HttpBackend {
    fn complete(&mut self, request: &CompletionRequest) -> Result<String, BackendError> {
        request.validate()?;
        let attempts = self.settings.max_attempts.max(1);
        let mut delay = Duration::from_millis(self.settings.initial_backoff_ms);
        let mut last = String::new();
        for n in 1..=attempts {
            match self.attempt(request) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(message) => last = message,
            }
            if n < attempts {
                thread::sleep(delay);
                delay *= 2;
            }
        }
        Err(BackendError::Transport {
            attempts,
            message: last,
        })
    }

    fn kind(&self) -> BackendKind {
        BackendKind::LiveHttp
    }
}
