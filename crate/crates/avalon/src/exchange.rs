//! Exchange logs on disk: one JSON object per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use avalon_core::backend::{BackendError, Exchange, ExchangeSink};
use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Line format of an exchange log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeRecord {
    #[serde(flatten)]
    pub exchange: Exchange,
    /// RFC 3339 UTC.
    pub timestamp: String,
}

/// Source of record timestamps.
///
/// `Logical` counts seconds from the Unix epoch, one per record, so that
/// scripted runs write identical bytes every time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clock {
    Wall,
    Logical(i64),
}

impl Clock {
    fn tick(&mut self) -> String {
        let t: DateTime<Utc> = match self {
            Clock::Wall => Utc::now(),
            Clock::Logical(n) => {
                let t = DateTime::from_timestamp(*n, 0).unwrap_or_default();
                *n += 1;
                t
            }
        };
        t.to_rfc3339_opts(SecondsFormat::Millis, true)
    }
}

#[derive(Debug, Error)]
pub enum ExchangeLogError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

/// Appends records to a file, flushing after each so a crash keeps every
/// completed exchange.
pub struct FileSink {
    out: BufWriter<File>,
    clock: Clock,
}

impl FileSink {
    pub fn create(path: &Path, clock: Clock) -> std::io::Result<FileSink> {
        Ok(FileSink {
            out: BufWriter::new(File::create(path)?),
            clock,
        })
    }
}

impl ExchangeSink for FileSink {
    fn record(&mut self, exchange: Exchange) -> Result<(), BackendError> {
        let record = ExchangeRecord {
            exchange,
            timestamp: self.clock.tick(),
        };
        let line =
            serde_json::to_string(&record).map_err(|e| BackendError::Recording(e.to_string()))?;
        writeln!(self.out, "{line}")
            .and_then(|_| self.out.flush())
            .map_err(|e| BackendError::Recording(e.to_string()))
    }
}

pub fn read_exchanges(path: &Path) -> Result<Vec<ExchangeRecord>, ExchangeLogError> {
    let io = |source| ExchangeLogError::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| ExchangeLogError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use avalon_core::backend::{ChatMessage, ModelSettings, Purpose, Stage};

    fn exchange(text: &str) -> Exchange {
        let req = ModelSettings::default().request(
            Purpose::Agent,
            Stage::Action,
            None,
            vec![ChatMessage::user(text)],
        );
        Exchange::new(&req, "ok")
    }

    #[test]
    fn logical_clock_is_stable() {
        let mut c = Clock::Logical(0);
        assert_eq!(c.tick(), "1970-01-01T00:00:00.000Z");
        assert_eq!(c.tick(), "1970-01-01T00:00:01.000Z");
    }

    #[test]
    fn records_roundtrip_with_all_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.jsonl");
        let mut sink = FileSink::create(&path, Clock::Logical(0)).unwrap();
        sink.record(exchange("a")).unwrap();
        sink.record(exchange("b")).unwrap();
        drop(sink);
        let text = std::fs::read_to_string(&path).unwrap();
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        for key in ["digest", "purpose", "request", "response", "timestamp"] {
            assert!(first.get(key).is_some(), "{key}");
        }
        let back = read_exchanges(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].exchange, exchange("b"));
    }

    #[test]
    fn parse_errors_name_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "\n{}\n").unwrap();
        match read_exchanges(&path) {
            Err(ExchangeLogError::Parse { line: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
    }
}
