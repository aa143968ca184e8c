//! Event log: an ordered list of `{t, cat, payload}` records, stored as one
//! JSON object per line.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Category {
    FixTrue,
    FixMeasured,
    Announce,
    WireTx,
    WireRx,
    Signal,
    Metric,
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).expect("unit variant");
        f.write_str(v.as_str().unwrap_or_default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub t: f64,
    pub cat: Category,
    pub payload: Value,
}

impl Record {
    /// `payload.name` of a METRIC record.
    pub fn metric_name(&self) -> Option<&str> {
        (self.cat == Category::Metric).then(|| self.payload.get("name")?.as_str()).flatten()
    }

    /// `payload.kind` of an ANNOUNCE record.
    pub fn announce_kind(&self) -> Option<&str> {
        (self.cat == Category::Announce).then(|| self.payload.get("kind")?.as_str()).flatten()
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("reading log {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("log line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EventLog {
    records: Vec<Record>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a record. Times must not go backwards.
    pub fn push(&mut self, t: f64, cat: Category, payload: impl Serialize) {
        if let Some(last) = self.records.last() {
            assert!(t >= last.t, "log time went backwards: {t} after {}", last.t);
        }
        let payload = serde_json::to_value(payload).expect("payload serializes");
        self.records.push(Record { t, cat, payload });
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn of(&self, cat: Category) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(move |r| r.cat == cat)
    }

    /// First METRIC record with this name.
    pub fn metric(&self, name: &str) -> Option<&Record> {
        self.records.iter().find(|r| r.metric_name() == Some(name))
    }

    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_ndjson(text: &str) -> Result<Self, LogError> {
        let mut log = EventLog::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let r: Record =
                serde_json::from_str(line).map_err(|e| LogError::Parse { line: i + 1, message: e.to_string() })?;
            if log.records.last().is_some_and(|last| r.t < last.t) {
                return Err(LogError::Parse { line: i + 1, message: "time goes backwards".into() });
            }
            log.records.push(r);
        }
        Ok(log)
    }

    pub fn load_file(path: impl AsRef<Path>) -> Result<Self, LogError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| LogError::Io { path: path.display().to_string(), source })?;
        Self::from_ndjson(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn ndjson_round_trip() {
        let mut log = EventLog::new();
        log.push(0.0, Category::Metric, json!({"name": "scenario_start"}));
        log.push(0.1, Category::Announce, json!({"kind": "ARRIVAL", "text": "x"}));
        let text = log.to_ndjson();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with(r#"{"t":0.0,"cat":"METRIC","payload":{"name":"scenario_start"}}"#));
        let back = EventLog::from_ndjson(&text).unwrap();
        assert_eq!(back, log);
        assert_eq!(back.metric("scenario_start").unwrap().t, 0.0);
        assert_eq!(back.records()[1].announce_kind(), Some("ARRIVAL"));
    }

    #[test]
    #[should_panic(expected = "backwards")]
    fn push_rejects_time_travel() {
        let mut log = EventLog::new();
        log.push(1.0, Category::Signal, json!({}));
        log.push(0.5, Category::Signal, json!({}));
    }

    #[test]
    fn parse_errors_carry_line() {
        let err = EventLog::from_ndjson("{\"t\":0,\"cat\":\"METRIC\",\"payload\":{}}\nnot json\n").unwrap_err();
        assert!(matches!(err, LogError::Parse { line: 2, .. }));
        let err = EventLog::from_ndjson(
            "{\"t\":1,\"cat\":\"METRIC\",\"payload\":{}}\n{\"t\":0,\"cat\":\"METRIC\",\"payload\":{}}",
        )
        .unwrap_err();
        assert!(matches!(err, LogError::Parse { line: 2, .. }));
    }
}
