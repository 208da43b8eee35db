//! Parsing of `.vlog` files into per-session event streams.
//!
//! Each non-blank line is one JSON object:
//!
//! ```text
//! {"sid": "<session id>", "ip": "<hashed ip>", "ts": <epoch ms | "RFC 3339 UTC">,
//!  "name": "<event name>", "view": "<view token>"?, "payload": {"k": "v", ...}?}
//! ```
//!
//! Unknown keys are ignored. Problems with a single line are counted in the
//! [`IngestReport`] and never abort ingestion.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use chrono::DateTime;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::event_model::{Event, EventRegistry, RawEvent, TimestampMs, ValidationError, ViewKind};

pub const LOG_EXTENSION: &str = "vlog";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LineError {
    #[error("malformed record at column {column}: {reason}")]
    MalformedRecord { column: usize, reason: String },
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

impl LineError {
    /// Key under which this error is counted in [`IngestReport::reject_reasons`].
    pub fn reason_key(&self) -> &'static str {
        match self {
            LineError::MalformedRecord { .. } => "malformed",
            LineError::Invalid(ValidationError::UnknownEventName(_)) => "unknown_event",
            LineError::Invalid(ValidationError::MissingField(_)) => "missing_field",
            LineError::Invalid(ValidationError::NonPositiveTimestamp(_)) => "non_positive_timestamp",
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}")]
    IoFailure {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// All events carrying one session id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionFile {
    pub session_id: String,
    pub ip_hash: String,
    pub events: Vec<Event>,
}

impl SessionFile {
    pub fn first_ts(&self) -> TimestampMs {
        self.events[0].timestamp
    }

    pub fn last_ts(&self) -> TimestampMs {
        self.events[self.events.len() - 1].timestamp
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub files_read: usize,
    pub events_accepted: usize,
    pub events_rejected: usize,
    pub reject_reasons: BTreeMap<String, usize>,
}

impl IngestReport {
    fn reject(&mut self, key: &str) {
        self.events_rejected += 1;
        *self.reject_reasons.entry(key.to_string()).or_insert(0) += 1;
    }
}

fn malformed(column: usize, reason: impl Into<String>) -> LineError {
    LineError::MalformedRecord { column, reason: reason.into() }
}

fn parse_timestamp(value: &Value) -> Result<TimestampMs, LineError> {
    match value {
        Value::Number(n) => n
            .as_i64()
            .ok_or_else(|| malformed(0, format!("ts `{n}` is not an integer"))),
        Value::String(s) => DateTime::parse_from_rfc3339(s)
            .map(|dt| dt.timestamp_millis())
            .map_err(|e| malformed(0, format!("ts `{s}` is not RFC 3339: {e}"))),
        other => Err(malformed(0, format!("ts has unsupported type: {other}"))),
    }
}

fn string_field(obj: &serde_json::Map<String, Value>, key: &str) -> Result<Option<String>, LineError> {
    match obj.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(other) => Err(malformed(0, format!("`{key}` must be a string, got {other}"))),
    }
}

/// Parses one log line. Blank lines yield `Ok(None)`.
pub fn parse_log_line(line: &str, registry: &EventRegistry) -> Result<Option<Event>, LineError> {
    if line.trim().is_empty() {
        return Ok(None);
    }
    let value: Value =
        serde_json::from_str(line).map_err(|e| malformed(e.column(), e.to_string()))?;
    let Value::Object(obj) = value else {
        return Err(malformed(1, "record is not a JSON object"));
    };

    let session_id = string_field(&obj, "sid")?;
    let ip_hash = string_field(&obj, "ip")?;
    let name = string_field(&obj, "name")?;
    let timestamp = match obj.get("ts") {
        None | Some(Value::Null) => None,
        Some(v) => Some(parse_timestamp(v)?),
    };
    let missing: Vec<&str> = [
        ("sid", session_id.is_none()),
        ("ip", ip_hash.is_none()),
        ("ts", timestamp.is_none()),
        ("name", name.is_none()),
    ]
    .into_iter()
    .filter_map(|(k, absent)| absent.then_some(k))
    .collect();
    if !missing.is_empty() {
        return Err(malformed(0, format!("missing {}", missing.join("/"))));
    }

    let view = match string_field(&obj, "view")? {
        None => None,
        Some(token) => Some(token.parse::<ViewKind>().map_err(|e| malformed(0, e))?),
    };
    let payload = match obj.get("payload") {
        None | Some(Value::Null) => BTreeMap::new(),
        Some(Value::Object(map)) => map
            .iter()
            .map(|(k, v)| match v {
                Value::String(s) => Ok((k.clone(), s.clone())),
                other => Err(malformed(0, format!("payload value for `{k}` must be a string, got {other}"))),
            })
            .collect::<Result<_, _>>()?,
        Some(other) => return Err(malformed(0, format!("payload must be an object, got {other}"))),
    };

    let raw = RawEvent { session_id, ip_hash, timestamp, name, view, payload };
    Ok(Some(registry.validate_event(&raw)?))
}

/// Accepted events of one source plus its per-line rejects.
struct ParsedSource {
    events: Vec<(usize, Event)>,
    rejects: Vec<&'static str>,
}

fn parse_source(name: &str, text: &str, registry: &EventRegistry) -> ParsedSource {
    let mut events = Vec::new();
    let mut rejects = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        match parse_log_line(line, registry) {
            Ok(Some(ev)) => events.push((lineno, ev)),
            Ok(None) => {}
            Err(err) => {
                tracing::debug!(source = name, line = lineno + 1, %err, "rejected log line");
                rejects.push(err.reason_key());
            }
        }
    }
    ParsedSource { events, rejects }
}

/// Ingests in-memory sources given as `(name, contents)`.
///
/// Sources are processed in lexicographic name order so the result does not
/// depend on the order they are supplied in.
pub fn ingest_sources<N, T>(sources: &[(N, T)], registry: &EventRegistry) -> (Vec<SessionFile>, IngestReport)
where
    N: AsRef<str> + Sync,
    T: AsRef<str> + Sync,
{
    let mut order: Vec<usize> = (0..sources.len()).collect();
    order.sort_by(|&a, &b| sources[a].0.as_ref().cmp(sources[b].0.as_ref()));
    let parsed: Vec<ParsedSource> = order
        .par_iter()
        .map(|&i| parse_source(sources[i].0.as_ref(), sources[i].1.as_ref(), registry))
        .collect();
    merge_parsed(parsed)
}

fn merge_parsed(parsed: Vec<ParsedSource>) -> (Vec<SessionFile>, IngestReport) {
    let mut report = IngestReport { files_read: parsed.len(), ..IngestReport::default() };
    let mut groups: BTreeMap<String, Vec<(TimestampMs, usize, usize, Event)>> = BTreeMap::new();
    for (src_idx, src) in parsed.into_iter().enumerate() {
        for key in src.rejects {
            report.reject(key);
        }
        for (lineno, ev) in src.events {
            groups
                .entry(ev.session_id.clone())
                .or_default()
                .push((ev.timestamp, src_idx, lineno, ev));
        }
    }

    let mut sessions = Vec::with_capacity(groups.len());
    for (session_id, mut evs) in groups {
        evs.sort_by_key(|(ts, src, line, _)| (*ts, *src, *line));
        let ip_hash = evs[0].3.ip_hash.clone();
        let mut events = Vec::with_capacity(evs.len());
        for (_, _, _, ev) in evs {
            if ev.ip_hash == ip_hash {
                events.push(ev);
            } else {
                report.reject("ip_mismatch");
            }
        }
        report.events_accepted += events.len();
        sessions.push(SessionFile { session_id, ip_hash, events });
    }
    sessions.sort_by(|a, b| {
        a.first_ts()
            .cmp(&b.first_ts())
            .then_with(|| a.session_id.cmp(&b.session_id))
    });
    (sessions, report)
}

/// Collects log files under `path`: the file itself, or every `*.vlog`
/// file below a directory.
pub fn collect_log_files(path: &Path) -> Result<Vec<PathBuf>, IngestError> {
    let io_err = |source| IngestError::IoFailure { path: path.to_path_buf(), source };
    let meta = std::fs::metadata(path).map_err(io_err)?;
    if meta.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(path).sort_by_file_name() {
        let entry = entry.map_err(|e| IngestError::IoFailure {
            path: e.path().map(Path::to_path_buf).unwrap_or_else(|| path.to_path_buf()),
            source: e.into(),
        })?;
        let is_log = entry.file_type().is_file()
            && entry.path().extension().is_some_and(|ext| ext == LOG_EXTENSION);
        if is_log {
            files.push(entry.into_path());
        }
    }
    Ok(files)
}

pub fn ingest_path(path: &Path, registry: &EventRegistry) -> Result<(Vec<SessionFile>, IngestReport), IngestError> {
    ingest_paths(&[path], registry)
}

/// Reads every log file reachable from `paths`. Only unreadable paths are
/// errors; bad lines are counted in the report.
pub fn ingest_paths<P: AsRef<Path>>(
    paths: &[P],
    registry: &EventRegistry,
) -> Result<(Vec<SessionFile>, IngestReport), IngestError> {
    let mut files = BTreeSet::new();
    for p in paths {
        files.extend(collect_log_files(p.as_ref())?);
    }
    let files: Vec<PathBuf> = files.into_iter().collect();
    let texts: Vec<String> = files
        .par_iter()
        .map(|f| {
            std::fs::read_to_string(f).map_err(|source| IngestError::IoFailure { path: f.clone(), source })
        })
        .collect::<Result<_, _>>()?;
    let parsed: Vec<ParsedSource> = files
        .par_iter()
        .zip(texts.par_iter())
        .map(|(f, text)| parse_source(&f.display().to_string(), text, registry))
        .collect();
    Ok(merge_parsed(parsed))
}
