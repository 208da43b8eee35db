//! Reconstruction of users and visits from session files.
//!
//! Two same-IP session files are linked when the later one starts at most
//! `stitch_gap` after the earlier one ends. Where several candidates exist a
//! link is kept only between mutual nearest neighbours, so every session has
//! at most one predecessor and one successor and each chain is one user.
//! A user's merged stream is then cut into visits at inactivity gaps of at
//! least `visit_gap`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::event_model::{Event, TimestampMs};
use crate::ingest::SessionFile;

pub const DEFAULT_STITCH_GAP_MS: i64 = 60_000;
pub const DEFAULT_VISIT_GAP_MS: i64 = 1_200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StitchParams {
    pub stitch_gap_ms: i64,
    pub visit_gap_ms: i64,
}

impl Default for StitchParams {
    fn default() -> Self {
        Self { stitch_gap_ms: DEFAULT_STITCH_GAP_MS, visit_gap_ms: DEFAULT_VISIT_GAP_MS }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid stitch parameters: {0}")]
pub struct InvalidParams(pub String);

impl StitchParams {
    pub fn new(stitch_gap_ms: i64, visit_gap_ms: i64) -> Result<Self, InvalidParams> {
        if stitch_gap_ms <= 0 || visit_gap_ms <= 0 {
            return Err(InvalidParams("gaps must be strictly positive".into()));
        }
        if stitch_gap_ms >= visit_gap_ms {
            return Err(InvalidParams(format!(
                "stitch gap ({stitch_gap_ms} ms) must be below visit gap ({visit_gap_ms} ms)"
            )));
        }
        Ok(Self { stitch_gap_ms, visit_gap_ms })
    }
}

/// A contiguous burst of activity within one user's stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Visit {
    pub index: usize,
    pub start_ts: TimestampMs,
    pub end_ts: TimestampMs,
    /// Range into [`UserRecord::events`].
    pub events: Range<usize>,
}

impl Visit {
    pub fn duration_ms(&self) -> i64 {
        self.end_ts - self.start_ts
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: String,
    pub ip_hash: String,
    pub session_ids: Vec<String>,
    pub events: Vec<Event>,
    #[serde(default)]
    pub visits: Vec<Visit>,
}

impl UserRecord {
    pub fn visit_events(&self, visit: &Visit) -> &[Event] {
        &self.events[visit.events.clone()]
    }

    pub fn first_ts(&self) -> TimestampMs {
        self.events.first().map_or(0, |e| e.timestamp)
    }

    pub fn last_ts(&self) -> TimestampMs {
        self.events.last().map_or(0, |e| e.timestamp)
    }

    pub fn total_visit_ms(&self) -> i64 {
        self.visits.iter().map(Visit::duration_ms).sum()
    }
}

/// All resolved users, ordered by (first event timestamp, user id).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub users: Vec<UserRecord>,
}

impl Corpus {
    pub fn get(&self, user_id: &str) -> Option<&UserRecord> {
        self.users.iter().find(|u| u.user_id == user_id)
    }

    pub fn visit_count(&self) -> usize {
        self.users.iter().map(|u| u.visits.len()).sum()
    }
}

/// Deterministic user id derived from the chain's IP and first session.
pub fn user_id_for(ip_hash: &str, first_session_id: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(ip_hash.as_bytes());
    hasher.update([0u8]);
    hasher.update(first_session_id.as_bytes());
    let digest = hasher.finalize();
    format!("u{}", hex::encode(&digest[..8]))
}

/// Total order used for sessions: (first_ts, session_id).
fn session_order(a: &SessionFile, b: &SessionFile) -> Ordering {
    a.first_ts()
        .cmp(&b.first_ts())
        .then_with(|| a.session_id.cmp(&b.session_id))
}

/// Links within one IP group; `group` must be sorted by [`session_order`].
/// Returns `succ[i] = Some(j)` for every kept link i -> j.
fn link_group(group: &[&SessionFile], stitch_gap: i64) -> Vec<Option<usize>> {
    let n = group.len();
    // Nearest successor: the smallest (first_ts, sid) after `a` with first_ts in
    // [last(a), last(a) + gap]. `group` is already in that order.
    let firsts: Vec<TimestampMs> = group.iter().map(|s| s.first_ts()).collect();
    let mut best_succ = vec![None; n];
    for (a, sess) in group.iter().enumerate() {
        let last = sess.last_ts();
        let from = firsts.partition_point(|&f| f < last).max(a + 1);
        if from < n && firsts[from] - last <= stitch_gap {
            best_succ[a] = Some(from);
        }
    }

    // Nearest predecessor: the largest last_ts <= first(b) within the gap,
    // ties to the smaller (first_ts, sid).
    let mut by_last: Vec<usize> = (0..n).collect();
    by_last.sort_by(|&x, &y| group[x].last_ts().cmp(&group[y].last_ts()).then(x.cmp(&y)));
    let lasts: Vec<TimestampMs> = by_last.iter().map(|&i| group[i].last_ts()).collect();
    let mut best_pred = vec![None; n];
    for (b, sess) in group.iter().enumerate() {
        let first = sess.first_ts();
        let mut hi = lasts.partition_point(|&l| l <= first);
        let mut found: Option<usize> = None;
        while hi > 0 {
            let cand_last = lasts[hi - 1];
            if first - cand_last > stitch_gap {
                break;
            }
            // scan all candidates sharing this last_ts, keep the smallest eligible index
            let lo = lasts[..hi].partition_point(|&l| l < cand_last);
            found = by_last[lo..hi].iter().copied().filter(|&a| a < b).min();
            if found.is_some() {
                break;
            }
            hi = lo;
        }
        best_pred[b] = found;
    }

    (0..n)
        .map(|a| best_succ[a].filter(|&b| best_pred[b] == Some(a)))
        .collect()
}

/// Groups session files into users (visits not yet computed).
pub fn stitch_sessions(sessions: &[SessionFile], params: &StitchParams) -> Vec<UserRecord> {
    let mut by_ip: BTreeMap<&str, Vec<&SessionFile>> = BTreeMap::new();
    for s in sessions.iter().filter(|s| !s.events.is_empty()) {
        by_ip.entry(s.ip_hash.as_str()).or_default().push(s);
    }

    let mut users = Vec::new();
    for (ip, mut group) in by_ip {
        group.sort_by(|a, b| session_order(a, b));
        let succ = link_group(&group, params.stitch_gap_ms);
        let mut has_pred = vec![false; group.len()];
        for b in succ.iter().flatten() {
            has_pred[*b] = true;
        }
        for head in (0..group.len()).filter(|&i| !has_pred[i]) {
            let mut chain = vec![head];
            let mut cur = head;
            while let Some(next) = succ[cur] {
                chain.push(next);
                cur = next;
            }
            let session_ids: Vec<String> = chain.iter().map(|&i| group[i].session_id.clone()).collect();
            let mut events: Vec<Event> = chain.iter().flat_map(|&i| group[i].events.iter().cloned()).collect();
            events.sort_by_key(|e| e.timestamp);
            users.push(UserRecord {
                user_id: user_id_for(ip, &session_ids[0]),
                ip_hash: ip.to_string(),
                session_ids,
                events,
                visits: Vec::new(),
            });
        }
    }
    users
}

/// Cuts the user's stream before every event that follows its predecessor by
/// at least `visit_gap`.
pub fn segment_visits(mut user: UserRecord, params: &StitchParams) -> UserRecord {
    let mut visits = Vec::new();
    let mut start = 0;
    for i in 1..=user.events.len() {
        let cut = i == user.events.len()
            || user.events[i].timestamp - user.events[i - 1].timestamp >= params.visit_gap_ms;
        if cut {
            visits.push(Visit {
                index: visits.len(),
                start_ts: user.events[start].timestamp,
                end_ts: user.events[i - 1].timestamp,
                events: start..i,
            });
            start = i;
        }
    }
    user.visits = visits;
    user
}

/// Stitches, then segments every user.
pub fn resolve_corpus(sessions: &[SessionFile], params: &StitchParams) -> Corpus {
    let mut users: Vec<UserRecord> = stitch_sessions(sessions, params)
        .into_iter()
        .map(|u| segment_visits(u, params))
        .collect();
    users.sort_by(|a, b| a.first_ts().cmp(&b.first_ts()).then_with(|| a.user_id.cmp(&b.user_id)));
    Corpus { users }
}
