//! Slow, obviously-correct reference implementations and random input
//! builders for the test suites. Nothing here calls the code paths it is
//! used to check.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use usagelens_core::event_model::{Event, EventCategory, ViewKind};
use usagelens_core::ingest::SessionFile;

/// Disjoint-set forest over `0..n`.
pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }

    /// Groups of members, each group in ascending index order.
    pub fn groups(&mut self) -> Vec<Vec<usize>> {
        let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..self.parent.len() {
            let r = self.find(i);
            by_root.entry(r).or_default().push(i);
        }
        by_root.into_values().collect()
    }
}

fn first(s: &SessionFile) -> i64 {
    s.events.iter().map(|e| e.timestamp).min().expect("non-empty session")
}

fn last(s: &SessionFile) -> i64 {
    s.events.iter().map(|e| e.timestamp).max().expect("non-empty session")
}

/// User partition by exhaustive pairwise linking.
///
/// `a -> b` is a candidate when both share an IP, `a` precedes `b` in
/// (first_ts, session_id) order and `0 <= first(b) - last(a) <= gap`. A
/// candidate is kept when `a` is `b`'s nearest candidate predecessor and `b`
/// is `a`'s nearest candidate successor. Users are the connected components.
pub fn stitch_partition(sessions: &[SessionFile], stitch_gap_ms: i64) -> BTreeSet<BTreeSet<String>> {
    let n = sessions.len();
    let key = |i: usize| (first(&sessions[i]), sessions[i].session_id.clone());
    let candidate = |a: usize, b: usize| {
        a != b
            && sessions[a].ip_hash == sessions[b].ip_hash
            && key(a) < key(b)
            && (0..=stitch_gap_ms).contains(&(first(&sessions[b]) - last(&sessions[a])))
    };
    let gap = |a: usize, b: usize| first(&sessions[b]) - last(&sessions[a]);

    let mut uf = UnionFind::new(n);
    for a in 0..n {
        for b in 0..n {
            if !candidate(a, b) {
                continue;
            }
            let pred_best = (0..n)
                .filter(|&x| candidate(x, b))
                .min_by_key(|&x| (gap(x, b), key(x)))
                .expect("a is a candidate");
            let succ_best = (0..n)
                .filter(|&y| candidate(a, y))
                .min_by_key(|&y| (gap(a, y), key(y)))
                .expect("b is a candidate");
            if pred_best == a && succ_best == b {
                uf.union(a, b);
            }
        }
    }
    uf.groups()
        .into_iter()
        .map(|g| g.into_iter().map(|i| sessions[i].session_id.clone()).collect())
        .collect()
}

/// Visit spans by splitting wherever a gap reaches `visit_gap`.
pub fn visit_spans(timestamps: &[i64], visit_gap_ms: i64) -> Vec<(i64, i64)> {
    let mut uf = UnionFind::new(timestamps.len());
    for i in 1..timestamps.len() {
        if timestamps[i] - timestamps[i - 1] < visit_gap_ms {
            uf.union(i - 1, i);
        }
    }
    uf.groups()
        .into_iter()
        .map(|g| (timestamps[g[0]], timestamps[*g.last().expect("non-empty")]))
        .collect()
}

/// `(name, start, end, count)` per block: adjacent events are joined when
/// they share a name and the gap is within `merge_gap`; blocks are the
/// resulting connected runs.
pub fn merged_blocks(events: &[Event], merge_gap_ms: i64) -> Vec<(String, i64, i64, usize)> {
    let mut uf = UnionFind::new(events.len());
    for i in 1..events.len() {
        if events[i].name == events[i - 1].name && events[i].timestamp - events[i - 1].timestamp <= merge_gap_ms {
            uf.union(i - 1, i);
        }
    }
    uf.groups()
        .into_iter()
        .map(|g| {
            let a = &events[g[0]];
            let b = &events[*g.last().expect("non-empty")];
            (a.name.clone(), a.timestamp, b.timestamp, g.len())
        })
        .collect()
}

/// UTC (year, month) of an epoch-millisecond timestamp via the
/// days-to-civil conversion.
pub fn civil_month(ts_ms: i64) -> (i64, u32) {
    let days = ts_ms.div_euclid(86_400_000);
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let m = if mp < 10 { mp + 3 } else { mp - 9 };
    (if m <= 2 { y + 1 } else { y }, m as u32)
}

/// Counts of each value, counted by simple iteration.
pub fn tally<'a, I: IntoIterator<Item = &'a str>>(items: I) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for s in items {
        *out.entry(s.to_string()).or_insert(0) += 1;
    }
    out
}

pub fn event(sid: &str, ip: &str, ts: i64, name: &str) -> Event {
    Event {
        session_id: sid.to_string(),
        ip_hash: ip.to_string(),
        timestamp: ts,
        name: name.to_string(),
        category: EventCategory::VisualizationInteraction,
        view: ViewKind::NoView,
        payload: BTreeMap::new(),
    }
}

/// Random session files crowded onto few IPs so that stitch candidates
/// collide, overlap and sit on the threshold.
pub fn random_sessions(seed: u64, count: usize, ips: usize, stitch_gap_ms: i64) -> Vec<SessionFile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_ip_tail: Vec<i64> = vec![0; ips];
    let mut tails = per_ip_tail;
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let ip_idx = rng.random_range(0..ips);
        let ip = format!("ip{ip_idx:02}");
        let start = match rng.random_range(0..4) {
            // continue near the previous session of this IP, around the threshold
            0 => tails[ip_idx] + stitch_gap_ms + rng.random_range(-2..=2),
            1 => tails[ip_idx] + rng.random_range(0..stitch_gap_ms),
            2 => tails[ip_idx] - rng.random_range(0..30_000),
            _ => rng.random_range(1..4_000_000),
        }
        .max(1);
        let n_events = rng.random_range(1..=4);
        let mut stamps: Vec<i64> = (0..n_events).map(|_| start + rng.random_range(0..90_000)).collect();
        stamps[0] = start;
        stamps.sort_unstable();
        let sid = format!("s{i:04}x{:04x}", rng.random::<u16>());
        tails[ip_idx] = tails[ip_idx].max(*stamps.last().expect("non-empty"));
        out.push(SessionFile {
            session_id: sid.clone(),
            ip_hash: ip.clone(),
            events: stamps.iter().map(|&t| event(&sid, &ip, t, "hover_node")).collect(),
        });
    }
    out
}

/// Random sorted event stream with many near-threshold gaps.
pub fn random_stream(rng: &mut impl Rng, len: usize, names: &[&str], merge_gap_ms: i64) -> Vec<Event> {
    let mut ts = rng.random_range(1..1_000_000);
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let name = names[rng.random_range(0..names.len())];
        out.push(event("s", "h", ts, name));
        ts += match rng.random_range(0..5) {
            0 => merge_gap_ms,
            1 => merge_gap_ms + 1,
            2 => 0,
            3 => rng.random_range(0..merge_gap_ms),
            _ => rng.random_range(0..5 * merge_gap_ms),
        };
    }
    out
}

/// The ways a log line gets damaged in corruption tests. Every variant makes
/// the line non-blank and unacceptable.
pub fn corrupt_line(rng: &mut impl Rng, line: &str) -> String {
    match rng.random_range(0..7) {
        0 => line[..line.len() / 2].to_string(),
        1 => line.replacen("\"name\":\"", "\"name\":\"zzz_", 1),
        2 => {
            let start = line.find("\"ts\":").expect("ts key") + 5;
            let end = start + line[start..].find(',').expect("ts value");
            format!("{}0{}", &line[..start], &line[end..])
        }
        3 => line.replacen("\"sid\"", "\"sdi\"", 1),
        4 => "\u{1}\u{2} binary garbage".to_string(),
        5 => line.replacen('{', "[", 1),
        _ => r#"{"sid":"x","ip":"y","ts":"yesterday","name":"open_map"}"#.to_string(),
    }
}
