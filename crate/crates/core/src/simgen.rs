//! Synthetic log corpora with ground-truth users, visits and types.
//!
//! Every generated gap keeps at least `boundary_margin_ms` away from the
//! stitch and visit thresholds, so ingesting and resolving the output must
//! reproduce the ground truth exactly.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use chrono::{NaiveDate, NaiveTime};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::UserType;
use crate::event_model::{HelpResourceKind, TimestampMs, ViewKind};
use crate::sessionizer::{user_id_for, DEFAULT_STITCH_GAP_MS, DEFAULT_VISIT_GAP_MS};

pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";
const MIN_SPLIT_GAP_MS: i64 = 1_000;
const MAX_RETURN_DELAY_MS: i64 = 10 * 86_400_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("cannot write {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Inclusive integer range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub min: usize,
    pub max: usize,
}

impl Span {
    pub const fn new(min: usize, max: usize) -> Self {
        Self { min, max }
    }

    fn sample(&self, rng: &mut impl Rng) -> usize {
        rng.random_range(self.min..=self.max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorSpec {
    pub seed: u64,
    pub user_counts: BTreeMap<UserType, usize>,
    pub start_date: NaiveDate,
    pub span_days: u32,
    pub visits_per_ms_user: Span,
    /// Mean visit duration in seconds per user type.
    pub visit_duration_mean_s: BTreeMap<UserType, f64>,
    /// Durations are drawn uniformly from `mean * (1 ± spread)`.
    pub duration_spread: f64,
    pub events_per_visit: Span,
    /// Probability that a visit contains a cache clear (new session id).
    pub cache_clear_probability: f64,
    /// Probability that a user reuses an IP of an earlier, already finished user.
    pub ip_sharing_probability: f64,
    pub boundary_margin_ms: i64,
    pub stitch_gap_ms: i64,
    pub visit_gap_ms: i64,
    pub files: usize,
    pub shuffle_lines: bool,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            seed: 42,
            user_counts: [
                (UserType::DemoUser, 55),
                (UserType::DataStruggler, 5),
                (UserType::SingleSessionExplorer, 15),
                (UserType::MultiSessionExplorer, 25),
            ]
            .into(),
            start_date: NaiveDate::from_ymd_opt(2024, 1, 1).expect("valid date"),
            span_days: 180,
            visits_per_ms_user: Span::new(2, 5),
            visit_duration_mean_s: [
                (UserType::DemoUser, 300.0),
                (UserType::DataStruggler, 420.0),
                (UserType::SingleSessionExplorer, 600.0),
                (UserType::MultiSessionExplorer, 900.0),
            ]
            .into(),
            duration_spread: 0.5,
            events_per_visit: Span::new(6, 30),
            cache_clear_probability: 0.3,
            ip_sharing_probability: 0.2,
            boundary_margin_ms: 5_000,
            stitch_gap_ms: DEFAULT_STITCH_GAP_MS,
            visit_gap_ms: DEFAULT_VISIT_GAP_MS,
            files: 4,
            shuffle_lines: true,
        }
    }
}

impl GeneratorSpec {
    pub fn with_counts(seed: u64, counts: [usize; 4]) -> Self {
        Self {
            seed,
            user_counts: UserType::ALL.into_iter().zip(counts).collect(),
            ..Self::default()
        }
    }

    pub fn total_users(&self) -> usize {
        self.user_counts.values().sum()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidSpec(m));
        if self.boundary_margin_ms <= 0 {
            return bad("boundary_margin_ms must be positive".into());
        }
        if self.stitch_gap_ms <= 0 || self.visit_gap_ms <= self.stitch_gap_ms {
            return bad("require 0 < stitch_gap_ms < visit_gap_ms".into());
        }
        if self.stitch_gap_ms - self.boundary_margin_ms < MIN_SPLIT_GAP_MS {
            return bad(format!(
                "boundary_margin_ms leaves no room for cache-clear gaps below the {} ms stitch gap",
                self.stitch_gap_ms
            ));
        }
        for (name, p) in [
            ("cache_clear_probability", self.cache_clear_probability),
            ("ip_sharing_probability", self.ip_sharing_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be within [0, 1], got {p}"));
            }
        }
        if !(0.0..1.0).contains(&self.duration_spread) {
            return bad("duration_spread must be within [0, 1)".into());
        }
        for span in [self.visits_per_ms_user, self.events_per_visit] {
            if span.min > span.max {
                return bad(format!("range {}..={} is empty", span.min, span.max));
            }
        }
        if self.visits_per_ms_user.min < 2 {
            return bad("multi-session users need at least 2 visits".into());
        }
        if self.events_per_visit.min < 1 {
            return bad("visits need at least one event".into());
        }
        for t in UserType::ALL {
            match self.visit_duration_mean_s.get(&t) {
                Some(m) if m.is_finite() && *m > 0.0 => {}
                _ => return bad(format!("missing or non-positive visit duration mean for {t}")),
            }
        }
        if self.files == 0 {
            return bad("files must be at least 1".into());
        }
        Ok(())
    }
}

/// Expected reconstruction of one generated user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthUser {
    pub user_id: String,
    pub ip_hash: String,
    pub user_type: UserType,
    pub session_ids: Vec<String>,
    /// First timestamp of every session after the first.
    pub split_points: Vec<TimestampMs>,
    /// (start, end) of each visit.
    pub visits: Vec<(TimestampMs, TimestampMs)>,
    pub views: BTreeSet<ViewKind>,
    pub networks_created: usize,
    pub event_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub users: Vec<TruthUser>,
    pub type_counts: BTreeMap<UserType, usize>,
    pub total_events: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedCorpus {
    /// `(file name, contents)` of each emitted log file.
    pub files: Vec<(String, String)>,
    pub truth: GroundTruth,
}

impl GeneratedCorpus {
    pub fn write_to_dir(&self, dir: &Path) -> Result<(), SimError> {
        let io = |path: &Path| {
            let path = path.display().to_string();
            move |source| SimError::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        for (name, text) in &self.files {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(io(&p))?;
        }
        let p = dir.join(GROUND_TRUTH_FILE);
        let truth = serde_json::to_string_pretty(&self.truth).expect("ground truth serializes");
        std::fs::write(&p, truth + "\n").map_err(io(&p))
    }
}

#[derive(Serialize)]
struct WireRecord<'a> {
    sid: &'a str,
    ip: &'a str,
    ts: TimestampMs,
    name: &'a str,
}

struct PlannedEvent {
    ts: TimestampMs,
    name: &'static str,
}

struct PlannedUser {
    user_type: UserType,
    events: Vec<PlannedEvent>,
    /// Indices into `events` where a new session begins.
    splits: Vec<usize>,
    visits: Vec<(TimestampMs, TimestampMs)>,
    views: BTreeSet<ViewKind>,
    networks_created: usize,
}

fn weighted<T: Copy>(rng: &mut impl Rng, items: &[(T, f64)]) -> T {
    let total: f64 = items.iter().map(|(_, w)| w).sum();
    let mut x = rng.random_range(0.0..total);
    for &(item, w) in items {
        if x < w {
            return item;
        }
        x -= w;
    }
    items[items.len() - 1].0
}

fn help_event(kind: HelpResourceKind) -> &'static str {
    match kind {
        HelpResourceKind::Examples => "help_examples",
        HelpResourceKind::Tutorials => "help_tutorial",
        HelpResourceKind::Videos => "help_video",
        HelpResourceKind::Demos => "help_demo",
        HelpResourceKind::DataFormatting => "help_data_formatting",
    }
}

fn help_profile(t: UserType) -> (f64, [(HelpResourceKind, f64); 5]) {
    use HelpResourceKind::*;
    match t {
        UserType::DemoUser => (0.10, [(Examples, 5.0), (Demos, 2.0), (Videos, 1.0), (Tutorials, 1.0), (DataFormatting, 1.0)]),
        UserType::DataStruggler => (0.35, [(Tutorials, 4.0), (Videos, 3.0), (DataFormatting, 1.5), (Examples, 1.0), (Demos, 0.5)]),
        UserType::SingleSessionExplorer => (0.10, [(Examples, 4.0), (Tutorials, 2.0), (Demos, 1.5), (Videos, 1.0), (DataFormatting, 1.5)]),
        UserType::MultiSessionExplorer => (0.08, [(Examples, 5.5), (Tutorials, 2.0), (Videos, 1.5), (Demos, 0.5), (DataFormatting, 0.5)]),
    }
}

fn interactions(view: ViewKind) -> &'static [&'static str] {
    match view {
        ViewKind::NodeLink => &[
            "hover_node", "hover_node", "select_node", "pan_zoom", "search_label", "filter_node_type",
            "filter_link_type", "time_slider", "change_layout", "change_encoding",
        ],
        ViewKind::Matrix => &[
            "hover_node", "select_node", "pan_zoom", "matrix_reorder", "matrix_reorder", "filter_link_weight",
            "filter_node_type", "change_encoding",
        ],
        ViewKind::Timeline => &["hover_node", "select_node", "time_slider", "time_slider", "filter_link_type", "search_label"],
        ViewKind::Map => &["hover_node", "pan_zoom", "pan_zoom", "time_slider", "filter_node_type", "select_node"],
        ViewKind::Coordinated => &[
            "hover_node", "select_node", "matrix_reorder", "change_layout", "time_slider", "filter_link_weight", "pan_zoom",
        ],
        ViewKind::NoView => &["search_label"],
    }
}

const MISC_EVENTS: &[&str] = &[
    "bookmark_create", "bookmark_annotate", "bookmark_restore", "contact_team", "join_mailing_list",
    "error_report", "feedback_submit", "share_link", "download_network",
];

struct Generator<'a> {
    spec: &'a GeneratorSpec,
    rng: ChaCha8Rng,
}

impl Generator<'_> {
    fn choose_views(&mut self, t: UserType) -> Vec<ViewKind> {
        let count = match t {
            UserType::DemoUser => self.rng.random_range(1..=3),
            UserType::DataStruggler => usize::from(self.rng.random_bool(0.5)),
            UserType::SingleSessionExplorer => self.rng.random_range(1..=4),
            UserType::MultiSessionExplorer => self.rng.random_range(2..=5),
        };
        let mut pool = ViewKind::TOOL_VIEWS.to_vec();
        pool.shuffle(&mut self.rng);
        pool.truncate(count);
        // node-link tends to come first
        if let Some(i) = pool.iter().position(|&v| v == ViewKind::NodeLink) {
            if self.rng.random_bool(0.8) {
                pool.swap(0, i);
            }
        }
        pool
    }

    /// Timestamp offsets of one visit (first 0, last = duration) with every
    /// gap at most `max_gap`, plus the index of a planned cache clear.
    fn visit_offsets(&mut self, duration: i64, count: usize) -> (Vec<i64>, Option<usize>) {
        let max_gap = self.spec.visit_gap_ms - self.spec.boundary_margin_ms;
        let mut offs: Vec<i64> = Vec::with_capacity(count + 4);
        offs.push(0);
        if count > 1 {
            for _ in 0..count.saturating_sub(2) {
                offs.push(self.rng.random_range(0..=duration));
            }
            offs.push(duration);
        }
        offs.sort_unstable();
        let mut i = 1;
        while i < offs.len() {
            let gap = offs[i] - offs[i - 1];
            if gap > max_gap {
                offs.insert(i, offs[i - 1] + gap / 2);
            } else {
                i += 1;
            }
        }

        let mut split = None;
        if offs.len() > 1 && self.rng.random_bool(self.spec.cache_clear_probability) {
            let max_split = self.spec.stitch_gap_ms - self.spec.boundary_margin_ms;
            let at = self.rng.random_range(1..offs.len());
            let gap = offs[at] - offs[at - 1];
            if (MIN_SPLIT_GAP_MS..=max_split).contains(&gap) {
                split = Some(at);
            } else if gap > max_split {
                let s = self.rng.random_range(MIN_SPLIT_GAP_MS..=max_split);
                offs.insert(at, offs[at] - s);
                split = Some(at + 1);
            }
        }
        (offs, split)
    }

    fn visit_names(
        &mut self,
        t: UserType,
        visit: usize,
        views: &[ViewKind],
        count: usize,
        networks: &mut usize,
    ) -> Vec<&'static str> {
        let mut opener: Vec<&'static str> = Vec::new();
        match t {
            UserType::DemoUser => opener.push("load_demo_data"),
            UserType::DataStruggler => {
                if visit == 0 {
                    opener.push("upload_own_data");
                }
                for _ in 0..self.rng.random_range(1..=2) {
                    opener.extend(["create_network_attempt", "create_network_failure"]);
                }
                if !views.is_empty() {
                    opener.push("load_demo_data");
                }
            }
            UserType::SingleSessionExplorer | UserType::MultiSessionExplorer => {
                if visit == 0 || self.rng.random_bool(0.3) {
                    opener.extend(["upload_own_data", "create_network_attempt", "create_network_success"]);
                    *networks += 1;
                }
            }
        }

        let (help_p, help_weights) = help_profile(t);
        let fillers = count.saturating_sub(opener.len() + views.len());
        // spread fillers across the view blocks; the first block also takes
        // the remainder when there are no views
        let blocks = views.len().max(1);
        let mut per_block = vec![0usize; blocks];
        for _ in 0..fillers {
            per_block[self.rng.random_range(0..blocks)] += 1;
        }

        let mut names = opener;
        for (b, n) in per_block.into_iter().enumerate() {
            let view = views.get(b).copied();
            if let Some(v) = view {
                names.push(match v {
                    ViewKind::NodeLink => "open_nodelink",
                    ViewKind::Matrix => "open_matrix",
                    ViewKind::Timeline => "open_timeline",
                    ViewKind::Map => "open_map",
                    ViewKind::Coordinated => "open_coordinated",
                    ViewKind::NoView => unreachable!("tool views only"),
                });
            }
            for _ in 0..n {
                let name = if self.rng.random_bool(help_p) {
                    help_event(weighted(&mut self.rng, &help_weights))
                } else if self.rng.random_bool(0.05) {
                    *MISC_EVENTS.choose(&mut self.rng).expect("non-empty")
                } else if let Some(v) = view {
                    *interactions(v).choose(&mut self.rng).expect("non-empty")
                } else if t == UserType::DataStruggler && self.rng.random_bool(0.3) {
                    "create_network_attempt"
                } else {
                    *MISC_EVENTS.choose(&mut self.rng).expect("non-empty")
                };
                names.push(name);
            }
        }
        names
    }

    fn plan_user(&mut self, t: UserType, start: TimestampMs) -> PlannedUser {
        let spec = self.spec;
        let visit_count = match t {
            UserType::MultiSessionExplorer => spec.visits_per_ms_user.sample(&mut self.rng),
            _ => 1,
        };
        let views = self.choose_views(t);
        let mut per_visit: Vec<Vec<ViewKind>> = vec![Vec::new(); visit_count];
        for (i, &v) in views.iter().enumerate() {
            let k = if i == 0 { 0 } else { self.rng.random_range(0..visit_count) };
            per_visit[k].push(v);
        }
        if !views.is_empty() {
            for vv in per_visit.iter_mut().filter(|vv| vv.is_empty()) {
                vv.push(*views.choose(&mut self.rng).expect("non-empty"));
            }
        }

        let mean_ms = spec.visit_duration_mean_s[&t] * 1000.0;
        let (lo, hi) = (mean_ms * (1.0 - spec.duration_spread), mean_ms * (1.0 + spec.duration_spread));
        let mut user = PlannedUser {
            user_type: t,
            events: Vec::new(),
            splits: Vec::new(),
            visits: Vec::new(),
            views: views.iter().copied().collect(),
            networks_created: 0,
        };
        let mut visit_start = start;
        for (k, visit_views) in per_visit.iter().enumerate() {
            if k > 0 {
                let prev_end = user.visits[k - 1].1;
                let min_gap = spec.visit_gap_ms + spec.boundary_margin_ms;
                visit_start = prev_end + self.rng.random_range(min_gap..=min_gap + MAX_RETURN_DELAY_MS);
            }
            let duration = if hi > lo { self.rng.random_range(lo..hi) } else { lo }.round() as i64;
            // longest opener (struggler) plus one open event per view
            let required = 6 + visit_views.len();
            let count = spec.events_per_visit.sample(&mut self.rng).max(required);
            let (offs, split) = self.visit_offsets(duration, count);
            let mut networks = user.networks_created;
            let names = self.visit_names(t, k, visit_views, offs.len(), &mut networks);
            user.networks_created = networks;
            debug_assert_eq!(names.len(), offs.len());
            if let Some(at) = split {
                user.splits.push(user.events.len() + at);
            }
            for (off, name) in offs.iter().zip(names) {
                user.events.push(PlannedEvent { ts: visit_start + off, name });
            }
            let last = visit_start + offs.last().copied().unwrap_or(0);
            user.visits.push((visit_start, last));
        }
        user
    }
}

fn fresh_token(rng: &mut impl Rng, prefix: &str, used: &mut HashSet<String>) -> String {
    loop {
        let token = format!("{prefix}{:016x}", rng.random::<u64>());
        if used.insert(token.clone()) {
            return token;
        }
    }
}

/// Generates a corpus; identical specs yield identical bytes.
pub fn generate_corpus(spec: &GeneratorSpec) -> Result<GeneratedCorpus, SimError> {
    spec.validate()?;
    let mut gen = Generator { spec, rng: ChaCha8Rng::seed_from_u64(spec.seed) };
    let origin = spec.start_date.and_time(NaiveTime::MIN).and_utc().timestamp_millis();
    let span_ms = i64::from(spec.span_days) * 86_400_000;

    let mut planned = Vec::with_capacity(spec.total_users());
    for t in UserType::ALL {
        for _ in 0..spec.user_counts.get(&t).copied().unwrap_or(0) {
            let start = origin + gen.rng.random_range(0..=span_ms);
            planned.push(gen.plan_user(t, start));
        }
    }
    planned.sort_by_key(|p| p.events[0].ts);

    // IPs are shared only between users whose activity is separated by more
    // than the stitch gap plus margin.
    let mut used = HashSet::new();
    let mut ips: Vec<(String, TimestampMs)> = Vec::new();
    let mut truth_users = Vec::with_capacity(planned.len());
    let mut lines_by_file: Vec<Vec<String>> = vec![Vec::new(); spec.files];
    let mut total_events = 0;
    for p in &planned {
        let first = p.events[0].ts;
        let last = p.events[p.events.len() - 1].ts;
        let free: Vec<usize> = ips
            .iter()
            .enumerate()
            .filter(|(_, (_, end))| first - end > spec.stitch_gap_ms + spec.boundary_margin_ms)
            .map(|(i, _)| i)
            .collect();
        let reuse = !free.is_empty() && gen.rng.random_bool(spec.ip_sharing_probability);
        let ip = if reuse {
            let i = *free.choose(&mut gen.rng).expect("non-empty");
            ips[i].1 = last;
            ips[i].0.clone()
        } else {
            let ip = fresh_token(&mut gen.rng, "ip", &mut used);
            ips.push((ip.clone(), last));
            ip
        };

        let mut session_ids = vec![fresh_token(&mut gen.rng, "s", &mut used)];
        let mut split_points = Vec::new();
        let mut split_iter = p.splits.iter().peekable();
        for (i, ev) in p.events.iter().enumerate() {
            if split_iter.peek() == Some(&&i) {
                split_iter.next();
                session_ids.push(fresh_token(&mut gen.rng, "s", &mut used));
                split_points.push(ev.ts);
            }
            let sid = session_ids.last().expect("non-empty");
            let file = (session_ids.len() + truth_users.len()) % spec.files;
            let record = WireRecord { sid, ip: &ip, ts: ev.ts, name: ev.name };
            lines_by_file[file].push(serde_json::to_string(&record).expect("record serializes"));
        }
        total_events += p.events.len();
        truth_users.push(TruthUser {
            user_id: user_id_for(&ip, &session_ids[0]),
            ip_hash: ip,
            user_type: p.user_type,
            session_ids,
            split_points,
            visits: p.visits.clone(),
            views: p.views.clone(),
            networks_created: p.networks_created,
            event_count: p.events.len(),
        });
    }

    let files = lines_by_file
        .into_iter()
        .enumerate()
        .map(|(i, mut lines)| {
            if spec.shuffle_lines {
                lines.shuffle(&mut gen.rng);
            }
            let mut text = lines.join("\n");
            if !text.is_empty() {
                text.push('\n');
            }
            (format!("part-{i:03}.vlog"), text)
        })
        .collect();

    let mut type_counts: BTreeMap<UserType, usize> = UserType::ALL.iter().map(|&t| (t, 0)).collect();
    for u in &truth_users {
        *type_counts.entry(u.user_type).or_insert(0) += 1;
    }
    Ok(GeneratedCorpus {
        files,
        truth: GroundTruth { seed: spec.seed, users: truth_users, type_counts, total_events },
    })
}
