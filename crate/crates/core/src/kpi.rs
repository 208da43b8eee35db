//! KPI computations for the Overview and Visualization pages.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{Classification, UserType};
use crate::event_model::{EventCategory, EventRegistry, HelpResourceKind, IntentGroup, TimestampMs, ViewKind};
use crate::sessionizer::{Corpus, UserRecord, DEFAULT_VISIT_GAP_MS};
use crate::stats::Summary;

pub const DEFAULT_IDLE_CAP_MS: i64 = 300_000;
pub const DEFAULT_TOP_FEATURES: usize = 10;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum KpiError {
    #[error("annotation `{label}` starts after it ends ({start} > {end})")]
    InvalidAnnotation { label: String, start: NaiveDate, end: NaiveDate },
    #[error("idle cap must be in (0, {visit_gap}] ms, got {idle_cap}")]
    InvalidIdleCap { idle_cap: i64, visit_gap: i64 },
    #[error("invalid annotations document: {0}")]
    AnnotationsFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DwellParams {
    pub idle_cap_ms: i64,
}

impl Default for DwellParams {
    fn default() -> Self {
        Self { idle_cap_ms: DEFAULT_IDLE_CAP_MS }
    }
}

impl DwellParams {
    pub fn new(idle_cap_ms: i64, visit_gap_ms: i64) -> Result<Self, KpiError> {
        if idle_cap_ms <= 0 || idle_cap_ms > visit_gap_ms {
            return Err(KpiError::InvalidIdleCap { idle_cap: idle_cap_ms, visit_gap: visit_gap_ms });
        }
        Ok(Self { idle_cap_ms })
    }

    pub fn with_default_visit_gap(idle_cap_ms: i64) -> Result<Self, KpiError> {
        Self::new(idle_cap_ms, DEFAULT_VISIT_GAP_MS)
    }
}

/// Calendar month in UTC, serialized as `YYYY-MM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct YearMonth {
    pub year: i32,
    pub month: u32,
}

impl YearMonth {
    pub fn of_timestamp(ts: TimestampMs) -> YearMonth {
        let dt = DateTime::from_timestamp_millis(ts).expect("timestamp within chrono range");
        YearMonth { year: dt.year(), month: dt.month() }
    }

    pub fn of_date(d: NaiveDate) -> YearMonth {
        YearMonth { year: d.year(), month: d.month() }
    }

    pub fn next(self) -> YearMonth {
        if self.month == 12 {
            YearMonth { year: self.year + 1, month: 1 }
        } else {
            YearMonth { year: self.year, month: self.month + 1 }
        }
    }
}

impl fmt::Display for YearMonth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

impl FromStr for YearMonth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (y, m) = s.split_once('-').ok_or_else(|| format!("bad month `{s}`"))?;
        let year = y.parse().map_err(|_| format!("bad year in `{s}`"))?;
        let month: u32 = m.parse().map_err(|_| format!("bad month in `{s}`"))?;
        if !(1..=12).contains(&month) {
            return Err(format!("month out of range in `{s}`"));
        }
        Ok(YearMonth { year, month })
    }
}

impl Serialize for YearMonth {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for YearMonth {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonthlyCount {
    pub month: YearMonth,
    pub visits: usize,
}

/// Visits per UTC month of their start, contiguous from the first to the
/// last month that has a visit.
pub fn monthly_visit_trend(corpus: &Corpus) -> Vec<MonthlyCount> {
    let mut counts: BTreeMap<YearMonth, usize> = BTreeMap::new();
    for user in &corpus.users {
        for visit in &user.visits {
            *counts.entry(YearMonth::of_timestamp(visit.start_ts)).or_insert(0) += 1;
        }
    }
    let (Some(&first), Some(&last)) = (counts.keys().next(), counts.keys().next_back()) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut m = first;
    while m <= last {
        out.push(MonthlyCount { month: m, visits: counts.get(&m).copied().unwrap_or(0) });
        m = m.next();
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationKind {
    Workshop,
    Course,
    Coaching,
    Release,
    Other,
}

/// A dated external event shown on the visit trend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub label: String,
    pub kind: AnnotationKind,
    pub start_date: NaiveDate,
    pub end_date: NaiveDate,
}

impl Annotation {
    pub fn validate(&self) -> Result<(), KpiError> {
        if self.start_date > self.end_date {
            return Err(KpiError::InvalidAnnotation {
                label: self.label.clone(),
                start: self.start_date,
                end: self.end_date,
            });
        }
        Ok(())
    }
}

/// Parses an annotations document (a JSON array of annotations).
pub fn parse_annotations(text: &str) -> Result<Vec<Annotation>, KpiError> {
    let list: Vec<Annotation> =
        serde_json::from_str(text).map_err(|e| KpiError::AnnotationsFormat(e.to_string()))?;
    for a in &list {
        a.validate()?;
    }
    Ok(list)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedMonth {
    pub month: YearMonth,
    pub visits: usize,
    /// Indices into [`AnnotatedTrend::annotations`].
    pub annotations: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedTrend {
    pub months: Vec<AnnotatedMonth>,
    pub annotations: Vec<Annotation>,
}

/// Attaches each annotation to every trend month its date range touches.
pub fn annotate_trend(trend: &[MonthlyCount], annotations: &[Annotation]) -> Result<AnnotatedTrend, KpiError> {
    for a in annotations {
        a.validate()?;
    }
    let months = trend
        .iter()
        .map(|mc| AnnotatedMonth {
            month: mc.month,
            visits: mc.visits,
            annotations: annotations
                .iter()
                .enumerate()
                .filter(|(_, a)| {
                    YearMonth::of_date(a.start_date) <= mc.month && mc.month <= YearMonth::of_date(a.end_date)
                })
                .map(|(i, _)| i)
                .collect(),
        })
        .collect();
    Ok(AnnotatedTrend { months, annotations: annotations.to_vec() })
}

fn visit_seconds(ms: i64) -> f64 {
    ms as f64 / 1000.0
}

fn per_type<T>(mut f: impl FnMut(UserType) -> T) -> BTreeMap<UserType, T> {
    UserType::ALL.iter().map(|&t| (t, f(t))).collect()
}

fn users_of<'a>(
    corpus: &'a Corpus,
    classes: &'a Classification,
    t: UserType,
) -> impl Iterator<Item = &'a UserRecord> + 'a {
    corpus
        .users
        .iter()
        .filter(move |u| classes.type_of(&u.user_id) == Some(t))
}

/// Visit-duration summary (seconds) per user type; `None` for types with no
/// users.
pub fn session_length_distribution(
    corpus: &Corpus,
    classes: &Classification,
) -> BTreeMap<UserType, Option<Summary>> {
    per_type(|t| {
        let durations: Vec<f64> = users_of(corpus, classes, t)
            .flat_map(|u| u.visits.iter().map(|v| visit_seconds(v.duration_ms())))
            .collect();
        Summary::of(&durations)
    })
}

/// Share of users with two or more visits; 0 for an empty corpus.
pub fn returning_rate(corpus: &Corpus) -> f64 {
    if corpus.users.is_empty() {
        return 0.0;
    }
    let returning = corpus.users.iter().filter(|u| u.visits.len() >= 2).count();
    returning as f64 / corpus.users.len() as f64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureCount {
    pub name: String,
    pub count: usize,
}

/// Sorts by count descending, then name ascending.
fn ranked(counts: HashMap<&str, usize>) -> Vec<FeatureCount> {
    let mut out: Vec<FeatureCount> = counts
        .into_iter()
        .map(|(name, count)| FeatureCount { name: name.to_string(), count })
        .collect();
    out.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.name.cmp(&b.name)));
    out
}

pub fn feature_frequency(corpus: &Corpus, n: usize) -> Vec<FeatureCount> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for e in corpus.users.iter().flat_map(|u| &u.events) {
        *counts.entry(e.name.as_str()).or_insert(0) += 1;
    }
    let mut out = ranked(counts);
    out.truncate(n);
    out
}

pub type HelpMatrix = BTreeMap<UserType, BTreeMap<HelpResourceKind, usize>>;

pub fn help_usage_by_type(corpus: &Corpus, classes: &Classification, registry: &EventRegistry) -> HelpMatrix {
    per_type(|t| {
        let mut row: BTreeMap<HelpResourceKind, usize> =
            HelpResourceKind::ALL.iter().map(|&k| (k, 0)).collect();
        for e in users_of(corpus, classes, t).flat_map(|u| &u.events) {
            if e.category != EventCategory::SupportHelp {
                continue;
            }
            if let Some(kind) = registry.help_kind_of(&e.name) {
                *row.entry(kind).or_insert(0) += 1;
            }
        }
        row
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeSpent {
    pub users: usize,
    pub visits: usize,
    pub total_seconds: f64,
    /// Mean visit duration; 0 when there are no visits.
    pub mean_visit_seconds: f64,
}

pub fn time_by_type(corpus: &Corpus, classes: &Classification) -> BTreeMap<UserType, TimeSpent> {
    per_type(|t| {
        let mut users = 0;
        let mut visits = 0;
        let mut total_ms: i64 = 0;
        for u in users_of(corpus, classes, t) {
            users += 1;
            visits += u.visits.len();
            total_ms += u.total_visit_ms();
        }
        let total_seconds = visit_seconds(total_ms);
        TimeSpent {
            users,
            visits,
            total_seconds,
            mean_visit_seconds: if visits == 0 { 0.0 } else { total_seconds / visits as f64 },
        }
    })
}

/// Walks a visit's events tracking the current view. The view resets to
/// `NoView` at each visit start and changes on `open_<view>` events.
pub fn current_views<'a>(
    events: &'a [crate::event_model::Event],
    registry: &'a EventRegistry,
) -> impl Iterator<Item = ViewKind> + 'a {
    events.iter().scan(ViewKind::NoView, move |view, e| {
        if let Some(v) = registry.view_marker(&e.name) {
            *view = v;
        }
        Some(*view)
    })
}

/// Per-view dwell in milliseconds for one user.
pub fn view_dwell_ms(user: &UserRecord, registry: &EventRegistry, params: &DwellParams) -> BTreeMap<ViewKind, i64> {
    let mut dwell: BTreeMap<ViewKind, i64> = ViewKind::ALL.iter().map(|&v| (v, 0)).collect();
    for visit in &user.visits {
        let events = user.visit_events(visit);
        let views: Vec<ViewKind> = current_views(events, registry).collect();
        for (i, pair) in events.windows(2).enumerate() {
            let gap = pair[1].timestamp - pair[0].timestamp;
            *dwell.entry(views[i]).or_insert(0) += gap.min(params.idle_cap_ms);
        }
    }
    dwell
}

/// Per-view dwell in seconds for one user.
pub fn view_dwell(user: &UserRecord, registry: &EventRegistry, params: &DwellParams) -> BTreeMap<ViewKind, f64> {
    view_dwell_ms(user, registry, params)
        .into_iter()
        .map(|(v, ms)| (v, visit_seconds(ms)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewColumn {
    pub view: ViewKind,
    pub user_count: usize,
    /// Summary of per-user dwell seconds over the users of this view.
    pub time_per_user: Option<Summary>,
    pub filtering_usage: Vec<FeatureCount>,
    pub representation_usage: Vec<FeatureCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualizationKpis {
    pub total_users: usize,
    pub views: Vec<ViewColumn>,
}

/// Views in which the user had at least one event.
pub fn views_used(user: &UserRecord, registry: &EventRegistry) -> BTreeSet<ViewKind> {
    user.visits
        .iter()
        .flat_map(|v| current_views(user.visit_events(v), registry).collect::<Vec<_>>())
        .filter(|&v| v != ViewKind::NoView)
        .collect()
}

pub fn visualization_kpis(corpus: &Corpus, registry: &EventRegistry, params: &DwellParams) -> VisualizationKpis {
    #[derive(Default)]
    struct Acc<'a> {
        users: usize,
        dwell: Vec<f64>,
        filtering: HashMap<&'a str, usize>,
        representation: HashMap<&'a str, usize>,
    }
    let mut acc: BTreeMap<ViewKind, Acc> = ViewKind::TOOL_VIEWS.iter().map(|&v| (v, Acc::default())).collect();

    for user in &corpus.users {
        let mut seen = BTreeSet::new();
        for visit in &user.visits {
            let events = user.visit_events(visit);
            for (e, view) in events.iter().zip(current_views(events, registry)) {
                let Some(col) = acc.get_mut(&view) else { continue };
                seen.insert(view);
                match registry.get(&e.name).map(|d| d.intent_group) {
                    Some(IntentGroup::DataFiltering) => *col.filtering.entry(&e.name).or_insert(0) += 1,
                    Some(IntentGroup::RepresentationChange) => {
                        *col.representation.entry(&e.name).or_insert(0) += 1
                    }
                    _ => {}
                }
            }
        }
        let dwell = view_dwell(user, registry, params);
        for view in seen {
            let col = acc.get_mut(&view).expect("tool view");
            col.users += 1;
            col.dwell.push(dwell[&view]);
        }
    }

    VisualizationKpis {
        total_users: corpus.users.len(),
        views: acc
            .into_iter()
            .map(|(view, a)| ViewColumn {
                view,
                user_count: a.users,
                time_per_user: Summary::of(&a.dwell),
                filtering_usage: ranked(a.filtering),
                representation_usage: ranked(a.representation),
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverviewKpis {
    pub total_users: usize,
    pub users_by_type: BTreeMap<UserType, usize>,
    pub monthly_visits: Vec<MonthlyCount>,
    pub session_length_dist: BTreeMap<UserType, Option<Summary>>,
    pub returning_rate: f64,
    pub annotated_trend: AnnotatedTrend,
    pub feature_frequency: Vec<FeatureCount>,
    pub help_usage: HelpMatrix,
    pub time_by_type: BTreeMap<UserType, TimeSpent>,
}

pub fn overview_kpis(
    corpus: &Corpus,
    classes: &Classification,
    registry: &EventRegistry,
    annotations: &[Annotation],
    top_n: usize,
) -> Result<OverviewKpis, KpiError> {
    let monthly_visits = monthly_visit_trend(corpus);
    let annotated_trend = annotate_trend(&monthly_visits, annotations)?;
    Ok(OverviewKpis {
        total_users: corpus.users.len(),
        users_by_type: per_type(|t| classes.count(t)),
        monthly_visits,
        session_length_dist: session_length_distribution(corpus, classes),
        returning_rate: returning_rate(corpus),
        annotated_trend,
        feature_frequency: feature_frequency(corpus, top_n),
        help_usage: help_usage_by_type(corpus, classes, registry),
        time_by_type: time_by_type(corpus, classes),
    })
}

/// One row of the User page list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserSummary {
    pub user_id: String,
    #[serde(rename = "type")]
    pub user_type: UserType,
    pub visit_count: usize,
    pub networks_created: usize,
    pub first_seen: TimestampMs,
    pub last_seen: TimestampMs,
}

pub fn user_summaries(corpus: &Corpus, classes: &Classification) -> Vec<UserSummary> {
    corpus
        .users
        .iter()
        .filter_map(|u| {
            let signals = classes.signals.get(&u.user_id)?;
            Some(UserSummary {
                user_id: u.user_id.clone(),
                user_type: classes.type_of(&u.user_id)?,
                visit_count: u.visits.len(),
                networks_created: signals.networks_created,
                first_seen: u.first_ts(),
                last_seen: u.last_ts(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::classify_corpus;
    use crate::event_model::RawEvent;
    use crate::sessionizer::{segment_visits, StitchParams};

    fn user(id: &str, stamped: &[(&str, i64)]) -> UserRecord {
        let reg = EventRegistry::builtin();
        let events = stamped
            .iter()
            .map(|(name, ts)| {
                reg.validate_event(&RawEvent {
                    session_id: Some(format!("s-{id}")),
                    ip_hash: Some("h".into()),
                    timestamp: Some(*ts),
                    name: Some(name.to_string()),
                    ..RawEvent::default()
                })
                .unwrap()
            })
            .collect();
        segment_visits(
            UserRecord {
                user_id: id.into(),
                ip_hash: "h".into(),
                session_ids: vec![format!("s-{id}")],
                events,
                visits: Vec::new(),
            },
            &StitchParams::default(),
        )
    }

    fn ts(date: &str) -> i64 {
        DateTime::parse_from_rfc3339(date).unwrap().timestamp_millis()
    }

    fn date(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    #[test]
    fn trend_single_and_gap_months() {
        let c = Corpus { users: vec![user("a", &[("open_map", ts("2024-03-15T10:00:00Z"))])] };
        let t = monthly_visit_trend(&c);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].month.to_string(), "2024-03");
        assert_eq!(t[0].visits, 1);

        let c = Corpus {
            users: vec![
                user("a", &[("open_map", ts("2024-01-05T00:00:00Z"))]),
                user("b", &[("open_map", ts("2024-03-31T23:59:59Z"))]),
            ],
        };
        let t = monthly_visit_trend(&c);
        let flat: Vec<(String, usize)> = t.iter().map(|m| (m.month.to_string(), m.visits)).collect();
        assert_eq!(flat, [("2024-01".into(), 1), ("2024-02".into(), 0), ("2024-03".into(), 1)]);
        assert!(monthly_visit_trend(&Corpus::default()).is_empty());
    }

    #[test]
    fn year_rolls_over() {
        let c = Corpus {
            users: vec![
                user("a", &[("open_map", ts("2023-11-05T00:00:00Z"))]),
                user("b", &[("open_map", ts("2024-02-01T00:00:00Z"))]),
            ],
        };
        let months: Vec<String> = monthly_visit_trend(&c).iter().map(|m| m.month.to_string()).collect();
        assert_eq!(months, ["2023-11", "2023-12", "2024-01", "2024-02"]);
    }

    #[test]
    fn returning_rate_examples() {
        assert_eq!(returning_rate(&Corpus::default()), 0.0);
        let single = |id| user(id, &[("open_map", 1_000)]);
        let c = Corpus {
            users: vec![
                single("a"),
                single("b"),
                single("c"),
                user("d", &[("open_map", 1_000), ("open_map", 5_000_000)]),
            ],
        };
        assert_eq!(returning_rate(&c), 0.25);
        let all_single = Corpus { users: vec![single("a"), single("b")] };
        assert_eq!(returning_rate(&all_single), 0.0);
    }

    #[test]
    fn feature_frequency_ties() {
        let c = Corpus {
            users: vec![user("a", &[("hover_node", 1), ("hover_node", 2), ("select_node", 3)])],
        };
        assert_eq!(
            feature_frequency(&c, 2),
            vec![
                FeatureCount { name: "hover_node".into(), count: 2 },
                FeatureCount { name: "select_node".into(), count: 1 }
            ]
        );
        let tie = Corpus {
            users: vec![user("a", &[("select_node", 1), ("hover_node", 2), ("select_node", 3), ("hover_node", 4)])],
        };
        assert_eq!(feature_frequency(&tie, 1), vec![FeatureCount { name: "hover_node".into(), count: 2 }]);
    }

    #[test]
    fn session_lengths_by_type() {
        let c = Corpus { users: vec![user("a", &[("load_demo_data", 1_000), ("open_map", 301_000)])] };
        let classes = classify_corpus(&c);
        let dist = session_length_distribution(&c, &classes);
        let demo = dist[&UserType::DemoUser].unwrap();
        assert_eq!((demo.min, demo.median, demo.max), (300.0, 300.0, 300.0));
        assert!(dist[&UserType::MultiSessionExplorer].is_none());
    }

    #[test]
    fn help_matrix() {
        let reg = EventRegistry::builtin();
        let c = Corpus {
            users: vec![user(
                "s",
                &[("upload_own_data", 1), ("help_tutorial", 2), ("help_tutorial", 3), ("help_tutorial", 4)],
            )],
        };
        let classes = classify_corpus(&c);
        let m = help_usage_by_type(&c, &classes, &reg);
        assert_eq!(m[&UserType::DataStruggler][&HelpResourceKind::Tutorials], 3);
        assert_eq!(m.values().flat_map(|r| r.values()).sum::<usize>(), 3);

        let none = Corpus { users: vec![user("d", &[("load_demo_data", 1)])] };
        let m = help_usage_by_type(&none, &classify_corpus(&none), &reg);
        assert_eq!(m.len(), 4);
        assert!(m.values().all(|r| r.len() == 5 && r.values().all(|&c| c == 0)));
    }

    #[test]
    fn dwell_state_machine() {
        let reg = EventRegistry::builtin();
        let p = DwellParams::default();
        let u = user(
            "a",
            &[("open_nodelink", 1), ("hover_node", 60_001), ("open_matrix", 120_001), ("hover_node", 150_001)],
        );
        let d = view_dwell(&u, &reg, &p);
        assert_eq!(d[&ViewKind::NodeLink], 120.0);
        assert_eq!(d[&ViewKind::Matrix], 30.0);
        assert_eq!(d[&ViewKind::NoView], 0.0);

        let single = user("b", &[("open_map", 5)]);
        assert!(view_dwell(&single, &reg, &p).values().all(|&s| s == 0.0));

        let idle = user("c", &[("open_nodelink", 1), ("hover_node", 600_001)]);
        assert_eq!(view_dwell(&idle, &reg, &p)[&ViewKind::NodeLink], 300.0);
    }

    #[test]
    fn dwell_does_not_bridge_visits() {
        let reg = EventRegistry::builtin();
        let u = user("a", &[("open_map", 1), ("hover_node", 10_001), ("hover_node", 3_000_000), ("hover_node", 3_010_000)]);
        assert_eq!(u.visits.len(), 2);
        let d = view_dwell(&u, &reg, &DwellParams::default());
        assert_eq!(d[&ViewKind::Map], 10.0);
        assert_eq!(d[&ViewKind::NoView], 10.0);
    }

    #[test]
    fn dwell_params_bounds() {
        assert!(DwellParams::new(0, 1_200_000).is_err());
        assert!(DwellParams::new(1_200_001, 1_200_000).is_err());
        assert!(DwellParams::new(1_200_000, 1_200_000).is_ok());
    }

    #[test]
    fn visualization_columns() {
        let reg = EventRegistry::builtin();
        let c = Corpus {
            users: vec![user(
                "a",
                &[("open_timeline", 1), ("time_slider", 1_001), ("time_slider", 2_001), ("open_matrix", 3_001), ("matrix_reorder", 4_001)],
            )],
        };
        let v = visualization_kpis(&c, &reg, &DwellParams::default());
        assert_eq!(v.views.len(), 5);
        let col = |k| v.views.iter().find(|c| c.view == k).unwrap();
        assert_eq!(col(ViewKind::Map).user_count, 0);
        assert!(col(ViewKind::Map).filtering_usage.is_empty());
        assert!(col(ViewKind::Map).time_per_user.is_none());
        assert_eq!(
            col(ViewKind::Timeline).filtering_usage,
            vec![FeatureCount { name: "time_slider".into(), count: 2 }]
        );
        assert_eq!(col(ViewKind::Timeline).user_count, 1);
        assert_eq!(col(ViewKind::Timeline).time_per_user.unwrap().mean, 3.0);
        assert_eq!(
            col(ViewKind::Matrix).representation_usage,
            vec![FeatureCount { name: "matrix_reorder".into(), count: 1 }]
        );
    }

    #[test]
    fn annotations_overlap_months() {
        let trend: Vec<MonthlyCount> = ["2024-01", "2024-02", "2024-03", "2024-04"]
            .iter()
            .map(|m| MonthlyCount { month: m.parse().unwrap(), visits: 1 })
            .collect();
        let course = Annotation {
            label: "course".into(),
            kind: AnnotationKind::Course,
            start_date: date("2024-02-10"),
            end_date: date("2024-03-20"),
        };
        let at = annotate_trend(&trend, std::slice::from_ref(&course)).unwrap();
        let tagged: Vec<String> = at
            .months
            .iter()
            .filter(|m| m.annotations == [0])
            .map(|m| m.month.to_string())
            .collect();
        assert_eq!(tagged, ["2024-02", "2024-03"]);

        let plain = annotate_trend(&trend, &[]).unwrap();
        assert!(plain.months.iter().all(|m| m.annotations.is_empty()));
        assert_eq!(plain.months.len(), trend.len());

        let bad = Annotation { start_date: date("2024-05-01"), end_date: date("2024-04-01"), ..course };
        assert!(matches!(annotate_trend(&trend, &[bad]), Err(KpiError::InvalidAnnotation { .. })));
    }

    #[test]
    fn annotations_document() {
        let text = r#"[{"label":"Summer school","kind":"workshop","start_date":"2024-07-01","end_date":"2024-07-03"}]"#;
        let list = parse_annotations(text).unwrap();
        assert_eq!(list[0].kind, AnnotationKind::Workshop);
        assert!(parse_annotations("{").is_err());
    }

    #[test]
    fn year_month_parse() {
        assert_eq!("2024-03".parse::<YearMonth>(), Ok(YearMonth { year: 2024, month: 3 }));
        assert!("2024-13".parse::<YearMonth>().is_err());
        assert!("202403".parse::<YearMonth>().is_err());
    }
}
