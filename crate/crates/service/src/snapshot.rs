//! Immutable, precomputed views of one analysis, swapped whole on reload.

use std::path::PathBuf;

use anyhow::Context;
use axum::body::Bytes;
use chrono::{DateTime, Utc};
use usagelens_core::event_model::EventRegistry;
use usagelens_core::ingest::ingest_paths;
use usagelens_core::kpi::{parse_annotations, user_summaries, UserSummary};
use usagelens_core::sessionizer::StitchParams;
use usagelens_core::store::AnalysisStore;

use crate::report::Analysis;

/// Where a snapshot's data comes from.
#[derive(Debug, Clone)]
pub enum SnapshotSource {
    /// A persisted analysis store.
    Store(PathBuf),
    /// Raw log files, re-ingested on every load.
    Logs { paths: Vec<PathBuf>, registry: EventRegistry, params: StitchParams },
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub annotations: Option<PathBuf>,
    pub idle_cap_ms: Option<i64>,
    pub top_n: usize,
}

impl SnapshotSource {
    pub fn load(&self, opts: &LoadOptions) -> anyhow::Result<Analysis> {
        let store = match self {
            SnapshotSource::Store(path) => AnalysisStore::load(path)?,
            SnapshotSource::Logs { paths, registry, params } => {
                let (sessions, report) = ingest_paths(paths, registry)?;
                AnalysisStore::build(&sessions, report, registry.clone(), *params)
            }
        };
        let annotations = match &opts.annotations {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading annotations {}", path.display()))?;
                parse_annotations(&text).with_context(|| format!("parsing annotations {}", path.display()))?
            }
            None => Vec::new(),
        };
        Ok(Analysis::compute(store, &annotations, opts.idle_cap_ms, opts.top_n)?)
    }
}

/// Everything one API response may read. Payloads are serialized once so
/// repeated reads return identical bytes.
#[derive(Debug)]
pub struct Snapshot {
    pub id: u64,
    pub built_at: DateTime<Utc>,
    pub analysis: Analysis,
    /// Most recently seen first, ties by id.
    pub users: Vec<UserSummary>,
    pub overview_json: Bytes,
    pub visualizations_json: Bytes,
    pub registry_json: Bytes,
}

impl Snapshot {
    pub fn new(id: u64, analysis: Analysis) -> Self {
        let mut users = user_summaries(&analysis.store.corpus, &analysis.classes);
        users.sort_by(|a, b| b.last_seen.cmp(&a.last_seen).then_with(|| a.user_id.cmp(&b.user_id)));
        Self {
            id,
            built_at: Utc::now(),
            users,
            overview_json: json(&analysis.overview),
            visualizations_json: json(&analysis.visualizations),
            registry_json: json(&analysis.store.registry),
            analysis,
        }
    }
}

fn json<T: serde::Serialize>(value: &T) -> Bytes {
    Bytes::from(serde_json::to_vec(value).expect("payload serializes"))
}
