#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use tower::ServiceExt;
use usagelens::api::{router, AppState, SNAPSHOT_HEADER};
use usagelens::snapshot::{LoadOptions, SnapshotSource};

/// One user of each type. The single-session explorer clears its cache
/// (`e1` -> `e2`); the returning explorer comes back after 30 minutes.
pub const FOUR_TYPES: &str = r#"{"sid":"d1","ip":"h1","ts":"2024-03-01T10:00:00Z","name":"load_demo_data"}
{"sid":"d1","ip":"h1","ts":"2024-03-01T10:00:05Z","name":"open_nodelink"}
{"sid":"d1","ip":"h1","ts":"2024-03-01T10:00:06Z","name":"hover_node"}
{"sid":"d1","ip":"h1","ts":"2024-03-01T10:00:06.500Z","name":"hover_node"}
{"sid":"d1","ip":"h1","ts":"2024-03-01T10:01:00Z","name":"help_examples"}
{"sid":"g1","ip":"h2","ts":"2024-03-02T09:00:00Z","name":"upload_own_data"}
{"sid":"g1","ip":"h2","ts":"2024-03-02T09:02:00Z","name":"create_network_attempt"}
{"sid":"g1","ip":"h2","ts":"2024-03-02T09:02:01Z","name":"create_network_failure"}
{"sid":"g1","ip":"h2","ts":"2024-03-02T09:03:00Z","name":"help_data_formatting"}
{"sid":"e1","ip":"h3","ts":"2024-03-03T12:00:00Z","name":"upload_own_data"}
{"sid":"e1","ip":"h3","ts":"2024-03-03T12:01:00Z","name":"create_network_attempt"}
{"sid":"e1","ip":"h3","ts":"2024-03-03T12:01:01Z","name":"create_network_success"}
{"sid":"e1","ip":"h3","ts":"2024-03-03T12:01:10Z","name":"open_matrix"}
{"sid":"e2","ip":"h3","ts":"2024-03-03T12:02:00Z","name":"matrix_reorder"}
{"sid":"m1","ip":"h4","ts":"2024-04-05T08:00:00Z","name":"upload_own_data"}
{"sid":"m1","ip":"h4","ts":"2024-04-05T08:01:00Z","name":"create_network_attempt"}
{"sid":"m1","ip":"h4","ts":"2024-04-05T08:01:02Z","name":"create_network_success"}
{"sid":"m1","ip":"h4","ts":"2024-04-05T08:01:30Z","name":"open_map"}
{"sid":"m1","ip":"h4","ts":"2024-04-05T08:05:00Z","name":"filter_node_type"}
{"sid":"m1","ip":"h4","ts":"2024-04-05T08:35:00Z","name":"open_timeline"}
{"sid":"m1","ip":"h4","ts":"2024-04-05T08:36:00Z","name":"time_slider"}
{"sid":"m1","ip":"h4","ts":"2024-04-05T08:36:00.400Z","name":"time_slider"}
{"sid":"m1","ip":"h4","ts":"2024-04-05T08:40:00Z","name":"bookmark_create"}
"#;

pub fn write_fixture(dir: &Path) -> std::path::PathBuf {
    let logs = dir.join("logs");
    std::fs::create_dir_all(&logs).unwrap();
    std::fs::write(logs.join("fixture.vlog"), FOUR_TYPES).unwrap();
    logs
}

pub fn state_for(source: SnapshotSource) -> Arc<AppState> {
    AppState::new(source, LoadOptions { top_n: 10, ..LoadOptions::default() })
}

pub struct Reply {
    pub status: StatusCode,
    pub snapshot_id: Option<u64>,
    pub content_type: Option<String>,
    pub body: Vec<u8>,
}

impl Reply {
    pub fn json(&self) -> serde_json::Value {
        serde_json::from_slice(&self.body).expect("json body")
    }
}

pub async fn call(state: &Arc<AppState>, method: &str, uri: &str) -> Reply {
    let req = Request::builder().method(method).uri(uri).body(Body::empty()).unwrap();
    let res = router(state.clone()).oneshot(req).await.unwrap();
    let status = res.status();
    let snapshot_id = res
        .headers()
        .get(SNAPSHOT_HEADER)
        .map(|v| v.to_str().unwrap().parse().unwrap());
    let content_type = res.headers().get("content-type").map(|v| v.to_str().unwrap().to_string());
    let body = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply { status, snapshot_id, content_type, body }
}

pub async fn get(state: &Arc<AppState>, uri: &str) -> Reply {
    call(state, "GET", uri).await
}
