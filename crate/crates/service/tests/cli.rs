mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::process::{Command, Output, Stdio};

use usagelens::CSV_HEADER;
use usagelens_core::event_model::EventRegistry;
use usagelens_core::simgen::{GeneratorSpec, GroundTruth, GROUND_TRUTH_FILE};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_usagelens"));
    c.env("RUST_LOG", "warn");
    for (k, _) in std::env::vars() {
        if k.starts_with("USAGELENS_") {
            c.env_remove(k);
        }
    }
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(r.headers().unwrap().iter().collect::<Vec<_>>(), CSV_HEADER);
    r.records().map(|rec| rec.unwrap().iter().map(str::to_string).collect()).collect()
}

#[test]
fn ingest_directory_prints_report() {
    let dir = tempfile::tempdir().unwrap();
    let logs = common::write_fixture(dir.path());
    let store = dir.path().join("out/store.json");
    let out = stdout(&run(&["ingest", p(&logs), "--store", p(&store)]));
    assert!(out.contains("events accepted: 23"), "{out}");
    assert!(out.contains("events rejected: 0"));
    assert!(out.contains("users: 4"));
    assert!(store.exists());
}

#[test]
fn ingest_missing_path_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["ingest", p(&dir.path().join("absent")), "--store", p(&dir.path().join("s.json"))]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("cannot read"), "{err}");
    assert!(o.stdout.is_empty());
    assert!(!dir.path().join("s.json").exists());
}

#[test]
fn reingest_gives_identical_store() {
    let dir = tempfile::tempdir().unwrap();
    let logs = common::write_fixture(dir.path());
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    stdout(&run(&["ingest", p(&logs), "--store", p(&a)]));
    stdout(&run(&["ingest", p(&logs), "--store", p(&b)]));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn report_formats() {
    let dir = tempfile::tempdir().unwrap();
    let logs = common::write_fixture(dir.path());
    let store = dir.path().join("store.json");
    stdout(&run(&["ingest", p(&logs), "--store", p(&store)]));

    let csv = stdout(&run(&["report", "--store", p(&store), "--format", "csv"]));
    assert_eq!(csv.lines().next(), Some("kpi,group,key,value"));
    let rows = csv_rows(&csv);
    assert!(rows.contains(&vec!["users_by_type".into(), "MS_Explorer".into(), "".into(), "1".into()]));
    assert!(rows.contains(&vec!["returning_rate".into(), "".into(), "".into(), "0.250".into()]));

    let text = stdout(&run(&["report", "--store", p(&store)]));
    for heading in ["== Users", "== Monthly visits", "== Session length", "== Help usage", "== Visualizations"] {
        assert!(text.contains(heading), "{heading}");
    }

    let ann = dir.path().join("ann.json");
    std::fs::write(&ann, r#"[{"label":"spring course","kind":"course","start_date":"2024-03-15","end_date":"2024-04-02"}]"#)
        .unwrap();
    let csv = stdout(&run(&["report", "--store", p(&store), "--format", "csv", "--annotations", p(&ann)]));
    let rows = csv_rows(&csv);
    let months: Vec<_> = rows.iter().filter(|r| r[0] == "monthly_visits").collect();
    assert_eq!(months.len(), 2);
    assert!(months.iter().all(|r| r[1] == "spring course"));

    let o = run(&["report", "--store", p(&store), "--idle-cap-ms", "0"]);
    assert!(!o.status.success());
}

#[test]
fn report_of_missing_store_fails() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["report", "--store", p(&dir.path().join("none.json"))]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("no analysis store"));
}

#[test]
fn empty_store_reports_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let logs = dir.path().join("empty");
    std::fs::create_dir(&logs).unwrap();
    let store = dir.path().join("store.json");
    stdout(&run(&["ingest", p(&logs), "--store", p(&store)]));
    let rows = csv_rows(&stdout(&run(&["report", "--store", p(&store), "--format", "csv"])));
    assert!(!rows.is_empty());
    for r in &rows {
        let v: f64 = r[3].parse().unwrap_or_else(|_| panic!("numeric value in {r:?}"));
        assert_eq!(v, 0.0, "{r:?}");
    }
    stdout(&run(&["report", "--store", p(&store)]));
}

#[test]
fn simgen_report_matches_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let spec = GeneratorSpec::with_counts(9, [30, 4, 8, 12]);
    let spec_path = dir.path().join("spec.json");
    std::fs::write(&spec_path, serde_json::to_string(&spec).unwrap()).unwrap();
    let out = dir.path().join("corpus");
    stdout(&run(&["simgen", "--spec", p(&spec_path), "--out", p(&out)]));
    let truth: GroundTruth = serde_json::from_str(&std::fs::read_to_string(out.join(GROUND_TRUTH_FILE)).unwrap()).unwrap();

    let store = dir.path().join("store.json");
    stdout(&run(&["ingest", p(&out), "--store", p(&store)]));
    let rows = csv_rows(&stdout(&run(&["report", "--store", p(&store), "--format", "csv"])));
    let value = |kpi: &str, group: &str, key: &str| -> String {
        rows.iter().find(|r| r[0] == kpi && r[1] == group && r[2] == key).unwrap()[3].clone()
    };
    assert_eq!(value("total_users", "", ""), truth.users.len().to_string());
    assert_eq!(value("ingest", "", "events_accepted"), truth.total_events.to_string());
    for (t, n) in &truth.type_counts {
        assert_eq!(value("users_by_type", t.token(), ""), n.to_string());
    }
    let visits: usize = rows.iter().filter(|r| r[0] == "monthly_visits").map(|r| r[3].parse::<usize>().unwrap()).sum();
    assert_eq!(visits, truth.users.iter().map(|u| u.visits.len()).sum::<usize>());
}

#[test]
fn simgen_spec_printing_and_seed() {
    let printed = stdout(&run(&["simgen", "--print-spec", "--seed", "7"]));
    let spec: GeneratorSpec = serde_json::from_str(&printed).unwrap();
    assert_eq!(spec, GeneratorSpec { seed: 7, ..GeneratorSpec::default() });
    assert!(!run(&["simgen"]).status.success());
}

#[test]
fn registry_dump_and_extension() {
    let dumped = stdout(&run(&["registry"]));
    assert_eq!(EventRegistry::from_config_str(&dumped).unwrap(), EventRegistry::builtin());

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("registry.json");
    std::fs::write(
        &cfg,
        r#"{"include_builtin": true, "events": [{"name": "export_svg", "category": "activity_logs", "intent_group": "none", "views": []}]}"#,
    )
    .unwrap();
    let logs = dir.path().join("logs");
    std::fs::create_dir(&logs).unwrap();
    std::fs::write(
        logs.join("a.vlog"),
        "{\"sid\":\"s\",\"ip\":\"h\",\"ts\":5,\"name\":\"export_svg\"}\n{\"sid\":\"s\",\"ip\":\"h\",\"ts\":6,\"name\":\"open_map\"}\n",
    )
    .unwrap();
    let store = dir.path().join("s.json");
    let plain = stdout(&run(&["ingest", p(&logs), "--store", p(&store)]));
    assert!(plain.contains("unknown_event: 1"), "{plain}");
    let extended = stdout(&run(&["ingest", p(&logs), "--store", p(&store), "--registry", p(&cfg)]));
    assert!(extended.contains("events accepted: 2"), "{extended}");
}

#[test]
fn environment_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let logs = common::write_fixture(dir.path());
    let store = dir.path().join("env.json");
    let o = bin()
        .args(["ingest", p(&logs)])
        .env("USAGELENS_STORE", &store)
        .env("USAGELENS_STITCH_GAP_MS", "1")
        .output()
        .unwrap();
    let out = stdout(&o);
    // The cache-clearing explorer is no longer stitched at a 1 ms gap.
    assert!(out.contains("users: 5"), "{out}");
    let csv = bin().args(["report", "--store", p(&store)]).env("USAGELENS_FORMAT", "csv").output().unwrap();
    assert!(stdout(&csv).starts_with("kpi,group,key,value\n"));
}

#[test]
fn serve_answers_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let logs = common::write_fixture(dir.path());
    let store = dir.path().join("store.json");
    stdout(&run(&["ingest", p(&logs), "--store", p(&store)]));

    let mut child = bin()
        .args(["serve", "--store", p(&store), "--bind", "127.0.0.1:0", "--cors-origin", "http://dash.local"])
        .env("RUST_LOG", "info")
        .env("NO_COLOR", "1")
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stderr.take().unwrap()).lines();
    let addr = loop {
        let line = lines.next().expect("server exited early").unwrap();
        if let Some(rest) = line.split("addr=").nth(1) {
            break rest.split_whitespace().next().unwrap().to_string();
        }
    };
    let fetch = |path: &str| {
        let mut s = std::net::TcpStream::connect(&addr).unwrap();
        write!(s, "GET {path} HTTP/1.1\r\nHost: x\r\nOrigin: http://dash.local\r\nConnection: close\r\n\r\n").unwrap();
        let mut buf = String::new();
        s.read_to_string(&mut buf).unwrap();
        buf
    };
    let overview = fetch("/api/overview");
    let health = fetch("/api/health");
    let missing = fetch("/api/users/zzz/timeline");
    let _ = child.kill();
    let _ = child.wait();

    let lower = overview.to_ascii_lowercase();
    assert!(overview.starts_with("HTTP/1.1 200"), "{overview}");
    assert!(lower.contains("content-type: application/json"));
    assert!(lower.contains("x-snapshot-id: 1"));
    assert!(lower.contains("access-control-allow-origin: http://dash.local"));
    assert!(overview.contains("\"total_users\":4"));
    assert!(health.contains("\"snapshot_id\":1"));
    assert!(missing.starts_with("HTTP/1.1 404"));
}

#[test]
fn rejects_bad_params() {
    let dir = tempfile::tempdir().unwrap();
    let logs = common::write_fixture(dir.path());
    let o = run(&["ingest", p(&logs), "--store", p(&dir.path().join("s.json")), "--stitch-gap-ms", "-5"]);
    assert!(!o.status.success());
}
