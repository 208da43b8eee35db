//! Full KPI report over an analysis store, rendered as text or CSV.

use std::fmt::Write as _;

use usagelens_core::classifier::Classification;
use usagelens_core::kpi::{
    overview_kpis, visualization_kpis, Annotation, DwellParams, DEFAULT_IDLE_CAP_MS, KpiError, OverviewKpis, VisualizationKpis,
};
use usagelens_core::stats::Summary;
use usagelens_core::store::AnalysisStore;

/// Column names of the CSV report, in order.
pub const CSV_HEADER: [&str; 4] = ["kpi", "group", "key", "value"];

/// A store together with its classification and both KPI pages.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub store: AnalysisStore,
    pub classes: Classification,
    pub overview: OverviewKpis,
    pub visualizations: VisualizationKpis,
}

impl Analysis {
    pub fn compute(
        store: AnalysisStore,
        annotations: &[Annotation],
        idle_cap_ms: Option<i64>,
        top_n: usize,
    ) -> Result<Self, KpiError> {
        let dwell = match idle_cap_ms {
            Some(cap) => DwellParams::new(cap, store.params.visit_gap_ms)?,
            None => DwellParams { idle_cap_ms: DEFAULT_IDLE_CAP_MS.min(store.params.visit_gap_ms) },
        };
        let classes = store.classify();
        let overview = overview_kpis(&store.corpus, &classes, &store.registry, annotations, top_n)?;
        let visualizations = visualization_kpis(&store.corpus, &store.registry, &dwell);
        Ok(Self { store, classes, overview, visualizations })
    }

    /// Report rows in [`CSV_HEADER`] layout.
    pub fn rows(&self) -> Vec<[String; 4]> {
        let mut rows = Vec::new();
        let mut push = |kpi: &str, group: &str, key: &str, value: String| {
            rows.push([kpi.to_string(), group.to_string(), key.to_string(), value]);
        };
        let r = &self.store.report;
        push("ingest", "", "files_read", r.files_read.to_string());
        push("ingest", "", "events_accepted", r.events_accepted.to_string());
        push("ingest", "", "events_rejected", r.events_rejected.to_string());
        for (reason, n) in &r.reject_reasons {
            push("ingest_rejects", "", reason, n.to_string());
        }

        let o = &self.overview;
        push("total_users", "", "", o.total_users.to_string());
        for (t, n) in &o.users_by_type {
            push("users_by_type", t.token(), "", n.to_string());
        }
        for (i, m) in o.annotated_trend.months.iter().enumerate() {
            let labels: Vec<&str> =
                m.annotations.iter().map(|&a| o.annotated_trend.annotations[a].label.as_str()).collect();
            push("monthly_visits", &labels.join("|"), &m.month.to_string(), o.monthly_visits[i].visits.to_string());
        }
        for a in &o.annotated_trend.annotations {
            push("annotation", &a.label, &format!("{:?}", a.kind).to_lowercase(), format!("{}/{}", a.start_date, a.end_date));
        }
        for (t, s) in &o.session_length_dist {
            for (key, v) in summary_fields(s.as_ref()) {
                push("session_length_seconds", t.token(), key, v);
            }
        }
        push("returning_rate", "", "", num(o.returning_rate));
        for f in &o.feature_frequency {
            push("feature_frequency", "", &f.name, f.count.to_string());
        }
        for (t, row) in &o.help_usage {
            for (kind, n) in row {
                push("help_usage", t.token(), kind.token(), n.to_string());
            }
        }
        for (t, s) in &o.time_by_type {
            push("time_by_type", t.token(), "users", s.users.to_string());
            push("time_by_type", t.token(), "visits", s.visits.to_string());
            push("time_by_type", t.token(), "total_seconds", num(s.total_seconds));
            push("time_by_type", t.token(), "mean_visit_seconds", num(s.mean_visit_seconds));
        }

        for col in &self.visualizations.views {
            let v = col.view.token();
            push("view_users", v, "", col.user_count.to_string());
            for (key, val) in summary_fields(col.time_per_user.as_ref()) {
                push("view_time_per_user_seconds", v, key, val);
            }
            for f in &col.filtering_usage {
                push("view_filtering", v, &f.name, f.count.to_string());
            }
            for f in &col.representation_usage {
                push("view_representation", v, &f.name, f.count.to_string());
            }
        }
        rows
    }

    pub fn render_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).expect("in-memory write");
        for row in self.rows() {
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let o = &self.overview;
        let r = &self.store.report;
        let _ = writeln!(out, "== Ingest");
        let _ = writeln!(
            out,
            "files {}  accepted {}  rejected {}",
            r.files_read, r.events_accepted, r.events_rejected
        );
        for (reason, n) in &r.reject_reasons {
            let _ = writeln!(out, "  {reason:<24} {n}");
        }

        let _ = writeln!(out, "\n== Users");
        let _ = writeln!(out, "total {}  returning rate {}", o.total_users, num(o.returning_rate));
        for (t, n) in &o.users_by_type {
            let _ = writeln!(out, "  {:<16} {n}", t.token());
        }

        let _ = writeln!(out, "\n== Monthly visits");
        for m in &o.annotated_trend.months {
            let labels: Vec<&str> =
                m.annotations.iter().map(|&a| o.annotated_trend.annotations[a].label.as_str()).collect();
            if labels.is_empty() {
                let _ = writeln!(out, "  {} {:>8}", m.month, m.visits);
            } else {
                let _ = writeln!(out, "  {} {:>8}  [{}]", m.month, m.visits, labels.join(", "));
            }
        }

        let _ = writeln!(out, "\n== Session length (seconds)");
        let _ = writeln!(out, "  {:<16} {:>6} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}", "type", "n", "min", "p25", "median", "p75", "max", "mean");
        for (t, s) in &o.session_length_dist {
            let f: Vec<String> = summary_fields(s.as_ref()).into_iter().map(|(_, v)| v).collect();
            let _ = writeln!(
                out,
                "  {:<16} {:>6} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
                t.token(), f[0], f[1], f[2], f[3], f[4], f[5], f[6]
            );
        }

        let _ = writeln!(out, "\n== Time spent");
        for (t, s) in &o.time_by_type {
            let _ = writeln!(
                out,
                "  {:<16} users {:>5}  visits {:>6}  total {}s  mean/visit {}s",
                t.token(), s.users, s.visits, num(s.total_seconds), num(s.mean_visit_seconds)
            );
        }

        let _ = writeln!(out, "\n== Most frequent features");
        for f in &o.feature_frequency {
            let _ = writeln!(out, "  {:<24} {}", f.name, f.count);
        }

        let _ = writeln!(out, "\n== Help usage");
        for (t, row) in &o.help_usage {
            let cells: Vec<String> = row.iter().map(|(k, n)| format!("{}={n}", k.token())).collect();
            let _ = writeln!(out, "  {:<16} {}", t.token(), cells.join(" "));
        }

        let _ = writeln!(out, "\n== Visualizations ({} users)", self.visualizations.total_users);
        for col in &self.visualizations.views {
            let median = col.time_per_user.map(|s| num(s.median)).unwrap_or_else(|| num(0.0));
            let _ = writeln!(
                out,
                "  {:<12} users {:>5}  median time/user {}s",
                col.view.token(), col.user_count, median
            );
            for (label, list) in [("filtering", &col.filtering_usage), ("representation", &col.representation_usage)] {
                if !list.is_empty() {
                    let cells: Vec<String> = list.iter().map(|f| format!("{}={}", f.name, f.count)).collect();
                    let _ = writeln!(out, "    {label}: {}", cells.join(" "));
                }
            }
        }
        out
    }
}

fn num(x: f64) -> String {
    format!("{x:.3}")
}

/// Summary fields by name; all zero for an empty sample.
fn summary_fields(s: Option<&Summary>) -> Vec<(&'static str, String)> {
    let s = s.copied().unwrap_or(Summary { count: 0, min: 0.0, p25: 0.0, median: 0.0, p75: 0.0, max: 0.0, mean: 0.0 });
    vec![
        ("count", s.count.to_string()),
        ("min", num(s.min)),
        ("p25", num(s.p25)),
        ("median", num(s.median)),
        ("p75", num(s.p75)),
        ("max", num(s.max)),
        ("mean", num(s.mean)),
    ]
}
