//! Command-line interface. Every flag can also be set through the
//! environment variable named next to it in `--help`.

use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use tower_http::cors::{AllowOrigin, CorsLayer};
use usagelens_core::event_model::EventRegistry;
use usagelens_core::ingest::{ingest_paths, IngestReport};
use usagelens_core::kpi::DEFAULT_TOP_FEATURES;
use usagelens_core::sessionizer::{StitchParams, DEFAULT_STITCH_GAP_MS, DEFAULT_VISIT_GAP_MS};
use usagelens_core::simgen::{generate_corpus, GeneratorSpec};
use usagelens_core::store::AnalysisStore;

use crate::api::{router, AppState};
use crate::snapshot::{LoadOptions, SnapshotSource};

#[derive(Debug, Parser)]
#[command(name = "usagelens", version, about = "Usage analytics from interaction logs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse log files into an analysis store.
    Ingest(IngestArgs),
    /// Print the KPI report of a store.
    Report(ReportArgs),
    /// Generate a synthetic log corpus with ground truth.
    Simgen(SimgenArgs),
    /// Serve the read-only JSON API.
    Serve(ServeArgs),
    /// Print the built-in event registry in config-file form.
    Registry,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Event registry config replacing or extending the built-in one.
    #[arg(long, env = "USAGELENS_REGISTRY")]
    pub registry: Option<PathBuf>,
    #[arg(long, env = "USAGELENS_STITCH_GAP_MS", default_value_t = DEFAULT_STITCH_GAP_MS)]
    pub stitch_gap_ms: i64,
    #[arg(long, env = "USAGELENS_VISIT_GAP_MS", default_value_t = DEFAULT_VISIT_GAP_MS)]
    pub visit_gap_ms: i64,
}

impl PipelineArgs {
    fn registry(&self) -> anyhow::Result<EventRegistry> {
        match &self.registry {
            Some(p) => EventRegistry::from_config_file(p).with_context(|| format!("loading registry {}", p.display())),
            None => Ok(EventRegistry::builtin()),
        }
    }

    fn params(&self) -> anyhow::Result<StitchParams> {
        Ok(StitchParams::new(self.stitch_gap_ms, self.visit_gap_ms)?)
    }
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Log files or directories (searched recursively for `*.vlog`).
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
    #[arg(long, env = "USAGELENS_STORE")]
    pub store: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Text,
    Csv,
}

#[derive(Debug, Args)]
pub struct KpiArgs {
    /// JSON array of dated annotations for the visit trend.
    #[arg(long, env = "USAGELENS_ANNOTATIONS")]
    pub annotations: Option<PathBuf>,
    /// Longest gap between two events credited as view time.
    #[arg(long, env = "USAGELENS_IDLE_CAP_MS")]
    pub idle_cap_ms: Option<i64>,
    /// Number of most frequent features to list.
    #[arg(long, env = "USAGELENS_TOP", default_value_t = DEFAULT_TOP_FEATURES)]
    pub top: usize,
}

impl KpiArgs {
    fn options(&self) -> LoadOptions {
        LoadOptions { annotations: self.annotations.clone(), idle_cap_ms: self.idle_cap_ms, top_n: self.top }
    }
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long, env = "USAGELENS_STORE")]
    pub store: PathBuf,
    #[arg(long, env = "USAGELENS_FORMAT", value_enum, default_value_t = ReportFormat::Text)]
    pub format: ReportFormat,
    #[command(flatten)]
    pub kpi: KpiArgs,
}

#[derive(Debug, Args)]
pub struct SimgenArgs {
    /// Generator spec (JSON); omitted fields take their defaults.
    #[arg(long, env = "USAGELENS_SIM_SPEC")]
    pub spec: Option<PathBuf>,
    #[arg(long, env = "USAGELENS_SIM_OUT", required_unless_present = "print_spec")]
    pub out: Option<PathBuf>,
    /// Override the spec's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Print the default spec and exit.
    #[arg(long)]
    pub print_spec: bool,
}

#[derive(Debug, Args)]
#[group(id = "source", required = true, multiple = true, args = ["store", "input"])]
pub struct ServeArgs {
    /// Analysis store to serve; reloads re-read it.
    #[arg(long, env = "USAGELENS_STORE")]
    pub store: Option<PathBuf>,
    /// Log files or directories to ingest instead of a store; reloads re-ingest them.
    #[arg(long, num_args = 1..)]
    pub input: Vec<PathBuf>,
    #[arg(long, env = "USAGELENS_BIND", default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    /// Allowed dashboard origin; any origin when omitted.
    #[arg(long, env = "USAGELENS_CORS_ORIGIN")]
    pub cors_origin: Option<String>,
    #[command(flatten)]
    pub kpi: KpiArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Ingest(a) => ingest(&a),
        Command::Report(a) => report(&a),
        Command::Simgen(a) => simgen(&a),
        Command::Serve(a) => serve(a),
        Command::Registry => {
            emit(&(serde_json::to_string_pretty(&EventRegistry::builtin())? + "\n"))
        }
    }
}

/// Writes to stdout; a closed pipe (`usagelens report | head`) is not an error.
fn emit(text: &str) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

pub fn render_ingest_report(store_path: &std::path::Path, store: &AnalysisStore) -> String {
    let IngestReport { files_read, events_accepted, events_rejected, reject_reasons } = &store.report;
    let mut out = format!(
        "store: {}\nfiles read: {files_read}\nevents accepted: {events_accepted}\nevents rejected: {events_rejected}\n",
        store_path.display()
    );
    for (reason, n) in reject_reasons {
        out.push_str(&format!("  {reason}: {n}\n"));
    }
    out.push_str(&format!(
        "sessions: {}\nusers: {}\nvisits: {}\n",
        store.corpus.users.iter().map(|u| u.session_ids.len()).sum::<usize>(),
        store.corpus.users.len(),
        store.corpus.visit_count()
    ));
    out
}

fn ingest(a: &IngestArgs) -> anyhow::Result<()> {
    let registry = a.pipeline.registry()?;
    let params = a.pipeline.params()?;
    let (sessions, report) = ingest_paths(&a.paths, &registry)?;
    let store = AnalysisStore::build(&sessions, report, registry, params);
    store.save(&a.store)?;
    emit(&render_ingest_report(&a.store, &store))
}

fn report(a: &ReportArgs) -> anyhow::Result<()> {
    let analysis = SnapshotSource::Store(a.store.clone()).load(&a.kpi.options())?;
    let text = match a.format {
        ReportFormat::Text => analysis.render_text(),
        ReportFormat::Csv => analysis.render_csv(),
    };
    emit(&text)
}

fn simgen(a: &SimgenArgs) -> anyhow::Result<()> {
    let mut spec = match &a.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading spec {}", p.display()))?;
            serde_json::from_str::<GeneratorSpec>(&text).with_context(|| format!("parsing spec {}", p.display()))?
        }
        None => GeneratorSpec::default(),
    };
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    if a.print_spec {
        return emit(&(serde_json::to_string_pretty(&spec)? + "\n"));
    }
    let out = a.out.as_ref().expect("clap requires --out");
    let corpus = generate_corpus(&spec)?;
    corpus.write_to_dir(out)?;
    emit(&format!(
        "wrote {} files, {} users, {} events to {}\n",
        corpus.files.len(),
        corpus.truth.users.len(),
        corpus.truth.total_events,
        out.display()
    ))
}

fn serve(a: ServeArgs) -> anyhow::Result<()> {
    let source = if a.input.is_empty() {
        SnapshotSource::Store(a.store.clone().expect("clap requires a source"))
    } else {
        SnapshotSource::Logs { paths: a.input.clone(), registry: a.pipeline.registry()?, params: a.pipeline.params()? }
    };
    let cors = match &a.cors_origin {
        Some(origin) => CorsLayer::new().allow_origin(AllowOrigin::exact(origin.parse()?)),
        None => CorsLayer::new().allow_origin(AllowOrigin::any()),
    };
    let state = AppState::new(source, a.kpi.options());
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        if let Err(e) = state.reload().await {
            tracing::warn!(error = %format!("{e:#}"), "no initial snapshot; serving 503 until a reload succeeds");
        }
        let app = router(state).layer(cors);
        let listener = tokio::net::TcpListener::bind(a.bind).await?;
        tracing::info!(addr = %listener.local_addr()?, "listening");
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
