//! Command implementations behind the `layoutgnn` binary.
//!
//! Exit codes: 0 success, 1 validation failure (bad manifest, embeddings,
//! config or results), 2 runtime failure (I/O and everything else).

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::corpus::{self, CorpusError, Document, SYNTH_SOURCE};
use crate::featstore::{self, FeatError, Modality, DEFAULT_CLASS_SIGNAL};
use crate::frameworks::{FrameworkError, FrameworkSpec};
use crate::gnn::GnnKind;
use crate::graphbuild::{GraphDump, GraphKind};
use crate::metrics::{self, MetricsError, ResultRow};
use crate::trainer::{self, Dataset, RunConfig, TrainError};

/// Write `bytes` to `path` through a temporary file in the same directory
/// followed by a rename, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

fn io_err(path: &Path, e: io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io { .. } => CliError::Runtime(e.to_string()),
            CorpusError::Invariant(vs) => {
                CliError::Validation(vs.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n"))
            }
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<FeatError> for CliError {
    fn from(e: FeatError) -> Self {
        match e {
            FeatError::Io { .. } => CliError::Runtime(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Fold { .. } | TrainError::Config(_) => CliError::Validation(e.to_string()),
            TrainError::Feat(f) => f.into(),
            TrainError::Framework(FrameworkError::Nn(n)) => CliError::Runtime(n.to_string()),
            TrainError::Framework(f) => CliError::Validation(f.to_string()),
            TrainError::Nn(_) | TrainError::Metrics(_) => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::EmptyResults | MetricsError::Csv(_) | MetricsError::Number(_) => {
                CliError::Validation(e.to_string())
            }
            other => CliError::Runtime(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "layoutgnn", version, about = "GNN benchmark engine for layout-object classification")]
pub struct Cli {
    /// Log progress to stderr.
    #[arg(long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a corpus manifest.
    Ingest(IngestArgs),
    /// Generate a synthetic corpus with text and vision embeddings.
    Synth(SynthArgs),
    /// Build page graphs and write them as JSON lines.
    Graph(GraphArgs),
    /// Run 5-fold training and evaluation for one run config.
    Train(TrainArgs),
    /// Aggregate results.csv files into summary tables.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Validate only (the default); accepted for explicitness.
    #[arg(long)]
    pub check: bool,
    /// Also write the manifest back in canonical form.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub docs: usize,
    #[arg(long, default_value_t = 2)]
    pub pages: usize,
    #[arg(long, default_value_t = 10)]
    pub objects: usize,
    #[arg(long, default_value_t = 64)]
    pub text_dim: usize,
    #[arg(long, default_value_t = 32)]
    pub vision_dim: usize,
    #[arg(long, default_value_t = DEFAULT_CLASS_SIGNAL)]
    pub text_signal: f64,
    #[arg(long, default_value_t = DEFAULT_CLASS_SIGNAL)]
    pub vision_signal: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// `k-closest:K` or `complete`.
    #[arg(long, default_value = "k-closest:4")]
    pub kind: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Parallel fold workers.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Override the config's manifest path.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Override the config's text embedding path.
    #[arg(long)]
    pub text: Option<PathBuf>,
    /// Override the config's vision embedding path.
    #[arg(long)]
    pub vision: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Directory holding results.csv (subdirectories one level down are
    /// searched as well).
    #[arg(long)]
    pub results: PathBuf,
    /// Where to write summary.md and summary.csv; defaults to --results.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parse `args` (including the program name), run the command, and return
/// the process exit code. Messages go to `out` and `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return 1;
            }
            let _ = write!(out, "{e}");
            return 0;
        }
    };
    let level = if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    let result = match &cli.command {
        Command::Ingest(a) => cmd_ingest(a, out),
        Command::Synth(a) => cmd_synth(a, out),
        Command::Graph(a) => cmd_graph(a, out),
        Command::Train(a) => cmd_train(a, out),
        Command::Report(a) => cmd_report(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            e.exit_code()
        }
    }
}

pub fn cmd_ingest(args: &IngestArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let docs = corpus::ingest_manifest(&args.manifest)?;
    let pages: usize = docs.iter().map(|d| d.pages.len()).sum();
    let objects: usize = docs.iter().flat_map(|d| &d.pages).map(|p| p.objects.len()).sum();
    let mut sources: Vec<&str> = docs.iter().map(|d| d.source_id.as_str()).collect();
    sources.sort_unstable();
    sources.dedup();
    let _ = writeln!(out, "documents: {}\npages: {pages}\nobjects: {objects}\nsources: {}", docs.len(), sources.join(","));
    if let Some(path) = &args.out {
        corpus::write_manifest(&docs, path).map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TEXT_FILE: &str = "text.emb1";
pub const VISION_FILE: &str = "vision.emb1";
pub const SAMPLE_CONFIG_FILE: &str = "run_config.json";

pub fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if args.docs == 0 || args.pages == 0 || args.objects == 0 || args.text_dim == 0 || args.vision_dim == 0 {
        return Err(CliError::Validation("docs, pages, objects and dims must be positive".into()));
    }
    fs::create_dir_all(&args.out).map_err(|e| io_err(&args.out, e))?;
    let docs = corpus::make_synthetic_corpus(args.seed, args.docs, args.pages, args.objects);
    let manifest = args.out.join(MANIFEST_FILE);
    corpus::write_manifest(&docs, &manifest).map_err(|e| io_err(&manifest, e))?;
    let text = featstore::synth_embeddings(&docs, Modality::Text, args.text_dim, args.seed, args.text_signal);
    featstore::write_embeddings(&text, args.out.join(TEXT_FILE))?;
    let vision = featstore::synth_embeddings(&docs, Modality::Vision, args.vision_dim, args.seed, args.vision_signal);
    featstore::write_embeddings(&vision, args.out.join(VISION_FILE))?;

    let mut sample = RunConfig::new(SYNTH_SOURCE, &FrameworkSpec::dual(GnnKind::Sage, GnnKind::Sage));
    sample.manifest = Some(MANIFEST_FILE.into());
    sample.text_embeddings = Some(TEXT_FILE.into());
    sample.vision_embeddings = Some(VISION_FILE.into());
    let cfg_path = args.out.join(SAMPLE_CONFIG_FILE);
    write_atomic(&cfg_path, sample.to_json().as_bytes()).map_err(|e| io_err(&cfg_path, e))?;
    let _ = writeln!(out, "documents: {}\nwrote {}", docs.len(), args.out.display());
    Ok(())
}

pub fn cmd_graph(args: &GraphArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let kind = GraphKind::parse_label(&args.kind)
        .filter(|k| *k != GraphKind::KClosest { k: 0 })
        .ok_or_else(|| CliError::Validation(format!("unknown graph kind {:?}", args.kind)))?;
    let docs = corpus::ingest_manifest(&args.manifest)?;
    let mut text = String::new();
    let mut count = 0;
    for d in &docs {
        for p in &d.pages {
            let dump = GraphDump::new(&d.doc_id, p.page_index, &kind.build(p));
            text.push_str(&serde_json::to_string(&dump).map_err(|e| CliError::Runtime(e.to_string()))?);
            text.push('\n');
            count += 1;
        }
    }
    write_atomic(&args.out, text.as_bytes()).map_err(|e| io_err(&args.out, e))?;
    let _ = writeln!(out, "graphs: {count}");
    Ok(())
}

fn resolve(base: &Path, override_path: &Option<PathBuf>, configured: &Option<PathBuf>, what: &str) -> Result<PathBuf, CliError> {
    match (override_path, configured) {
        (Some(p), _) => Ok(p.clone()),
        (None, Some(p)) if p.is_absolute() => Ok(p.clone()),
        (None, Some(p)) => Ok(base.join(p)),
        (None, None) => Err(CliError::Validation(format!("no {what} path in config or flags"))),
    }
}

/// Directory name for one configuration's artifacts.
pub fn run_dir_name(row: &ResultRow) -> String {
    let mut parts = vec![row.source.as_str(), row.framework.as_str(), row.backbone_text.as_str()];
    if !row.backbone_vision.is_empty() {
        parts.push(&row.backbone_vision);
    }
    let graph = row.graph_kind.replace(':', "");
    parts.push(&graph);
    parts.join("_")
}

pub const RESULTS_FILE: &str = "results.csv";

pub fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let text = fs::read_to_string(&args.config).map_err(|e| io_err(&args.config, e))?;
    let config = RunConfig::from_json(&text)?;
    config.validate()?;
    let spec = config.framework_spec()?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    let manifest = resolve(base, &args.manifest, &config.manifest, "manifest")?;
    for p in [&manifest] {
        if !p.exists() {
            return Err(CliError::Validation(format!("{} does not exist", p.display())));
        }
    }
    let docs: Vec<Document> = corpus::ingest_manifest(&manifest)?;
    let load = |m: Modality, o: &Option<PathBuf>, c: &Option<PathBuf>| -> Result<Option<featstore::EmbeddingTable>, CliError> {
        if !spec.kind.uses(m) {
            return Ok(None);
        }
        let path = resolve(base, o, c, &format!("{m} embeddings"))?;
        Ok(Some(featstore::load_embeddings(&path, m)?))
    };
    let text_table = load(Modality::Text, &args.text, &config.text_embeddings)?;
    let vision_table = load(Modality::Vision, &args.vision, &config.vision_embeddings)?;
    let plan = trainer::make_splits(&docs, &config.source_id, config.seeds.split)?;
    let data = Dataset::prepare(&docs, &config.source_id, spec.graph, spec.kind, text_table.as_ref(), vision_table.as_ref())?;
    log::info!("training {} on {} ({} docs)", spec.kind, config.source_id, data.docs.len());
    let outcomes = trainer::run_experiment(&config, &data, &plan, args.jobs)?;

    let rows: Vec<ResultRow> = outcomes.iter().map(|o| o.result_row(&config, &spec)).collect();
    let run_dir = args.out.join(run_dir_name(&rows[0]));
    fs::create_dir_all(&run_dir).map_err(|e| io_err(&run_dir, e))?;
    let write = |name: String, bytes: &[u8]| {
        let p = run_dir.join(name);
        write_atomic(&p, bytes).map_err(|e| io_err(&p, e))
    };
    write("config.json".into(), config.to_json().as_bytes())?;
    write("splits.json".into(), (serde_json::to_string_pretty(&plan).expect("plan serializes") + "\n").as_bytes())?;
    let mut folds_json = Vec::new();
    for o in &outcomes {
        write(format!("fold{}.ckpt", o.fold), &o.checkpoint)?;
        write(format!("predictions_fold{}.csv", o.fold), trainer::predictions_to_csv(&o.predictions).as_bytes())?;
        let loss: String = std::iter::once("epoch,loss\n".to_owned())
            .chain(o.report.loss_trace.iter().enumerate().map(|(e, l)| format!("{e},{l}\n")))
            .collect();
        write(format!("loss_fold{}.csv", o.fold), loss.as_bytes())?;
        folds_json.push(serde_json::json!({
            "fold": o.fold,
            "class_weights": o.weights,
            "skipped_batches": o.report.skipped_batches,
            "skipped_pages": o.report.skipped_pages,
            "final_loss": o.report.loss_trace.last(),
            "overall": o.metrics.overall,
        }));
    }
    write("folds.json".into(), (serde_json::to_string_pretty(&folds_json).expect("json") + "\n").as_bytes())?;

    fs::create_dir_all(&args.out).map_err(|e| io_err(&args.out, e))?;
    let results_path = args.out.join(RESULTS_FILE);
    let mut all = match fs::read_to_string(&results_path) {
        Ok(t) => metrics::results_from_csv(&t)?,
        Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(io_err(&results_path, e)),
    };
    let key = rows[0].key();
    all.retain(|r| r.key() != key);
    all.extend(rows.iter().cloned());
    metrics::sort_rows(&mut all);
    write_atomic(&results_path, metrics::results_to_csv(&all)?.as_bytes()).map_err(|e| io_err(&results_path, e))?;
    for r in &rows {
        let _ = writeln!(out, "fold {}: overall {}", r.fold, metrics::format_pct(r.metrics.overall));
    }
    Ok(())
}

/// Every results.csv directly in `dir` or one level below it.
fn find_results(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut found = Vec::new();
    let direct = dir.join(RESULTS_FILE);
    if direct.is_file() {
        found.push(direct);
    }
    let mut subdirs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    found.extend(subdirs.into_iter().map(|d| d.join(RESULTS_FILE)).filter(|p| p.is_file()));
    Ok(found)
}

pub fn cmd_report(args: &ReportArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for path in find_results(&args.results)? {
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        rows.extend(metrics::results_from_csv(&text)?);
    }
    // identical rows may appear in several files; keep one per (config, fold)
    metrics::sort_rows(&mut rows);
    rows.dedup_by(|a, b| a.key() == b.key() && a.fold == b.fold);
    let report = metrics::render_report(&rows)?;
    let dest = args.out.clone().unwrap_or_else(|| args.results.clone());
    fs::create_dir_all(&dest).map_err(|e| io_err(&dest, e))?;
    for (name, body) in [("summary.md", &report.markdown), ("summary.csv", &report.csv)] {
        let p = dest.join(name);
        write_atomic(&p, body.as_bytes()).map_err(|e| io_err(&p, e))?;
    }
    let _ = write!(out, "{}", report.markdown);
    Ok(())
}
