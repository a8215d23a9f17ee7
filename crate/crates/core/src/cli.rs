//! The `shortscribe` command line: `ingest`, `describe`, `serve`, `eval`.
//!
//! Exit codes: 0 success, 1 partial failure, 2 usage or configuration error.

use std::collections::HashMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, PipelineConfig};
use crate::eval::{self, EvalError, EvalReport, SigmaConvention};
use crate::media::{decode_frames_with, MediaError, SampleRate};
use crate::pipeline::{sha256_file, BackendMode, Pipeline, Status, VideoReport};
use crate::service;
use crate::store::{ContentLexicon, FeedDocument, FeedStore, StoreError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARTIAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// File extensions picked up when ingesting a directory.
pub const MEDIA_EXTENSIONS: &[&str] = &["ssraw", "raw", "mp4", "m4v", "mov", "webm", "mkv", "avi"];

/// Length of the content-hash prefix used as a video id.
pub const ID_HEX_LEN: usize = 16;

#[derive(Debug, Parser)]
#[command(
    name = "shortscribe",
    version,
    about = "Hierarchical descriptions for short-form video"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Overrides applied on top of the config file and environment.
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// TOML config file.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Store directory (documents, media, event log).
    #[arg(long, global = true, value_name = "DIR")]
    pub store: Option<PathBuf>,
    /// Shot-cut threshold on mean absolute luma difference, in (0, 1].
    #[arg(long, global = true, value_name = "FLOAT")]
    pub scene_threshold: Option<f64>,
    /// Decode sampling: "native" or frames per second.
    #[arg(long, global = true, value_name = "RATE")]
    pub sample_rate: Option<SampleRate>,
    /// Maximum videos (and per-shot backend calls) in flight.
    #[arg(long, global = true, value_name = "N")]
    pub concurrency: Option<usize>,
    /// Retries when the shot-by-shot response has the wrong line count.
    #[arg(long, global = true, value_name = "N")]
    pub shot_retries: Option<u32>,
    /// Directory holding prompt templates.
    #[arg(long, global = true, value_name = "DIR")]
    pub prompt_dir: Option<PathBuf>,
    /// Word list for the content filter, one entry per line.
    #[arg(long, global = true, value_name = "FILE")]
    pub lexicon: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Add videos and their metadata to the store.
    Ingest(IngestArgs),
    /// Generate description sets for stored videos.
    Describe(DescribeArgs),
    /// Serve the feed API and optional static viewer assets.
    Serve(ServeArgs),
    /// Aggregate human accuracy and coverage labels.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Video files or directories of videos.
    #[arg(required = true, value_name = "PATH")]
    pub paths: Vec<PathBuf>,
    /// CSV or JSON metadata keyed by file name.
    #[arg(long, value_name = "FILE")]
    pub metadata: PathBuf,
}

#[derive(Debug, Args)]
pub struct DescribeArgs {
    /// Video ids to describe.
    #[arg(value_name = "ID", conflicts_with = "all")]
    pub ids: Vec<String>,
    /// Describe every video in the store.
    #[arg(long)]
    pub all: bool,
    /// Backend implementations to use.
    #[arg(long, value_name = "MODE", default_value = "stub")]
    pub backends: BackendMode,
    /// Regenerate even when the stored set matches the media.
    #[arg(long)]
    pub force: bool,
    /// Also write the per-video report as JSON.
    #[arg(long, value_name = "FILE")]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    /// Directory of static viewer assets served at `/`.
    #[arg(long, value_name = "DIR")]
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Labels file (.csv or .json).
    #[arg(value_name = "LABELS")]
    pub labels: PathBuf,
    /// Where to write the JSON report; defaults to `<labels>.report.json`.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Standard deviation convention: population or sample.
    #[arg(long, default_value = "population")]
    pub sigma: SigmaConvention,
}

impl GlobalArgs {
    /// Config file, then environment, then these flags.
    pub fn resolve(&self) -> Result<PipelineConfig, ConfigError> {
        let mut cfg = PipelineConfig::load(self.config.as_deref())?;
        self.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&self, cfg: &mut PipelineConfig) {
        if let Some(v) = &self.store {
            cfg.store_dir = v.clone();
        }
        if let Some(v) = self.scene_threshold {
            cfg.scene_threshold = v;
        }
        if let Some(v) = self.sample_rate {
            cfg.sample_rate = v;
        }
        if let Some(v) = self.concurrency {
            cfg.concurrency = v;
        }
        if let Some(v) = self.shot_retries {
            cfg.shot_retries = v;
        }
        if let Some(v) = &self.prompt_dir {
            cfg.prompt_dir = Some(v.clone());
        }
        if let Some(v) = &self.lexicon {
            cfg.lexicon_file = Some(v.clone());
        }
    }
}

pub fn open_store(cfg: &PipelineConfig) -> Result<FeedStore, StoreError> {
    let lexicon = match &cfg.lexicon_file {
        Some(p) => ContentLexicon::from_file(p)?,
        None => ContentLexicon::empty(),
    };
    FeedStore::open(&cfg.store_dir, lexicon)
}

/// Static metadata supplied for each video at ingest time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMetadata {
    pub file: String,
    pub username: String,
    #[serde(default)]
    pub author_caption: String,
    #[serde(default)]
    pub audio_title: String,
    #[serde(default)]
    pub likes: u64,
    #[serde(default)]
    pub comments: u64,
    #[serde(default)]
    pub bookmarks: u64,
    #[serde(default)]
    pub shares: u64,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("no metadata row for {0}")]
    MetadataMissing(String),
    #[error("cannot read metadata {path}: {reason}")]
    Metadata { path: PathBuf, reason: String },
    #[error("no media files found under {0}")]
    NoMedia(PathBuf),
    #[error(transparent)]
    Media(#[from] MediaError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Reads CSV (header row) or JSON (array of rows, or object keyed by file).
pub fn load_metadata(path: &Path) -> Result<HashMap<String, VideoMetadata>, IngestError> {
    let fail = |reason: String| IngestError::Metadata {
        path: path.to_path_buf(),
        reason,
    };
    let text = std::fs::read_to_string(path).map_err(|e| fail(e.to_string()))?;
    let rows: Vec<VideoMetadata> = if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"))
    {
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| fail(e.to_string()))?;
        match value {
            serde_json::Value::Object(map) => map
                .into_iter()
                .map(|(file, mut row)| {
                    if let Some(obj) = row.as_object_mut() {
                        obj.entry("file").or_insert(serde_json::Value::String(file));
                    }
                    serde_json::from_value(row).map_err(|e| fail(e.to_string()))
                })
                .collect::<Result<_, _>>()?,
            other => serde_json::from_value(other).map_err(|e| fail(e.to_string()))?,
        }
    } else {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        reader
            .deserialize()
            .enumerate()
            .map(|(i, r)| r.map_err(|e| fail(format!("row {}: {e}", i + 2))))
            .collect::<Result<_, _>>()?
    };
    Ok(rows.into_iter().map(|r| (r.file.clone(), r)).collect())
}

fn is_media(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| MEDIA_EXTENSIONS.iter().any(|m| e.eq_ignore_ascii_case(m)))
}

/// Expands directories into their media files, sorted by name.
pub fn collect_media(paths: &[PathBuf]) -> Result<Vec<PathBuf>, IngestError> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let entries = std::fs::read_dir(p).map_err(|source| IngestError::Io {
                path: p.clone(),
                source,
            })?;
            let mut found: Vec<PathBuf> = entries
                .flatten()
                .map(|e| e.path())
                .filter(|f| f.is_file() && is_media(f))
                .collect();
            if found.is_empty() {
                return Err(IngestError::NoMedia(p.clone()));
            }
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ingested {
    pub file: PathBuf,
    pub video_id: String,
    /// False when the same content was already in the store.
    pub created: bool,
}

/// Adds media files to the store. Every file must have a metadata row and
/// decode to at least one frame before anything is written. Ids are a
/// prefix of the content hash, so re-ingesting is a no-op.
pub fn cmd_ingest(
    cfg: &PipelineConfig,
    store: &FeedStore,
    paths: &[PathBuf],
    metadata: &Path,
) -> Result<Vec<Ingested>, IngestError> {
    let files = collect_media(paths)?;
    let meta = load_metadata(metadata)?;
    let decoder = cfg.decoder();
    let mut planned = Vec::new();
    for file in &files {
        let name = file
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let row = meta
            .get(&name)
            .ok_or_else(|| IngestError::MetadataMissing(name.clone()))?;
        let mut frames = decode_frames_with(file, SampleRate::Native, &decoder)?;
        match frames.next() {
            Some(Ok(_)) => {}
            Some(Err(e)) => return Err(e.into()),
            None => return Err(MediaError::EmptyVideo.into()),
        }
        let digest = sha256_file(file).map_err(|source| IngestError::Io {
            path: file.clone(),
            source,
        })?;
        planned.push((file.clone(), digest[..ID_HEX_LEN].to_string(), row.clone()));
    }

    let mut out = Vec::new();
    for (file, id, row) in planned {
        let created = !store.contains(&id);
        if created {
            store.save_document(&FeedDocument {
                video_id: id.clone(),
                username: row.username,
                author_caption: row.author_caption,
                audio_title: row.audio_title,
                likes: row.likes,
                comments: row.comments,
                bookmarks: row.bookmarks,
                shares: row.shares,
                video_url: format!("/media/{id}"),
                description_set: None,
            })?;
        }
        if created || store.media_path(&id).is_none_or(|p| !p.exists()) {
            store.put_media(&id, &file)?;
        }
        out.push(Ingested {
            file,
            video_id: id,
            created,
        });
    }
    Ok(out)
}

/// Describes the given ids (or all stored videos), printing one line per
/// video as it completes.
pub fn cmd_describe(
    cfg: &PipelineConfig,
    store: &FeedStore,
    ids: &[String],
    mode: BackendMode,
    force: bool,
    out: &Mutex<&mut (dyn Write + Send)>,
) -> Result<Vec<VideoReport>, ConfigError> {
    let pipeline = Pipeline::from_config(cfg, mode)?;
    let ids = if ids.is_empty() {
        store.ids()
    } else {
        ids.to_vec()
    };
    Ok(pipeline.describe_many(store, &ids, force, |r| {
        let mut w = out.lock().unwrap();
        let _ = writeln!(w, "{r}");
        let _ = w.flush();
    }))
}

/// Computes the report, writes it as JSON to `out_path`, and returns it.
pub fn cmd_eval(
    labels: &Path,
    out_path: &Path,
    sigma: SigmaConvention,
) -> Result<EvalReport, EvalError> {
    let rows = eval::load_labels(labels)?;
    let grouped = eval::group_labels(&rows)?;
    let report = eval::build_report(&grouped, sigma)?;
    let json = serde_json::to_vec_pretty(&report).expect("report serializes");
    std::fs::write(out_path, json)
        .map_err(|e| EvalError::Io(format!("{}: {e}", out_path.display())))?;
    Ok(report)
}

pub fn default_report_path(labels: &Path) -> PathBuf {
    let mut p = labels.as_os_str().to_owned();
    p.push(".report.json");
    PathBuf::from(p)
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut (dyn Write + Send), err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{rendered}");
            } else {
                let _ = write!(out, "{rendered}");
            }
            return code;
        }
    };
    let cfg = match cli.global.resolve() {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    match cli.command {
        Command::Ingest(a) => run_ingest(&cfg, &a, out, err),
        Command::Describe(a) => run_describe(&cfg, &a, out, err),
        Command::Serve(a) => run_serve(&cfg, &a, out, err),
        Command::Eval(a) => run_eval(&a, out, err),
    }
}

fn store_or_exit(cfg: &PipelineConfig, err: &mut dyn Write) -> Option<FeedStore> {
    match open_store(cfg) {
        Ok(s) => Some(s),
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            None
        }
    }
}

fn run_ingest(
    cfg: &PipelineConfig,
    a: &IngestArgs,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let Some(store) = store_or_exit(cfg, err) else {
        return EXIT_USAGE;
    };
    match cmd_ingest(cfg, &store, &a.paths, &a.metadata) {
        Ok(done) => {
            for d in &done {
                let what = if d.created {
                    "ingested"
                } else {
                    "already present"
                };
                let _ = writeln!(out, "{} {} ({what})", d.video_id, d.file.display());
            }
            EXIT_OK
        }
        Err(e @ (IngestError::Metadata { .. } | IngestError::NoMedia(_))) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_PARTIAL
        }
    }
}

fn run_describe(
    cfg: &PipelineConfig,
    a: &DescribeArgs,
    out: &mut (dyn Write + Send),
    err: &mut dyn Write,
) -> i32 {
    if !a.all && a.ids.is_empty() {
        let _ = writeln!(err, "error: give video ids or --all");
        return EXIT_USAGE;
    }
    let Some(store) = store_or_exit(cfg, err) else {
        return EXIT_USAGE;
    };
    let sink = Mutex::new(out);
    let reports = match cmd_describe(cfg, &store, &a.ids, a.backends, a.force, &sink) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let out = sink.into_inner().unwrap();
    let count = |s: Status| reports.iter().filter(|r| r.status == s).count();
    let failed = count(Status::Failed);
    let _ = writeln!(
        out,
        "described={} skipped={} failed={failed}",
        count(Status::Described),
        count(Status::Skipped)
    );
    if let Some(path) = &a.report {
        let json = serde_json::to_vec_pretty(&reports).expect("reports serialize");
        if let Err(e) = std::fs::write(path, json) {
            let _ = writeln!(err, "error: cannot write {}: {e}", path.display());
            return EXIT_PARTIAL;
        }
    }
    if failed > 0 {
        EXIT_PARTIAL
    } else {
        EXIT_OK
    }
}

fn run_serve(cfg: &PipelineConfig, a: &ServeArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    if let Some(dir) = &a.static_dir {
        if !dir.is_dir() {
            let _ = writeln!(
                err,
                "error: static directory {} does not exist",
                dir.display()
            );
            return EXIT_USAGE;
        }
    }
    let Some(store) = store_or_exit(cfg, err) else {
        return EXIT_USAGE;
    };
    let listener = match service::bind((a.host, a.port).into()) {
        Ok(l) => l,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_PARTIAL;
        }
    };
    if let Ok(addr) = listener.local_addr() {
        let _ = writeln!(out, "serving {} videos on http://{addr}", store.len());
        let _ = out.flush();
    }
    match service::serve_forever(listener, Arc::new(store), a.static_dir.clone()) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_PARTIAL
        }
    }
}

fn run_eval(a: &EvalArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let out_path = a
        .out
        .clone()
        .unwrap_or_else(|| default_report_path(&a.labels));
    match cmd_eval(&a.labels, &out_path, a.sigma) {
        Ok(report) => {
            let _ = write!(out, "{}", report.to_table());
            let _ = writeln!(out, "report written to {}", out_path.display());
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_PARTIAL
        }
    }
}

/// Entry point used by the binary.
pub fn main_from_env() -> i32 {
    let mut stdout = std::io::stdout();
    let mut stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout, &mut stderr)
}
