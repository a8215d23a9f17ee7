//! End-to-end processing: media, extraction, summarization, storage.

use std::fmt;
use std::fs::File;
use std::io::{self, Read};
use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::backends::{BackendError, BackendRole, Backends};
use crate::config::{ConfigError, PipelineConfig};
use crate::extraction::{extract_video, ExtractionError, ExtractionOptions};
use crate::media::{segment_video, DecoderConfig, MediaError, SampleRate};
use crate::store::{FeedStore, StoreError};
use crate::summarize::{Clock, FixedClock, PromptSet, SummarizeError, Summarizer, SystemClock};
use crate::DescriptionSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendMode {
    Stub,
    Live,
}

impl std::str::FromStr for BackendMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "stub" => Ok(Self::Stub),
            "live" => Ok(Self::Live),
            _ => Err(format!("expected stub or live, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Media,
    Extraction,
    Summarize,
    Store,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Media => "media",
            Stage::Extraction => "extraction",
            Stage::Summarize => "summarize",
            Stage::Store => "store",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub millis: f64,
}

/// Why a video could not be described.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: Stage,
    pub role: Option<BackendRole>,
    pub message: String,
}

impl fmt::Display for StageFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed", self.stage)?;
        if let Some(role) = self.role {
            write!(f, " ({role} backend)")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for StageFailure {}

impl StageFailure {
    fn new(stage: Stage, role: Option<BackendRole>, message: impl ToString) -> Self {
        Self {
            stage,
            role,
            message: message.to_string(),
        }
    }

    fn media(e: MediaError) -> Self {
        Self::new(Stage::Media, None, e)
    }

    fn extraction(e: ExtractionError) -> Self {
        let role = match &e {
            ExtractionError::Backend(b) => Some(b.role()),
            _ => None,
        };
        Self::new(Stage::Extraction, role, e)
    }

    fn summarize(e: SummarizeError) -> Self {
        let role = match &e {
            SummarizeError::Backend(b) => Some(b.role()),
            SummarizeError::SummaryCountMismatch { .. } | SummarizeError::EmptyResponse(_) => {
                Some(BackendRole::Llm)
            }
            _ => None,
        };
        Self::new(Stage::Summarize, role, e)
    }

    fn store(e: StoreError) -> Self {
        Self::new(Stage::Store, None, e)
    }
}

impl From<BackendError> for StageFailure {
    fn from(e: BackendError) -> Self {
        let stage = match e.role() {
            BackendRole::Llm => Stage::Summarize,
            _ => Stage::Extraction,
        };
        Self::new(stage, Some(e.role()), e)
    }
}

/// A description set with the time spent in each stage.
#[derive(Debug, Clone)]
pub struct Described {
    pub set: DescriptionSet,
    pub shot_count: usize,
    pub timings: Vec<StageTiming>,
}

pub fn sha256_file(path: &Path) -> io::Result<String> {
    let mut file = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn timed<T, E>(
    timings: &mut Vec<StageTiming>,
    stage: Stage,
    f: impl FnOnce() -> Result<T, E>,
) -> Result<T, E> {
    let start = Instant::now();
    let out = f();
    timings.push(StageTiming {
        stage,
        millis: start.elapsed().as_secs_f64() * 1000.0,
    });
    out
}

/// Everything needed to describe videos, built once per run.
pub struct Pipeline {
    pub backends: Backends,
    pub summarizer: Summarizer,
    pub extraction: ExtractionOptions,
    pub scene_threshold: f64,
    pub sample_rate: SampleRate,
    pub decoder: DecoderConfig,
    pub concurrency: usize,
}

impl Pipeline {
    /// Stub mode pins the clock so repeated runs produce identical output.
    pub fn from_config(config: &PipelineConfig, mode: BackendMode) -> Result<Self, ConfigError> {
        config.validate()?;
        let (backends, clock): (Backends, Arc<dyn Clock>) = match mode {
            BackendMode::Stub => (Backends::stub(), Arc::new(FixedClock::default())),
            BackendMode::Live => (Backends::live(&config.backends)?, Arc::new(SystemClock)),
        };
        let prompts = match &config.prompt_dir {
            Some(dir) => PromptSet::load_dir(dir).map_err(|e| ConfigError::Parse {
                path: dir.clone(),
                reason: e.to_string(),
            })?,
            None => PromptSet::builtin(),
        };
        Ok(Self::with_backends(config, backends)
            .with_summarizer(|s| s.with_clock(clock).with_prompts(prompts)))
    }

    /// Builds a pipeline around caller-supplied backends and a system clock.
    pub fn with_backends(config: &PipelineConfig, backends: Backends) -> Self {
        let summarizer =
            Summarizer::new(backends.llm.clone()).with_shot_retries(config.shot_retries);
        Self {
            backends,
            summarizer,
            extraction: config.extraction_options(),
            scene_threshold: config.scene_threshold,
            sample_rate: config.sample_rate,
            decoder: config.decoder(),
            concurrency: config.concurrency,
        }
    }

    pub fn with_summarizer(mut self, f: impl FnOnce(Summarizer) -> Summarizer) -> Self {
        self.summarizer = f(self.summarizer);
        self
    }

    /// Segments, extracts and summarizes one media file.
    pub fn describe_video(&self, media: &Path) -> Result<Described, StageFailure> {
        let mut timings = Vec::new();
        let (digest, seg) = timed(&mut timings, Stage::Media, || {
            let digest = sha256_file(media).map_err(|e| {
                StageFailure::media(MediaError::UndecodableMedia {
                    path: media.to_path_buf(),
                    reason: e.to_string(),
                })
            })?;
            let seg = segment_video(media, self.sample_rate, self.scene_threshold, &self.decoder)
                .map_err(StageFailure::media)?;
            Ok::<_, StageFailure>((digest, seg))
        })?;
        let extracted = timed(&mut timings, Stage::Extraction, || {
            extract_video(
                media,
                &seg.shots,
                &seg.keyframes,
                &self.backends,
                &self.extraction,
            )
            .map_err(StageFailure::extraction)
        })?;
        let mut set = timed(&mut timings, Stage::Summarize, || {
            self.summarizer
                .build_description_set(&seg.shots, &extracted.records)
                .map_err(StageFailure::summarize)
        })?;
        let meta = &mut set.generation_meta;
        meta.source_sha256 = Some(digest);
        meta.backend_ids = self.backends.ids();
        Ok(Described {
            set,
            shot_count: seg.shots.len(),
            timings,
        })
    }

    /// Describes a stored video and saves the result. Videos whose stored
    /// set was generated from the same media bytes are skipped unless
    /// `force` is set.
    pub fn describe_stored(&self, store: &FeedStore, id: &str, force: bool) -> VideoReport {
        let mut report = VideoReport {
            video_id: id.to_string(),
            status: Status::Failed,
            shot_count: None,
            timings: Vec::new(),
            failure: None,
        };
        let fail = |mut r: VideoReport, f: StageFailure| {
            r.failure = Some(f);
            r
        };
        let mut doc = match store.load_document(id) {
            Ok(d) => d,
            Err(e) => return fail(report, StageFailure::store(e)),
        };
        let Some(media) = store.media_path(id) else {
            return fail(
                report,
                StageFailure::store(StoreError::NotFound(format!("media for {id}"))),
            );
        };
        if !force {
            let stored_hash = doc
                .description_set
                .as_ref()
                .and_then(|s| s.generation_meta.source_sha256.clone());
            if let (Some(stored), Ok(current)) = (stored_hash, sha256_file(&media)) {
                if stored == current {
                    report.status = Status::Skipped;
                    report.shot_count = doc
                        .description_set
                        .as_ref()
                        .map(|s| s.generation_meta.shot_count);
                    return report;
                }
            }
        }
        let described = match self.describe_video(&media) {
            Ok(d) => d,
            Err(f) => return fail(report, f),
        };
        report.timings = described.timings;
        report.shot_count = Some(described.shot_count);
        doc.description_set = Some(described.set);
        let start = Instant::now();
        let saved = store.save_document(&doc);
        report.timings.push(StageTiming {
            stage: Stage::Store,
            millis: start.elapsed().as_secs_f64() * 1000.0,
        });
        match saved {
            Ok(_) => {
                report.status = Status::Described;
                report
            }
            Err(e) => fail(report, StageFailure::store(e)),
        }
    }

    /// Describes `ids` with up to `concurrency` videos in flight, calling
    /// `progress` as each one finishes. Reports come back in input order.
    pub fn describe_many(
        &self,
        store: &FeedStore,
        ids: &[String],
        force: bool,
        progress: impl Fn(&VideoReport) + Sync,
    ) -> Vec<VideoReport> {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.concurrency.max(1))
            .build()
            .expect("thread pool");
        pool.install(|| {
            ids.par_iter()
                .map(|id| {
                    let r = self.describe_stored(store, id, force);
                    progress(&r);
                    r
                })
                .collect()
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Described,
    Skipped,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoReport {
    pub video_id: String,
    pub status: Status,
    pub shot_count: Option<usize>,
    pub timings: Vec<StageTiming>,
    pub failure: Option<StageFailure>,
}

impl fmt::Display for VideoReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.status {
            Status::Described => write!(f, "{} described", self.video_id)?,
            Status::Skipped => write!(f, "{} skipped (already described)", self.video_id)?,
            Status::Failed => write!(f, "{} FAILED", self.video_id)?,
        }
        if let Some(n) = self.shot_count {
            write!(f, " shots={n}")?;
        }
        for t in &self.timings {
            write!(f, " {}={:.1}ms", t.stage, t.millis)?;
        }
        if let Some(fail) = &self.failure {
            write!(f, " {fail}")?;
        }
        Ok(())
    }
}
