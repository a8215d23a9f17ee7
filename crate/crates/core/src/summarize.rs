//! Prompt rendering and the four-level description hierarchy.
//!
//! Generation runs in a fixed order: shot-by-shot, long, optional 50-word
//! condensation (which then replaces the long description), and finally the
//! short description condensed from the final long text.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::backends::{BackendError, LlmBackend};
use crate::extraction::ShotRecord;
use crate::media::Shot;

/// Long descriptions above this many words are condensed.
pub const LONG_WORD_LIMIT: usize = 50;
/// Target length of the short description; longer outputs are flagged.
pub const SHORT_WORD_LIMIT: usize = 10;
/// Extra attempts when the shot-by-shot response has the wrong line count.
pub const DEFAULT_SHOT_RETRIES: u32 = 2;

#[derive(Debug, Error)]
pub enum SummarizeError {
    #[error("payload does not fit prompt kind {kind}: {reason}")]
    PayloadKindMismatch { kind: PromptKind, reason: String },
    #[error("expected {expected} shot summaries, got {got} (after {attempts} attempts)")]
    SummaryCountMismatch {
        expected: usize,
        got: usize,
        attempts: u32,
    },
    #[error("empty response for {0} prompt")]
    EmptyResponse(PromptKind),
    #[error("{shots} shots but {records} shot records")]
    RecordCountMismatch { shots: usize, records: usize },
    #[error("prompt fixture {path}: {reason}")]
    PromptFixture { path: String, reason: String },
    #[error(transparent)]
    Backend(#[from] BackendError),
}

pub type Result<T> = std::result::Result<T, SummarizeError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    ShotByShot,
    Long,
    Condense50,
    CondenseShort,
}

impl PromptKind {
    pub const ALL: [PromptKind; 4] = [
        PromptKind::ShotByShot,
        PromptKind::Long,
        PromptKind::Condense50,
        PromptKind::CondenseShort,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptKind::ShotByShot => "shot_by_shot",
            PromptKind::Long => "long",
            PromptKind::Condense50 => "condense_50",
            PromptKind::CondenseShort => "condense_short",
        }
    }

    /// Fixture file name under the prompts directory.
    pub fn file_name(self) -> String {
        format!("{}.txt", self.as_str())
    }

    fn takes_records(self) -> bool {
        matches!(self, PromptKind::ShotByShot | PromptKind::Long)
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Prompt templates, one per kind. The built-in set is compiled from the
/// `prompts/` fixtures.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptSet {
    templates: BTreeMap<PromptKind, String>,
}

impl Default for PromptSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PromptSet {
    pub fn builtin() -> Self {
        let templates = [
            (
                PromptKind::ShotByShot,
                include_str!("../prompts/shot_by_shot.txt"),
            ),
            (PromptKind::Long, include_str!("../prompts/long.txt")),
            (
                PromptKind::Condense50,
                include_str!("../prompts/condense_50.txt"),
            ),
            (
                PromptKind::CondenseShort,
                include_str!("../prompts/condense_short.txt"),
            ),
        ]
        .into_iter()
        .map(|(k, t)| (k, t.to_string()))
        .collect();
        Self { templates }
    }

    /// Loads `<kind>.txt` for every kind from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut templates = BTreeMap::new();
        for kind in PromptKind::ALL {
            let path = dir.join(kind.file_name());
            let text =
                std::fs::read_to_string(&path).map_err(|e| SummarizeError::PromptFixture {
                    path: path.display().to_string(),
                    reason: e.to_string(),
                })?;
            if text.trim().is_empty() {
                return Err(SummarizeError::PromptFixture {
                    path: path.display().to_string(),
                    reason: "template is empty".into(),
                });
            }
            templates.insert(kind, text);
        }
        Ok(Self { templates })
    }

    pub fn template(&self, kind: PromptKind) -> &str {
        &self.templates[&kind]
    }

    /// Hex SHA-256 of a template, recorded with generated descriptions.
    pub fn hash(&self, kind: PromptKind) -> String {
        hex::encode(Sha256::digest(self.template(kind).as_bytes()))
    }

    /// Template followed by a blank line and the payload.
    pub fn build(&self, kind: PromptKind, payload: PromptPayload<'_>) -> Result<String> {
        let mismatch = |reason: &str| SummarizeError::PayloadKindMismatch {
            kind,
            reason: reason.to_string(),
        };
        let data = match (kind.takes_records(), payload) {
            (true, PromptPayload::Records(records)) => {
                if records.is_empty() {
                    return Err(mismatch("no shot records"));
                }
                render_shot_blocks(records)
            }
            (false, PromptPayload::Text(text)) => {
                if text.trim().is_empty() {
                    return Err(mismatch("empty text"));
                }
                text.trim().to_string()
            }
            (true, PromptPayload::Text(_)) => return Err(mismatch("expects shot records")),
            (false, PromptPayload::Records(_)) => return Err(mismatch("expects a description")),
        };
        let template = self.template(kind);
        let mut prompt = String::with_capacity(template.len() + data.len() + 2);
        prompt.push_str(template);
        if !template.ends_with('\n') {
            prompt.push('\n');
        }
        prompt.push('\n');
        prompt.push_str(&data);
        Ok(prompt)
    }
}

#[derive(Debug, Clone, Copy)]
pub enum PromptPayload<'a> {
    Records(&'a [ShotRecord]),
    Text(&'a str),
}

/// Builds a prompt from the built-in templates.
pub fn build_prompt(kind: PromptKind, payload: PromptPayload<'_>) -> Result<String> {
    PromptSet::builtin().build(kind, payload)
}

fn one_line(field: &str) -> String {
    field
        .split(['\n', '\r'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Seconds with at most two decimals, trailing zeros trimmed.
pub fn format_duration(seconds: f64) -> String {
    let s = format!("{:.2}", seconds);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() || s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn field_line(label: &str, value: &str) -> String {
    let value = one_line(value);
    if value.is_empty() {
        format!("{label}:")
    } else {
        format!("{label}: {value}")
    }
}

/// The five-line data block for one shot.
pub fn render_shot_block(record: &ShotRecord) -> String {
    [
        format!("SHOT {}", record.shot_number),
        format!("Duration: {} seconds", format_duration(record.duration_s)),
        field_line("Text on screen", &record.on_screen_text),
        field_line("Shot audio transcript", &record.transcript_text),
        field_line("Shot description", &record.visual_caption),
    ]
    .join("\n")
}

pub fn render_shot_blocks(records: &[ShotRecord]) -> String {
    records
        .iter()
        .map(render_shot_block)
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Number of maximal whitespace-separated tokens.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

const QUOTES: &[char] = &['"', '\u{201c}', '\u{201d}'];

/// Splits a newline-separated answer into summary lines, removing the
/// framing quotation marks the template asks for.
pub fn parse_shot_summaries(response: &str) -> Vec<String> {
    let body = response.trim();
    let body = body.strip_prefix(QUOTES).unwrap_or(body);
    let body = body.strip_suffix(QUOTES).unwrap_or(body);
    body.lines()
        .map(|l| l.trim().trim_matches(QUOTES).trim())
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect()
}

fn paragraph(text: &str) -> String {
    one_line(text)
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotSummary {
    pub shot_number: u32,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationMeta {
    pub shot_count: usize,
    pub prompt_hashes: BTreeMap<PromptKind, String>,
    pub backend_ids: BTreeMap<String, String>,
    pub llm_temperature: f64,
    pub raw_long_word_count: usize,
    pub short_word_count: usize,
    pub short_over_limit: bool,
    pub shot_by_shot_attempts: u32,
    /// SHA-256 of the source media, set by the pipeline.
    #[serde(default)]
    pub source_sha256: Option<String>,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
}

/// The four description levels for one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptionSet {
    pub short: String,
    pub long: String,
    pub fifty_word: Option<String>,
    pub shot_by_shot: Vec<ShotSummary>,
    pub on_screen_text: String,
    pub generation_meta: GenerationMeta,
}

impl DescriptionSet {
    /// Checks the structural invariants; returns the first violation.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let meta = &self.generation_meta;
        if self.short.trim().is_empty() {
            return Err("short description is empty".into());
        }
        if self.long.trim().is_empty() {
            return Err("long description is empty".into());
        }
        if self.shot_by_shot.len() != meta.shot_count {
            return Err(format!(
                "{} shot summaries for {} shots",
                self.shot_by_shot.len(),
                meta.shot_count
            ));
        }
        for (i, s) in self.shot_by_shot.iter().enumerate() {
            if s.shot_number as usize != i + 1 {
                return Err(format!(
                    "shot summary {i} has shot_number {}",
                    s.shot_number
                ));
            }
            if s.text.trim().is_empty() {
                return Err(format!("shot summary {} is empty", s.shot_number));
            }
        }
        let condensed = meta.raw_long_word_count > LONG_WORD_LIMIT;
        match (&self.fifty_word, condensed) {
            (Some(f), true) if *f == self.long => {}
            (Some(_), true) => {
                return Err("long description differs from the 50-word version".into())
            }
            (None, false) => {}
            (Some(_), false) => return Err("50-word version present without condensation".into()),
            (None, true) => return Err("condensation required but 50-word version missing".into()),
        }
        Ok(())
    }
}

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Always reports the same instant; makes stub runs byte-reproducible.
#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub DateTime<Utc>);

impl Default for FixedClock {
    fn default() -> Self {
        Self(DateTime::<Utc>::UNIX_EPOCH)
    }
}

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        self.0
    }
}

/// Drives the LLM through the description levels.
#[derive(Clone)]
pub struct Summarizer {
    pub prompts: PromptSet,
    pub llm: Arc<dyn LlmBackend>,
    pub clock: Arc<dyn Clock>,
    pub shot_retries: u32,
}

/// Final long text and the 50-word version when condensation ran.
#[derive(Debug, Clone, PartialEq)]
pub struct CondensedLong {
    pub long_final: String,
    pub fifty_word: Option<String>,
}

/// Short description plus its length check.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortDescription {
    pub text: String,
    pub word_count: usize,
    pub over_limit: bool,
}

impl Summarizer {
    pub fn new(llm: Arc<dyn LlmBackend>) -> Self {
        Self {
            prompts: PromptSet::builtin(),
            llm,
            clock: Arc::new(SystemClock),
            shot_retries: DEFAULT_SHOT_RETRIES,
        }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn with_prompts(mut self, prompts: PromptSet) -> Self {
        self.prompts = prompts;
        self
    }

    pub fn with_shot_retries(mut self, retries: u32) -> Self {
        self.shot_retries = retries;
        self
    }

    fn ask(&self, kind: PromptKind, payload: PromptPayload<'_>) -> Result<String> {
        let prompt = self.prompts.build(kind, payload)?;
        Ok(self.llm.complete(&prompt)?)
    }

    /// Returns the summaries and the number of attempts used.
    pub fn generate_shot_by_shot(&self, records: &[ShotRecord]) -> Result<(Vec<ShotSummary>, u32)> {
        let prompt = self
            .prompts
            .build(PromptKind::ShotByShot, PromptPayload::Records(records))?;
        let attempts = self.shot_retries + 1;
        let mut got = 0;
        for attempt in 1..=attempts {
            let lines = parse_shot_summaries(&self.llm.complete(&prompt)?);
            if lines.len() == records.len() {
                let summaries = records
                    .iter()
                    .zip(lines)
                    .map(|(r, text)| ShotSummary {
                        shot_number: r.shot_number,
                        text,
                    })
                    .collect();
                return Ok((summaries, attempt));
            }
            tracing::warn!(
                expected = records.len(),
                got = lines.len(),
                attempt,
                "shot summary count mismatch"
            );
            got = lines.len();
        }
        Err(SummarizeError::SummaryCountMismatch {
            expected: records.len(),
            got,
            attempts,
        })
    }

    pub fn generate_long(&self, records: &[ShotRecord]) -> Result<String> {
        let text = paragraph(&self.ask(PromptKind::Long, PromptPayload::Records(records))?);
        if text.is_empty() {
            return Err(SummarizeError::EmptyResponse(PromptKind::Long));
        }
        Ok(text)
    }

    pub fn maybe_condense_50(&self, long: &str) -> Result<CondensedLong> {
        if word_count(long) <= LONG_WORD_LIMIT {
            return Ok(CondensedLong {
                long_final: long.to_string(),
                fifty_word: None,
            });
        }
        let condensed = paragraph(&self.ask(PromptKind::Condense50, PromptPayload::Text(long))?);
        if condensed.is_empty() {
            return Err(SummarizeError::EmptyResponse(PromptKind::Condense50));
        }
        Ok(CondensedLong {
            long_final: condensed.clone(),
            fifty_word: Some(condensed),
        })
    }

    pub fn generate_short(&self, long_final: &str) -> Result<ShortDescription> {
        let text =
            paragraph(&self.ask(PromptKind::CondenseShort, PromptPayload::Text(long_final))?);
        if text.is_empty() {
            return Err(SummarizeError::EmptyResponse(PromptKind::CondenseShort));
        }
        let n = word_count(&text);
        Ok(ShortDescription {
            text,
            word_count: n,
            over_limit: n > SHORT_WORD_LIMIT,
        })
    }

    pub fn build_description_set(
        &self,
        shots: &[Shot],
        records: &[ShotRecord],
    ) -> Result<DescriptionSet> {
        if shots.len() != records.len() {
            return Err(SummarizeError::RecordCountMismatch {
                shots: shots.len(),
                records: records.len(),
            });
        }
        let started_at = self.clock.now();
        let (shot_by_shot, attempts) = self.generate_shot_by_shot(records)?;
        let raw_long = self.generate_long(records)?;
        let condensed = self.maybe_condense_50(&raw_long)?;
        let short = self.generate_short(&condensed.long_final)?;

        let mut used = vec![
            PromptKind::ShotByShot,
            PromptKind::Long,
            PromptKind::CondenseShort,
        ];
        if condensed.fifty_word.is_some() {
            used.push(PromptKind::Condense50);
        }
        let prompt_hashes = used
            .into_iter()
            .map(|k| (k, self.prompts.hash(k)))
            .collect();
        let on_screen_text = records
            .iter()
            .map(|r| r.on_screen_text.trim())
            .filter(|t| !t.is_empty())
            .collect::<Vec<_>>()
            .join(" ");

        let set = DescriptionSet {
            short: short.text,
            long: condensed.long_final,
            fifty_word: condensed.fifty_word,
            shot_by_shot,
            on_screen_text,
            generation_meta: GenerationMeta {
                shot_count: shots.len(),
                prompt_hashes,
                backend_ids: BTreeMap::from([("llm".to_string(), self.llm.id())]),
                llm_temperature: self.llm.temperature(),
                raw_long_word_count: word_count(&raw_long),
                short_word_count: short.word_count,
                short_over_limit: short.over_limit,
                shot_by_shot_attempts: attempts,
                source_sha256: None,
                started_at,
                finished_at: self.clock.now(),
            },
        };
        debug_assert!(set.validate().is_ok(), "{:?}", set.validate());
        Ok(set)
    }
}
