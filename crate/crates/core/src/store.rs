//! On-disk feed store.
//!
//! Layout under the store root:
//!
//! ```text
//! index.json            insertion-ordered list of videos and their media files
//! videos/<id>.json      one FeedDocument per video (same JSON the API serves)
//! media/<id>.<ext>      ingested video bytes (+ optional sidecars)
//! events.jsonl          append-only interaction log
//! ```

use std::collections::{HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Mutex, RwLock};

use chrono::{DateTime, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::summarize::DescriptionSet;

/// Version tag carried by every stored and served JSON document.
pub const SCHEMA_VERSION: u32 = 1;

pub const DEFAULT_REPLACEMENT: &str = "***";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("video {0} not found")]
    NotFound(String),
    #[error("schema violation: {0}")]
    SchemaViolation(String),
    #[error("invalid cursor {0:?}")]
    InvalidCursor(String),
    #[error("page size must be at least 1")]
    InvalidPageSize,
    #[error("unknown control {0:?}")]
    UnknownControl(String),
    #[error("event for session {session} is older than the previous one")]
    NonMonotonicTimestamp { session: String },
    #[error("another write to video {0} is in progress")]
    ConcurrentWrite(String),
    #[error("invalid lexicon: {0}")]
    InvalidLexicon(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt store file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
}

pub type Result<T> = std::result::Result<T, StoreError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Word list whose whole-word, case-insensitive matches are masked.
#[derive(Debug, Clone)]
pub struct ContentLexicon {
    words: Vec<String>,
    replacement: String,
    pattern: Option<Regex>,
}

impl Default for ContentLexicon {
    fn default() -> Self {
        Self::empty()
    }
}

impl ContentLexicon {
    pub fn empty() -> Self {
        Self {
            words: Vec::new(),
            replacement: DEFAULT_REPLACEMENT.to_string(),
            pattern: None,
        }
    }

    pub fn new<I, S>(words: I, replacement: &str) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut words: Vec<String> = words.into_iter().map(Into::into).collect();
        if let Some(blank) = words.iter().find(|w| w.trim().is_empty()) {
            return Err(StoreError::InvalidLexicon(format!("blank entry {blank:?}")));
        }
        words.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        words.dedup();
        if words.is_empty() {
            return Ok(Self {
                replacement: replacement.to_string(),
                ..Self::empty()
            });
        }
        let is_word = |c: Option<char>| c.is_some_and(|c| c.is_alphanumeric() || c == '_');
        let alternatives: Vec<String> = words
            .iter()
            .map(|w| {
                let lead = if is_word(w.chars().next()) { r"\b" } else { "" };
                let trail = if is_word(w.chars().last()) { r"\b" } else { "" };
                format!("{lead}{}{trail}", regex::escape(w))
            })
            .collect();
        let pattern = Regex::new(&format!("(?i)(?:{})", alternatives.join("|")))
            .map_err(|e| StoreError::InvalidLexicon(e.to_string()))?;
        if pattern.is_match(replacement) {
            return Err(StoreError::InvalidLexicon(format!(
                "replacement {replacement:?} matches the lexicon"
            )));
        }
        Ok(Self {
            words,
            replacement: replacement.to_string(),
            pattern: Some(pattern),
        })
    }

    /// One entry per line; blank lines and `#` comments are skipped.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(String::from);
        Self::new(words, DEFAULT_REPLACEMENT)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn replacement(&self) -> &str {
        &self.replacement
    }

    pub fn apply(&self, text: &str) -> String {
        match &self.pattern {
            Some(re) => re
                .replace_all(text, regex::NoExpand(&self.replacement))
                .into_owned(),
            None => text.to_string(),
        }
    }

    pub fn apply_to_set(&self, set: &mut DescriptionSet) {
        set.short = self.apply(&set.short);
        set.long = self.apply(&set.long);
        if let Some(f) = set.fifty_word.as_mut() {
            *f = self.apply(f);
        }
        for s in &mut set.shot_by_shot {
            s.text = self.apply(&s.text);
        }
        set.on_screen_text = self.apply(&set.on_screen_text);
    }
}

/// Masks lexicon words in `text`.
pub fn content_filter(text: &str, lexicon: &ContentLexicon) -> String {
    lexicon.apply(text)
}

/// A video in the feed: static metadata plus its descriptions once generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "DocumentJson", try_from = "DocumentJson")]
pub struct FeedDocument {
    pub video_id: String,
    pub username: String,
    pub author_caption: String,
    pub audio_title: String,
    pub likes: u64,
    pub comments: u64,
    pub bookmarks: u64,
    pub shares: u64,
    pub video_url: String,
    pub description_set: Option<DescriptionSet>,
}

/// Serialized form. Field order is the viewer's reading order: short
/// description, username, caption, audio title, then the engagement counts.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct DocumentJson {
    schema_version: u32,
    short_description: Option<String>,
    username: String,
    author_caption: String,
    audio_title: String,
    likes: u64,
    comments: u64,
    bookmarks: u64,
    shares: u64,
    video_id: String,
    video_url: String,
    description_set: Option<DescriptionSet>,
}

impl From<FeedDocument> for DocumentJson {
    fn from(d: FeedDocument) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            short_description: d.description_set.as_ref().map(|s| s.short.clone()),
            username: d.username,
            author_caption: d.author_caption,
            audio_title: d.audio_title,
            likes: d.likes,
            comments: d.comments,
            bookmarks: d.bookmarks,
            shares: d.shares,
            video_id: d.video_id,
            video_url: d.video_url,
            description_set: d.description_set,
        }
    }
}

impl TryFrom<DocumentJson> for FeedDocument {
    type Error = String;

    fn try_from(j: DocumentJson) -> std::result::Result<Self, String> {
        if j.schema_version != SCHEMA_VERSION {
            return Err(format!("unsupported schema_version {}", j.schema_version));
        }
        Ok(Self {
            video_id: j.video_id,
            username: j.username,
            author_caption: j.author_caption,
            audio_title: j.audio_title,
            likes: j.likes,
            comments: j.comments,
            bookmarks: j.bookmarks,
            shares: j.shares,
            video_url: j.video_url,
            description_set: j.description_set,
        })
    }
}

impl FeedDocument {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !valid_id(&self.video_id) {
            return Err(format!("invalid video_id {:?}", self.video_id));
        }
        if let Some(set) = &self.description_set {
            set.validate()?;
        }
        Ok(())
    }

    pub fn summary(&self) -> FeedSummary {
        FeedSummary {
            short_description: self.description_set.as_ref().map(|s| s.short.clone()),
            username: self.username.clone(),
            author_caption: self.author_caption.clone(),
            audio_title: self.audio_title.clone(),
            likes: self.likes,
            comments: self.comments,
            bookmarks: self.bookmarks,
            shares: self.shares,
            video_id: self.video_id.clone(),
            video_url: self.video_url.clone(),
            has_descriptions: self.description_set.is_some(),
        }
    }
}

/// Ids double as file names, so they are restricted to a safe alphabet.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

/// Feed entry without the description payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedSummary {
    pub short_description: Option<String>,
    pub username: String,
    pub author_caption: String,
    pub audio_title: String,
    pub likes: u64,
    pub comments: u64,
    pub bookmarks: u64,
    pub shares: u64,
    pub video_id: String,
    pub video_url: String,
    pub has_descriptions: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedPage {
    pub schema_version: u32,
    pub items: Vec<FeedSummary>,
    /// Absent on the last page.
    pub next_cursor: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Control {
    Prev,
    Next,
    Play,
    Pause,
    OpenDescriptions,
    CloseDescriptions,
    Like,
    Comment,
    Bookmark,
    Share,
}

impl Control {
    pub const ALL: [Control; 10] = [
        Control::Prev,
        Control::Next,
        Control::Play,
        Control::Pause,
        Control::OpenDescriptions,
        Control::CloseDescriptions,
        Control::Like,
        Control::Comment,
        Control::Bookmark,
        Control::Share,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Control::Prev => "prev",
            Control::Next => "next",
            Control::Play => "play",
            Control::Pause => "pause",
            Control::OpenDescriptions => "open_descriptions",
            Control::CloseDescriptions => "close_descriptions",
            Control::Like => "like",
            Control::Comment => "comment",
            Control::Bookmark => "bookmark",
            Control::Share => "share",
        }
    }
}

impl FromStr for Control {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self> {
        Control::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| StoreError::UnknownControl(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionEvent {
    pub session_id: String,
    pub video_id: String,
    pub control: Control,
    pub timestamp: DateTime<Utc>,
}

impl InteractionEvent {
    /// Parses an event body, reporting an unrecognised control by name.
    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        if let Some(control) = value.get("control") {
            let name = control
                .as_str()
                .ok_or_else(|| StoreError::UnknownControl(control.to_string()))?;
            Control::from_str(name)?;
        }
        serde_json::from_value(value.clone())
            .map_err(|e| StoreError::SchemaViolation(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventAck {
    pub schema_version: u32,
    pub seq: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct LoggedEvent {
    seq: u64,
    #[serde(flatten)]
    event: InteractionEvent,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct IndexEntry {
    video_id: String,
    media_file: Option<String>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct IndexFile {
    schema_version: u32,
    videos: Vec<IndexEntry>,
}

struct EventLog {
    path: PathBuf,
    next_seq: u64,
    last_seen: HashMap<String, DateTime<Utc>>,
}

/// Many readers, one writer per video id, concurrent event appends.
pub struct FeedStore {
    root: PathBuf,
    lexicon: ContentLexicon,
    index: RwLock<Vec<IndexEntry>>,
    writing: Mutex<HashSet<String>>,
    events: Mutex<EventLog>,
}

struct WriteGuard<'a> {
    set: &'a Mutex<HashSet<String>>,
    id: String,
}

impl Drop for WriteGuard<'_> {
    fn drop(&mut self) {
        self.set.lock().unwrap().remove(&self.id);
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

impl FeedStore {
    pub fn open(root: impl Into<PathBuf>, lexicon: ContentLexicon) -> Result<Self> {
        let root = root.into();
        for dir in [root.clone(), root.join("videos"), root.join("media")] {
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        }
        let index_path = root.join("index.json");
        let index = if index_path.exists() {
            let bytes = fs::read(&index_path).map_err(io_err(&index_path))?;
            let file: IndexFile =
                serde_json::from_slice(&bytes).map_err(|e| StoreError::Corrupt {
                    path: index_path.clone(),
                    reason: e.to_string(),
                })?;
            file.videos
        } else {
            Vec::new()
        };

        let events_path = root.join("events.jsonl");
        let mut log = EventLog {
            path: events_path.clone(),
            next_seq: 0,
            last_seen: HashMap::new(),
        };
        for event in read_events(&events_path)? {
            log.next_seq = event.seq + 1;
            log.last_seen
                .insert(event.event.session_id.clone(), event.event.timestamp);
        }

        Ok(Self {
            root,
            lexicon,
            index: RwLock::new(index),
            writing: Mutex::new(HashSet::new()),
            events: Mutex::new(log),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn lexicon(&self) -> &ContentLexicon {
        &self.lexicon
    }

    fn doc_path(&self, id: &str) -> PathBuf {
        self.root.join("videos").join(format!("{id}.json"))
    }

    fn lock_id(&self, id: &str) -> Result<WriteGuard<'_>> {
        let mut set = self.writing.lock().unwrap();
        if !set.insert(id.to_string()) {
            return Err(StoreError::ConcurrentWrite(id.to_string()));
        }
        Ok(WriteGuard {
            set: &self.writing,
            id: id.to_string(),
        })
    }

    fn persist_index(&self, entries: &[IndexEntry]) -> Result<()> {
        let file = IndexFile {
            schema_version: SCHEMA_VERSION,
            videos: entries.to_vec(),
        };
        let bytes = serde_json::to_vec_pretty(&file).expect("index serializes");
        write_atomic(&self.root.join("index.json"), &bytes)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.read().unwrap().iter().any(|e| e.video_id == id)
    }

    /// Ids in insertion order.
    pub fn ids(&self) -> Vec<String> {
        self.index
            .read()
            .unwrap()
            .iter()
            .map(|e| e.video_id.clone())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.index.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Validates, filters and writes `doc`; returns what was stored.
    pub fn save_document(&self, doc: &FeedDocument) -> Result<FeedDocument> {
        doc.validate().map_err(StoreError::SchemaViolation)?;
        let _guard = self.lock_id(&doc.video_id)?;
        let mut stored = doc.clone();
        if let Some(set) = stored.description_set.as_mut() {
            self.lexicon.apply_to_set(set);
            set.validate().map_err(StoreError::SchemaViolation)?;
        }
        let bytes = serde_json::to_vec_pretty(&stored).expect("document serializes");
        write_atomic(&self.doc_path(&doc.video_id), &bytes)?;

        let mut index = self.index.write().unwrap();
        if !index.iter().any(|e| e.video_id == doc.video_id) {
            index.push(IndexEntry {
                video_id: doc.video_id.clone(),
                media_file: None,
            });
            self.persist_index(&index)?;
        }
        Ok(stored)
    }

    pub fn load_document(&self, id: &str) -> Result<FeedDocument> {
        if !valid_id(id) || !self.contains(id) {
            return Err(StoreError::NotFound(id.to_string()));
        }
        let path = self.doc_path(id);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(StoreError::NotFound(id.to_string()))
            }
            Err(e) => return Err(io_err(&path)(e)),
        };
        serde_json::from_slice(&bytes).map_err(|e| StoreError::Corrupt {
            path,
            reason: e.to_string(),
        })
    }

    /// Copies `source` (and any `source.*` sidecar files) into the store.
    pub fn put_media(&self, id: &str, source: &Path) -> Result<PathBuf> {
        if !self.contains(id) {
            return Err(StoreError::NotFound(id.to_string()));
        }
        let ext = source
            .extension()
            .map(|e| format!(".{}", e.to_string_lossy()))
            .unwrap_or_default();
        let name = format!("{id}{ext}");
        let dest = self.root.join("media").join(&name);
        fs::copy(source, &dest).map_err(io_err(source))?;
        if let (Some(dir), Some(src_name)) = (source.parent(), source.file_name()) {
            let prefix = format!("{}.", src_name.to_string_lossy());
            let entries = fs::read_dir(if dir.as_os_str().is_empty() {
                Path::new(".")
            } else {
                dir
            })
            .map_err(io_err(dir))?;
            for entry in entries.flatten() {
                let fname = entry.file_name().to_string_lossy().into_owned();
                if let Some(suffix) = fname.strip_prefix(&prefix) {
                    let side = self.root.join("media").join(format!("{name}.{suffix}"));
                    fs::copy(entry.path(), &side).map_err(io_err(&side))?;
                }
            }
        }
        let mut index = self.index.write().unwrap();
        if let Some(entry) = index.iter_mut().find(|e| e.video_id == id) {
            entry.media_file = Some(name);
        }
        self.persist_index(&index)?;
        Ok(dest)
    }

    pub fn media_path(&self, id: &str) -> Option<PathBuf> {
        let index = self.index.read().unwrap();
        let entry = index.iter().find(|e| e.video_id == id)?;
        let name = entry.media_file.as_ref()?;
        Some(self.root.join("media").join(name))
    }

    /// One page of the feed in insertion order. The cursor is the opaque
    /// `next_cursor` of the previous page; `None` starts from the top.
    pub fn list_feed(&self, cursor: Option<&str>, page_size: usize) -> Result<FeedPage> {
        if page_size == 0 {
            return Err(StoreError::InvalidPageSize);
        }
        let ids = self.ids();
        let start = match cursor {
            None | Some("") => 0,
            Some(c) => c
                .parse::<usize>()
                .ok()
                .filter(|&n| n <= ids.len())
                .ok_or_else(|| StoreError::InvalidCursor(c.to_string()))?,
        };
        let end = (start + page_size).min(ids.len());
        let items = ids[start..end]
            .iter()
            .map(|id| self.load_document(id).map(|d| d.summary()))
            .collect::<Result<Vec<_>>>()?;
        Ok(FeedPage {
            schema_version: SCHEMA_VERSION,
            items,
            next_cursor: (end < ids.len()).then(|| end.to_string()),
        })
    }

    pub fn log_event(&self, event: &InteractionEvent) -> Result<EventAck> {
        if event.session_id.trim().is_empty() || event.video_id.trim().is_empty() {
            return Err(StoreError::SchemaViolation(
                "event needs session_id and video_id".into(),
            ));
        }
        let mut log = self.events.lock().unwrap();
        if let Some(prev) = log.last_seen.get(&event.session_id) {
            if event.timestamp < *prev {
                return Err(StoreError::NonMonotonicTimestamp {
                    session: event.session_id.clone(),
                });
            }
        }
        let seq = log.next_seq;
        let line = serde_json::to_string(&LoggedEvent {
            seq,
            event: event.clone(),
        })
        .expect("event serializes");
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&log.path)
            .map_err(io_err(&log.path))?;
        writeln!(file, "{line}").map_err(io_err(&log.path))?;
        log.next_seq += 1;
        log.last_seen
            .insert(event.session_id.clone(), event.timestamp);
        Ok(EventAck {
            schema_version: SCHEMA_VERSION,
            seq,
        })
    }

    /// Events of one session in the order they were logged.
    pub fn events_for_session(&self, session_id: &str) -> Result<Vec<InteractionEvent>> {
        let log = self.events.lock().unwrap();
        Ok(read_events(&log.path)?
            .into_iter()
            .filter(|e| e.event.session_id == session_id)
            .map(|e| e.event)
            .collect())
    }
}

fn read_events(path: &Path) -> Result<Vec<LoggedEvent>> {
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
                path: path.to_path_buf(),
                reason: format!("line {}: {e}", n + 1),
            })?,
        );
    }
    Ok(out)
}
