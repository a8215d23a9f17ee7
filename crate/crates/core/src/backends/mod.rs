//! Model backends behind one narrow trait per role.
//!
//! [`stub`] ships deterministic implementations of every role so the whole
//! pipeline runs without models; [`http`] talks to live services over the
//! JSON contracts in [`wire`].

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extraction::{CaptionParams, OcrDetection, TranscriptSegment};

pub mod http;
pub mod stub;
pub mod wire;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendRole {
    Asr,
    Ocr,
    Caption,
    Embed,
    Llm,
}

impl BackendRole {
    pub const ALL: [BackendRole; 5] = [
        BackendRole::Asr,
        BackendRole::Ocr,
        BackendRole::Caption,
        BackendRole::Embed,
        BackendRole::Llm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BackendRole::Asr => "asr",
            BackendRole::Ocr => "ocr",
            BackendRole::Caption => "caption",
            BackendRole::Embed => "embed",
            BackendRole::Llm => "llm",
        }
    }

    /// Prefix of this role's environment variables (`SS_ASR_URL`, `SS_ASR_KEY`).
    pub fn env_prefix(self) -> String {
        format!("SS_{}", self.as_str().to_uppercase())
    }
}

impl fmt::Display for BackendRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum BackendError {
    #[error("{role} backend unavailable: {reason}")]
    Unavailable { role: BackendRole, reason: String },
    #[error("{role} backend returned a malformed response: {reason}")]
    Malformed { role: BackendRole, reason: String },
}

impl BackendError {
    pub fn role(&self) -> BackendRole {
        match self {
            BackendError::Unavailable { role, .. } | BackendError::Malformed { role, .. } => *role,
        }
    }
}

pub type BackendResult<T> = std::result::Result<T, BackendError>;

pub trait AsrBackend: Send + Sync {
    fn id(&self) -> String;
    /// Transcribes the audio track of the media file at `media`.
    fn transcribe(&self, media: &Path) -> BackendResult<Vec<TranscriptSegment>>;
}

pub trait OcrBackend: Send + Sync {
    fn id(&self) -> String;
    fn detect_text(&self, image: &RgbImage) -> BackendResult<Vec<OcrDetection>>;
}

pub trait CaptionBackend: Send + Sync {
    fn id(&self) -> String;
    fn caption(&self, image: &RgbImage, params: &CaptionParams) -> BackendResult<Vec<String>>;
}

pub trait EmbedBackend: Send + Sync {
    fn id(&self) -> String;
    /// One image-text similarity per entry of `texts`, in order.
    fn similarity(&self, image: &RgbImage, texts: &[String]) -> BackendResult<Vec<f64>>;
}

pub trait LlmBackend: Send + Sync {
    fn id(&self) -> String;
    /// Sampling temperature the backend uses; recorded with every description set.
    fn temperature(&self) -> f64;
    fn complete(&self, prompt: &str) -> BackendResult<String>;
}

/// One client per backend role.
#[derive(Clone)]
pub struct Backends {
    pub asr: Arc<dyn AsrBackend>,
    pub ocr: Arc<dyn OcrBackend>,
    pub caption: Arc<dyn CaptionBackend>,
    pub embed: Arc<dyn EmbedBackend>,
    pub llm: Arc<dyn LlmBackend>,
}

impl Backends {
    /// Deterministic stand-ins for every role.
    pub fn stub() -> Self {
        Self {
            asr: Arc::new(stub::StubAsr),
            ocr: Arc::new(stub::StubOcr),
            caption: Arc::new(stub::StubCaptioner),
            embed: Arc::new(stub::StubEmbedder),
            llm: Arc::new(stub::StubLlm),
        }
    }

    pub fn live(config: &http::BackendsConfig) -> Result<Self, http::ConfigError> {
        Ok(Self {
            asr: Arc::new(http::HttpAsr::new(config.require(BackendRole::Asr)?)?),
            ocr: Arc::new(http::HttpOcr::new(config.require(BackendRole::Ocr)?)?),
            caption: Arc::new(http::HttpCaptioner::new(
                config.require(BackendRole::Caption)?,
            )?),
            embed: Arc::new(http::HttpEmbedder::new(
                config.require(BackendRole::Embed)?,
            )?),
            llm: Arc::new(http::HttpLlm::new(config.require(BackendRole::Llm)?)?),
        })
    }

    pub fn ids(&self) -> std::collections::BTreeMap<String, String> {
        [
            (BackendRole::Asr, self.asr.id()),
            (BackendRole::Ocr, self.ocr.id()),
            (BackendRole::Caption, self.caption.id()),
            (BackendRole::Embed, self.embed.id()),
            (BackendRole::Llm, self.llm.id()),
        ]
        .into_iter()
        .map(|(r, id)| (r.as_str().to_string(), id))
        .collect()
    }
}

impl fmt::Debug for Backends {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.ids()).finish()
    }
}
