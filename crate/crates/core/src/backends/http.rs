//! HTTP clients for live backends.

use std::path::Path;
use std::thread;
use std::time::Duration;

use base64::Engine;
use image::RgbImage;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::wire::*;
use super::{
    AsrBackend, BackendError, BackendResult, BackendRole, CaptionBackend, EmbedBackend, LlmBackend,
    OcrBackend,
};
use crate::extraction::{CaptionParams, OcrDetection, TranscriptSegment};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("no endpoint configured for the {0} backend (set {1}_URL)")]
    MissingEndpoint(BackendRole, String),
    #[error("invalid {role} backend config: {reason}")]
    Invalid { role: BackendRole, reason: String },
}

fn default_timeout() -> f64 {
    30.0
}
fn default_retries() -> u32 {
    2
}
fn default_backoff_ms() -> u64 {
    250
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub endpoint: String,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub credential_env: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_s: f64,
    #[serde(default = "default_retries")]
    pub retries: u32,
    /// First retry delay; doubles on each further attempt.
    #[serde(default = "default_backoff_ms")]
    pub backoff_ms: u64,
    /// ASR only: send the media bytes inline instead of a path reference.
    #[serde(default = "default_true")]
    pub inline_media: bool,
    /// LLM only.
    #[serde(default)]
    pub model_id: Option<String>,
    /// LLM only.
    #[serde(default)]
    pub temperature: Option<f64>,
}

impl BackendConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            credential_env: None,
            timeout_s: default_timeout(),
            retries: default_retries(),
            backoff_ms: default_backoff_ms(),
            inline_media: true,
            model_id: None,
            temperature: None,
        }
    }

    pub fn validate(&self, role: BackendRole) -> Result<(), ConfigError> {
        let invalid = |reason: String| ConfigError::Invalid { role, reason };
        if !(self.endpoint.starts_with("http://") || self.endpoint.starts_with("https://")) {
            return Err(invalid(format!(
                "endpoint {:?} is not an http(s) URL",
                self.endpoint
            )));
        }
        if !(self.timeout_s.is_finite() && self.timeout_s > 0.0) {
            return Err(invalid(format!(
                "timeout must be > 0, got {}",
                self.timeout_s
            )));
        }
        Ok(())
    }
}

/// Per-role endpoint configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BackendsConfig {
    pub asr: Option<BackendConfig>,
    pub ocr: Option<BackendConfig>,
    pub caption: Option<BackendConfig>,
    pub embed: Option<BackendConfig>,
    pub llm: Option<BackendConfig>,
}

impl BackendsConfig {
    pub fn get(&self, role: BackendRole) -> Option<&BackendConfig> {
        match role {
            BackendRole::Asr => self.asr.as_ref(),
            BackendRole::Ocr => self.ocr.as_ref(),
            BackendRole::Caption => self.caption.as_ref(),
            BackendRole::Embed => self.embed.as_ref(),
            BackendRole::Llm => self.llm.as_ref(),
        }
    }

    pub fn get_mut(&mut self, role: BackendRole) -> &mut Option<BackendConfig> {
        match role {
            BackendRole::Asr => &mut self.asr,
            BackendRole::Ocr => &mut self.ocr,
            BackendRole::Caption => &mut self.caption,
            BackendRole::Embed => &mut self.embed,
            BackendRole::Llm => &mut self.llm,
        }
    }

    pub fn require(&self, role: BackendRole) -> Result<(BackendRole, &BackendConfig), ConfigError> {
        let cfg = self
            .get(role)
            .ok_or_else(|| ConfigError::MissingEndpoint(role, role.env_prefix()))?;
        cfg.validate(role)?;
        Ok((role, cfg))
    }

    /// Applies `SS_<ROLE>_URL` / `SS_<ROLE>_KEY` overrides from `lookup`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) {
        for role in BackendRole::ALL {
            let prefix = role.env_prefix();
            let slot = self.get_mut(role);
            if let Some(url) = lookup(&format!("{prefix}_URL")) {
                match slot {
                    Some(cfg) => cfg.endpoint = url,
                    None => *slot = Some(BackendConfig::new(url)),
                }
            }
            if let Some(cfg) = slot.as_mut() {
                let key_var = format!("{prefix}_KEY");
                if lookup(&key_var).is_some() && cfg.credential_env.is_none() {
                    cfg.credential_env = Some(key_var);
                }
            }
        }
    }
}

/// JSON-over-HTTP client for one role with retry and exponential backoff.
#[derive(Debug)]
pub struct HttpClient {
    role: BackendRole,
    config: BackendConfig,
    token: Option<String>,
    client: reqwest::blocking::Client,
}

enum Attempt {
    Retry(String),
    Fatal(BackendError),
}

impl HttpClient {
    pub fn new((role, config): (BackendRole, &BackendConfig)) -> Result<Self, ConfigError> {
        config.validate(role)?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_s))
            .build()
            .map_err(|e| ConfigError::Invalid {
                role,
                reason: e.to_string(),
            })?;
        let token = config
            .credential_env
            .as_deref()
            .and_then(|var| std::env::var(var).ok());
        Ok(Self {
            role,
            config: config.clone(),
            token,
            client,
        })
    }

    pub fn role(&self) -> BackendRole {
        self.role
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }

    fn attempt<Req: Serialize, Resp: DeserializeOwned>(&self, body: &Req) -> Result<Resp, Attempt> {
        let mut req = self.client.post(&self.config.endpoint).json(body);
        if let Some(token) = &self.token {
            req = req.bearer_auth(token);
        }
        let resp = req.send().map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(Attempt::Retry(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(Attempt::Fatal(BackendError::Unavailable {
                role: self.role,
                reason: format!("HTTP {status}"),
            }));
        }
        let bytes = resp.bytes().map_err(|e| Attempt::Retry(e.to_string()))?;
        serde_json::from_slice(&bytes).map_err(|e| {
            Attempt::Fatal(BackendError::Malformed {
                role: self.role,
                reason: e.to_string(),
            })
        })
    }

    pub fn post<Req: Serialize, Resp: DeserializeOwned>(&self, body: &Req) -> BackendResult<Resp> {
        let mut last = String::new();
        for attempt in 0..=self.config.retries {
            if attempt > 0 {
                let delay = self
                    .config
                    .backoff_ms
                    .saturating_mul(1 << (attempt - 1).min(16));
                thread::sleep(Duration::from_millis(delay));
            }
            match self.attempt(body) {
                Ok(resp) => return Ok(resp),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(reason)) => {
                    tracing::warn!(role = %self.role, attempt, %reason, "backend call failed");
                    last = reason;
                }
            }
        }
        Err(BackendError::Unavailable {
            role: self.role,
            reason: format!(
                "{} after {} attempt(s): {last}",
                self.config.endpoint,
                self.config.retries + 1
            ),
        })
    }

    fn id(&self) -> String {
        format!("http:{}", self.config.endpoint)
    }
}

pub struct HttpAsr(HttpClient);
pub struct HttpOcr(HttpClient);
pub struct HttpCaptioner(HttpClient);
pub struct HttpEmbedder(HttpClient);
pub struct HttpLlm {
    client: HttpClient,
    model_id: String,
    temperature: f64,
}

impl HttpAsr {
    pub fn new(cfg: (BackendRole, &BackendConfig)) -> Result<Self, ConfigError> {
        HttpClient::new(cfg).map(Self)
    }
}

impl AsrBackend for HttpAsr {
    fn id(&self) -> String {
        self.0.id()
    }

    fn transcribe(&self, media: &Path) -> BackendResult<Vec<TranscriptSegment>> {
        let audio = if self.0.config.inline_media {
            let bytes = std::fs::read(media).map_err(|e| BackendError::Unavailable {
                role: BackendRole::Asr,
                reason: format!("cannot read {}: {e}", media.display()),
            })?;
            AudioSource::Bytes {
                filename: media
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                data_b64: base64::engine::general_purpose::STANDARD.encode(bytes),
            }
        } else {
            AudioSource::Path {
                path: media.to_string_lossy().into_owned(),
            }
        };
        let resp: AsrResponse = self.0.post(&AsrRequest { audio })?;
        Ok(resp.segments)
    }
}

impl HttpOcr {
    pub fn new(cfg: (BackendRole, &BackendConfig)) -> Result<Self, ConfigError> {
        HttpClient::new(cfg).map(Self)
    }
}

impl OcrBackend for HttpOcr {
    fn id(&self) -> String {
        self.0.id()
    }

    fn detect_text(&self, image: &RgbImage) -> BackendResult<Vec<OcrDetection>> {
        let resp: OcrResponse = self.0.post(&OcrRequest {
            image_png_b64: encode_png_b64(image),
        })?;
        Ok(resp.spans)
    }
}

impl HttpCaptioner {
    pub fn new(cfg: (BackendRole, &BackendConfig)) -> Result<Self, ConfigError> {
        HttpClient::new(cfg).map(Self)
    }
}

impl CaptionBackend for HttpCaptioner {
    fn id(&self) -> String {
        self.0.id()
    }

    fn caption(&self, image: &RgbImage, params: &CaptionParams) -> BackendResult<Vec<String>> {
        let resp: CaptionResponse = self.0.post(&CaptionRequest {
            image_png_b64: encode_png_b64(image),
            num_candidates: params.num_candidates,
            min_words: params.min_words,
            max_words: params.max_words,
            top_p: params.top_p,
            temperature: params.temperature,
            sampling: params.sampling,
        })?;
        Ok(resp.captions)
    }
}

impl HttpEmbedder {
    pub fn new(cfg: (BackendRole, &BackendConfig)) -> Result<Self, ConfigError> {
        HttpClient::new(cfg).map(Self)
    }
}

impl EmbedBackend for HttpEmbedder {
    fn id(&self) -> String {
        self.0.id()
    }

    fn similarity(&self, image: &RgbImage, texts: &[String]) -> BackendResult<Vec<f64>> {
        let resp: EmbedResponse = self.0.post(&EmbedRequest {
            image_png_b64: encode_png_b64(image),
            texts: texts.to_vec(),
        })?;
        Ok(resp.similarities)
    }
}

/// Temperature used for chat calls when none is configured.
pub const DEFAULT_LLM_TEMPERATURE: f64 = 0.0;

impl HttpLlm {
    pub fn new(cfg: (BackendRole, &BackendConfig)) -> Result<Self, ConfigError> {
        let model_id = cfg
            .1
            .model_id
            .clone()
            .unwrap_or_else(|| "gpt-4".to_string());
        let temperature = cfg.1.temperature.unwrap_or(DEFAULT_LLM_TEMPERATURE);
        Ok(Self {
            client: HttpClient::new(cfg)?,
            model_id,
            temperature,
        })
    }
}

impl LlmBackend for HttpLlm {
    fn id(&self) -> String {
        format!("{}@{}", self.model_id, self.client.config.endpoint)
    }

    fn temperature(&self) -> f64 {
        self.temperature
    }

    fn complete(&self, prompt: &str) -> BackendResult<String> {
        let resp: LlmResponse = self.client.post(&LlmRequest {
            model_id: self.model_id.clone(),
            prompt: prompt.to_string(),
            temperature: self.temperature,
        })?;
        Ok(resp.text)
    }
}
