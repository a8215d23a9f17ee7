//! Pipeline configuration.
//!
//! Values are layered: built-in defaults, then a TOML file, then `SS_*`
//! environment variables, then command-line flags (applied by the caller).
//!
//! ```toml
//! store_dir = "feed"
//! scene_threshold = 0.4
//! sample_rate = "native"        # or a number of frames per second
//! concurrency = 4
//! shot_retries = 2
//! min_ocr_confidence = 0.95
//! watermarks = ["tiktok"]
//! prompt_dir = "prompts"        # optional; built-in prompts otherwise
//! lexicon_file = "lexicon.txt"  # optional; no filtering otherwise
//! decoder_command = "ss-decode {input}"
//!
//! [caption]
//! num_candidates = 5
//! min_words = 5
//! max_words = 20
//! top_p = 0.9
//! temperature = 1.0
//!
//! [backends.llm]
//! endpoint = "http://localhost:8005/complete"
//! credential_env = "SS_LLM_KEY"
//! model_id = "gpt-4"
//! temperature = 0.0
//! ```
//!
//! | variable              | field                          |
//! |-----------------------|--------------------------------|
//! | `SS_STORE_DIR`        | `store_dir`                    |
//! | `SS_SCENE_THRESHOLD`  | `scene_threshold`              |
//! | `SS_SAMPLE_RATE`      | `sample_rate`                  |
//! | `SS_CONCURRENCY`      | `concurrency`                  |
//! | `SS_SHOT_RETRIES`     | `shot_retries`                 |
//! | `SS_PROMPT_DIR`       | `prompt_dir`                   |
//! | `SS_LEXICON_FILE`     | `lexicon_file`                 |
//! | `SS_DECODER_CMD`      | `decoder_command`              |
//! | `SS_<ROLE>_URL`       | `backends.<role>.endpoint`     |
//! | `SS_<ROLE>_KEY`       | bearer token for that role     |
//! | `SS_LLM_MODEL`        | `backends.llm.model_id`        |
//! | `SS_LLM_TEMPERATURE`  | `backends.llm.temperature`     |

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::backends::http::{BackendConfig, BackendsConfig};
use crate::extraction::{default_watermarks, CaptionParams, ExtractionOptions, MIN_OCR_CONFIDENCE};
use crate::media::{DecoderConfig, SampleRate, DEFAULT_SCENE_THRESHOLD};
use crate::summarize::DEFAULT_SHOT_RETRIES;

pub const MAX_CONCURRENCY: usize = 64;
pub const MAX_SHOT_RETRIES: u32 = 10;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("bad value for {var}: {reason}")]
    Env { var: String, reason: String },
    #[error("{field} must be {expected}, got {got}")]
    OutOfRange {
        field: &'static str,
        expected: &'static str,
        got: String,
    },
    #[error("{field} points at {path}, which does not exist")]
    MissingPath { field: &'static str, path: PathBuf },
    #[error(transparent)]
    Backend(#[from] crate::backends::http::ConfigError),
}

fn sample_rate_de<'de, D: Deserializer<'de>>(d: D) -> Result<SampleRate, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Text(String),
        Number(f64),
    }
    let s = match Raw::deserialize(d)? {
        Raw::Text(s) => s,
        Raw::Number(n) => n.to_string(),
    };
    SampleRate::from_str(&s).map_err(serde::de::Error::custom)
}

fn sample_rate_ser<S: serde::Serializer>(rate: &SampleRate, s: S) -> Result<S::Ok, S::Error> {
    match rate {
        SampleRate::Native => s.serialize_str("native"),
        SampleRate::Fps(f) => s.serialize_f64(*f),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub store_dir: PathBuf,
    pub scene_threshold: f64,
    #[serde(
        deserialize_with = "sample_rate_de",
        serialize_with = "sample_rate_ser"
    )]
    pub sample_rate: SampleRate,
    pub caption: CaptionParams,
    pub min_ocr_confidence: f64,
    pub watermarks: Vec<String>,
    pub shot_retries: u32,
    pub concurrency: usize,
    pub prompt_dir: Option<PathBuf>,
    pub lexicon_file: Option<PathBuf>,
    pub decoder_command: Option<String>,
    pub backends: BackendsConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            store_dir: PathBuf::from("shortscribe-store"),
            scene_threshold: DEFAULT_SCENE_THRESHOLD,
            sample_rate: SampleRate::Native,
            caption: CaptionParams::default(),
            min_ocr_confidence: MIN_OCR_CONFIDENCE,
            watermarks: default_watermarks(),
            shot_retries: DEFAULT_SHOT_RETRIES,
            concurrency: 4,
            prompt_dir: None,
            lexicon_file: None,
            decoder_command: None,
            backends: BackendsConfig::default(),
        }
    }
}

fn parse_env<T: FromStr>(var: &str, raw: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    raw.trim().parse().map_err(|e: T::Err| ConfigError::Env {
        var: var.to_string(),
        reason: e.to_string(),
    })
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, path)
    }

    /// Defaults, then `file` if given, then the process environment.
    pub fn load(file: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match file {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    pub fn apply_env(
        &mut self,
        lookup: impl Fn(&str) -> Option<String>,
    ) -> Result<(), ConfigError> {
        let get = |k: &str| lookup(k).filter(|v| !v.trim().is_empty());
        if let Some(v) = get("SS_STORE_DIR") {
            self.store_dir = PathBuf::from(v);
        }
        if let Some(v) = get("SS_SCENE_THRESHOLD") {
            self.scene_threshold = parse_env("SS_SCENE_THRESHOLD", &v)?;
        }
        if let Some(v) = get("SS_SAMPLE_RATE") {
            self.sample_rate = parse_env("SS_SAMPLE_RATE", &v)?;
        }
        if let Some(v) = get("SS_CONCURRENCY") {
            self.concurrency = parse_env("SS_CONCURRENCY", &v)?;
        }
        if let Some(v) = get("SS_SHOT_RETRIES") {
            self.shot_retries = parse_env("SS_SHOT_RETRIES", &v)?;
        }
        if let Some(v) = get("SS_PROMPT_DIR") {
            self.prompt_dir = Some(PathBuf::from(v));
        }
        if let Some(v) = get("SS_LEXICON_FILE") {
            self.lexicon_file = Some(PathBuf::from(v));
        }
        if let Some(v) = get(crate::media::DECODER_ENV) {
            self.decoder_command = Some(v);
        }
        self.backends.apply_env(get);
        let model = get("SS_LLM_MODEL");
        let temperature = get("SS_LLM_TEMPERATURE")
            .map(|v| parse_env::<f64>("SS_LLM_TEMPERATURE", &v))
            .transpose()?;
        if model.is_some() || temperature.is_some() {
            let llm = self
                .backends
                .llm
                .get_or_insert_with(|| BackendConfig::new(String::new()));
            if model.is_some() {
                llm.model_id = model;
            }
            if temperature.is_some() {
                llm.temperature = temperature;
            }
        }
        Ok(())
    }

    /// Range checks plus existence of every referenced path. The store
    /// directory is created on demand and is not required to exist. Backend
    /// endpoints are checked when live backends are built.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let range = |field, expected, ok: bool, got: String| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::OutOfRange {
                    field,
                    expected,
                    got,
                })
            }
        };
        let t = self.scene_threshold;
        range(
            "scene_threshold",
            "in (0, 1]",
            t > 0.0 && t <= 1.0,
            t.to_string(),
        )?;
        let c = self.concurrency;
        range(
            "concurrency",
            "in 1..=64",
            (1..=MAX_CONCURRENCY).contains(&c),
            c.to_string(),
        )?;
        let r = self.shot_retries;
        range(
            "shot_retries",
            "in 0..=10",
            r <= MAX_SHOT_RETRIES,
            r.to_string(),
        )?;
        let m = self.min_ocr_confidence;
        range(
            "min_ocr_confidence",
            "in [0, 1]",
            (0.0..=1.0).contains(&m),
            m.to_string(),
        )?;
        let cap = &self.caption;
        range(
            "caption.num_candidates",
            "at least 1",
            cap.num_candidates >= 1,
            cap.num_candidates.to_string(),
        )?;
        range(
            "caption.min_words",
            "at most caption.max_words",
            cap.min_words <= cap.max_words && cap.max_words >= 1,
            format!("{}..{}", cap.min_words, cap.max_words),
        )?;
        range(
            "caption.top_p",
            "in (0, 1]",
            cap.top_p > 0.0 && cap.top_p <= 1.0,
            cap.top_p.to_string(),
        )?;
        range(
            "caption.temperature",
            "positive",
            cap.temperature > 0.0 && cap.temperature.is_finite(),
            cap.temperature.to_string(),
        )?;
        if let SampleRate::Fps(f) = self.sample_rate {
            range(
                "sample_rate",
                "positive",
                f > 0.0 && f.is_finite(),
                f.to_string(),
            )?;
        }
        for (field, path) in [
            ("prompt_dir", &self.prompt_dir),
            ("lexicon_file", &self.lexicon_file),
        ] {
            if let Some(p) = path {
                if !p.exists() {
                    return Err(ConfigError::MissingPath {
                        field,
                        path: p.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn extraction_options(&self) -> ExtractionOptions {
        ExtractionOptions {
            caption: self.caption.clone(),
            min_ocr_confidence: self.min_ocr_confidence,
            watermarks: self.watermarks.clone(),
            concurrency: self.concurrency,
        }
    }

    pub fn decoder(&self) -> DecoderConfig {
        DecoderConfig {
            command: self.decoder_command.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn defaults_validate() {
        let cfg = PipelineConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.scene_threshold, 0.4);
        assert_eq!(cfg.caption.num_candidates, 5);
        assert_eq!(cfg.shot_retries, 2);
    }

    #[test]
    fn toml_then_env() {
        let text = r#"
            scene_threshold = 0.3
            sample_rate = 10
            [caption]
            num_candidates = 3
            [backends.llm]
            endpoint = "http://llm.local/complete"
            model_id = "gpt-4"
        "#;
        let mut cfg = PipelineConfig::from_toml_str(text, Path::new("x.toml")).unwrap();
        assert_eq!(cfg.sample_rate, SampleRate::Fps(10.0));
        assert_eq!(cfg.caption.num_candidates, 3);
        assert_eq!(cfg.caption.max_words, 20);

        let env: HashMap<&str, &str> = HashMap::from([
            ("SS_SCENE_THRESHOLD", "0.55"),
            ("SS_LLM_URL", "http://other/complete"),
            ("SS_LLM_TEMPERATURE", "0.2"),
            ("SS_ASR_URL", "http://asr/transcribe"),
        ]);
        cfg.apply_env(|k| env.get(k).map(|v| v.to_string()))
            .unwrap();
        assert_eq!(cfg.scene_threshold, 0.55);
        let llm = cfg.backends.llm.as_ref().unwrap();
        assert_eq!(llm.endpoint, "http://other/complete");
        assert_eq!(llm.temperature, Some(0.2));
        assert_eq!(llm.model_id.as_deref(), Some("gpt-4"));
        assert_eq!(
            cfg.backends.asr.as_ref().unwrap().endpoint,
            "http://asr/transcribe"
        );
    }

    #[test]
    fn bad_env_value_names_variable() {
        let mut cfg = PipelineConfig::default();
        let err = cfg
            .apply_env(|k| (k == "SS_CONCURRENCY").then(|| "many".to_string()))
            .unwrap_err();
        assert!(err.to_string().contains("SS_CONCURRENCY"));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(
            PipelineConfig::from_toml_str("scene_treshold = 0.3", Path::new("c.toml")).is_err()
        );
    }

    #[test]
    fn range_and_path_checks() {
        let mut cfg = PipelineConfig {
            scene_threshold: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            cfg.validate(),
            Err(ConfigError::OutOfRange {
                field: "scene_threshold",
                ..
            })
        ));
        cfg.scene_threshold = 0.4;
        cfg.concurrency = 0;
        assert!(cfg.validate().is_err());
        cfg.concurrency = 2;
        cfg.prompt_dir = Some(PathBuf::from("/definitely/not/here"));
        assert!(matches!(
            cfg.validate(),
            Err(ConfigError::MissingPath {
                field: "prompt_dir",
                ..
            })
        ));
    }
}
