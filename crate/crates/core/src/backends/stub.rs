//! Deterministic backends.
//!
//! The `Stub*` types derive their output from the input alone (keyframe
//! pixels, prompt text, transcript sidecar files) so a pipeline run is a pure
//! function of the video bytes. The `Scripted*`/`Fixed*` helpers return canned
//! values and record what they were asked, for tests and examples.

use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use image::RgbImage;

use super::{
    AsrBackend, BackendError, BackendResult, BackendRole, CaptionBackend, EmbedBackend, LlmBackend,
    OcrBackend,
};
use crate::extraction::{CaptionParams, OcrDetection, TranscriptSegment};

/// Coarse appearance of an image used by the stub backends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Appearance {
    pub color: &'static str,
    pub brightness: &'static str,
}

const COLORS: [&str; 9] = [
    "black", "white", "gray", "red", "green", "blue", "yellow", "purple", "teal",
];
const BRIGHTNESS: [&str; 3] = ["dark", "muted", "bright"];

pub fn appearance(image: &RgbImage) -> Appearance {
    let n = (image.width() as u64 * image.height() as u64).max(1) as f64;
    let mut sum = [0u64; 3];
    for p in image.pixels() {
        for (acc, v) in sum.iter_mut().zip(p.0) {
            *acc += u64::from(v);
        }
    }
    let [r, g, b] = sum.map(|s| s as f64 / n);
    let luma = 0.299 * r + 0.587 * g + 0.114 * b;
    let hi = r.max(g).max(b);
    let lo = r.min(g).min(b);
    let color = if hi - lo < 30.0 {
        if luma < 60.0 {
            "black"
        } else if luma > 200.0 {
            "white"
        } else {
            "gray"
        }
    } else {
        let strong = |c: f64| c >= hi * 0.6;
        match (strong(r), strong(g), strong(b)) {
            (true, true, false) => "yellow",
            (true, false, true) => "purple",
            (false, true, true) => "teal",
            _ if hi == r => "red",
            _ if hi == g => "green",
            _ => "blue",
        }
    };
    let brightness = if luma < 85.0 {
        "dark"
    } else if luma < 170.0 {
        "muted"
    } else {
        "bright"
    };
    Appearance { color, brightness }
}

/// Reads `<media>.transcript.json` when present; otherwise the clip is silent.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubAsr;

impl StubAsr {
    pub fn sidecar(media: &Path) -> PathBuf {
        let mut p = media.as_os_str().to_owned();
        p.push(".transcript.json");
        PathBuf::from(p)
    }
}

impl AsrBackend for StubAsr {
    fn id(&self) -> String {
        "stub-asr/1".into()
    }

    fn transcribe(&self, media: &Path) -> BackendResult<Vec<TranscriptSegment>> {
        let sidecar = Self::sidecar(media);
        match std::fs::read(&sidecar) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| BackendError::Malformed {
                role: BackendRole::Asr,
                reason: format!("{}: {e}", sidecar.display()),
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
            Err(e) => Err(BackendError::Unavailable {
                role: BackendRole::Asr,
                reason: e.to_string(),
            }),
        }
    }
}

/// Reports an overlay naming the dominant color plus watermark and
/// low-confidence background spans that the filter is expected to drop.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubOcr;

impl OcrBackend for StubOcr {
    fn id(&self) -> String {
        "stub-ocr/1".into()
    }

    fn detect_text(&self, image: &RgbImage) -> BackendResult<Vec<OcrDetection>> {
        let look = appearance(image);
        Ok(vec![
            OcrDetection {
                text: format!("{} SCENE", look.color.to_uppercase()),
                confidence: 0.97,
            },
            OcrDetection {
                text: "TikTok".into(),
                confidence: 0.99,
            },
            OcrDetection {
                text: "@stub.creator".into(),
                confidence: 0.98,
            },
            OcrDetection {
                text: "background sign".into(),
                confidence: 0.61,
            },
        ])
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct StubCaptioner;

impl CaptionBackend for StubCaptioner {
    fn id(&self) -> String {
        "stub-caption/1".into()
    }

    fn caption(&self, image: &RgbImage, params: &CaptionParams) -> BackendResult<Vec<String>> {
        let Appearance { color, brightness } = appearance(image);
        let pool = [
            format!("a {brightness} frame with soft light"),
            format!("a close up of a {color} surface in a room"),
            format!("a {brightness} {color} scene from a short video"),
            "a person standing in front of a plain wall".to_string(),
            format!("an abstract {color} background with nothing else in view"),
        ];
        Ok(pool
            .iter()
            .cycle()
            .take(params.num_candidates)
            .cloned()
            .collect())
    }
}

/// Cosine similarity in a tiny color/brightness vocabulary space.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubEmbedder;

fn vocab_vector(words: impl Iterator<Item = String>) -> Vec<f64> {
    let mut v = vec![0.0; COLORS.len() + BRIGHTNESS.len()];
    for w in words {
        if let Some(i) = COLORS.iter().position(|c| *c == w) {
            v[i] += 1.0;
        } else if let Some(i) = BRIGHTNESS.iter().position(|c| *c == w) {
            v[COLORS.len() + i] += 1.0;
        }
    }
    v
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

impl EmbedBackend for StubEmbedder {
    fn id(&self) -> String {
        "stub-embed/1".into()
    }

    fn similarity(&self, image: &RgbImage, texts: &[String]) -> BackendResult<Vec<f64>> {
        let look = appearance(image);
        let iv = vocab_vector([look.color, look.brightness].into_iter().map(String::from));
        Ok(texts
            .iter()
            .map(|t| {
                let tv = vocab_vector(
                    t.split(|c: char| !c.is_alphanumeric())
                        .map(|w| w.to_lowercase()),
                );
                cosine(&iv, &tv)
            })
            .collect())
    }
}

/// Fields of one `SHOT n` block as read back from a prompt.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PromptShot {
    pub number: u32,
    pub duration: String,
    pub on_screen_text: String,
    pub transcript: String,
    pub description: String,
}

/// Reads the shot blocks out of a rendered prompt.
pub fn parse_prompt_shots(prompt: &str) -> Vec<PromptShot> {
    let mut shots: Vec<PromptShot> = Vec::new();
    for line in prompt.lines() {
        if let Some(n) = line
            .strip_prefix("SHOT ")
            .and_then(|n| n.trim().parse::<u32>().ok())
        {
            shots.push(PromptShot {
                number: n,
                ..Default::default()
            });
            continue;
        }
        let Some(cur) = shots.last_mut() else {
            continue;
        };
        let field = |label: &str| line.strip_prefix(label).map(|v| v.trim().to_string());
        if let Some(v) = field("Duration:") {
            cur.duration = v.trim_end_matches("seconds").trim().to_string();
        } else if let Some(v) = field("Text on screen:") {
            cur.on_screen_text = v;
        } else if let Some(v) = field("Shot audio transcript:") {
            cur.transcript = v;
        } else if let Some(v) = field("Shot description:") {
            cur.description = v;
        }
    }
    shots
}

/// Template-driven stand-in for the chat model. It recognises the four
/// prompt kinds by their opening instruction and writes a plain rendering
/// of the shot data.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubLlm;

fn first_words(text: &str, n: usize) -> String {
    text.split_whitespace()
        .take(n)
        .collect::<Vec<_>>()
        .join(" ")
}

fn word_limit(instruction: &str) -> Option<usize> {
    let idx = instruction.find(" word limit")?;
    instruction[..idx].rsplit(' ').next()?.parse().ok()
}

impl LlmBackend for StubLlm {
    fn id(&self) -> String {
        "stub-llm/1".into()
    }

    fn temperature(&self) -> f64 {
        0.0
    }

    fn complete(&self, prompt: &str) -> BackendResult<String> {
        let first_line = prompt.lines().next().unwrap_or_default();
        if first_line.starts_with("Condense") {
            let limit = word_limit(first_line).ok_or_else(|| BackendError::Malformed {
                role: BackendRole::Llm,
                reason: "condense prompt without a word limit".into(),
            })?;
            let body = prompt
                .split_once("\n\n")
                .map(|(_, b)| b)
                .unwrap_or_default();
            return Ok(first_words(body, limit));
        }
        let shots = parse_prompt_shots(prompt);
        if first_line.contains("summary for each shot") {
            let lines: Vec<String> = shots
                .iter()
                .map(|s| {
                    let mut line = format!("Shot {}: A {}-second shot", s.number, s.duration);
                    if !s.description.is_empty() {
                        line.push_str(&format!(" showing {}", s.description));
                    }
                    if !s.on_screen_text.is_empty() {
                        line.push_str(&format!(", with on-screen text \"{}\"", s.on_screen_text));
                    }
                    line.push('.');
                    line
                })
                .collect();
            return Ok(format!("\"{}\"", lines.join("\n")));
        }
        if first_line.contains("summary paragraph") {
            let mut out = format!(
                "The video is made of {} shot{}.",
                shots.len(),
                if shots.len() == 1 { "" } else { "s" }
            );
            for s in &shots {
                if !s.description.is_empty() {
                    out.push_str(&format!(" In shot {} we see {}.", s.number, s.description));
                }
                if !s.transcript.is_empty() {
                    out.push_str(&format!(" Someone says \"{}\".", s.transcript));
                }
                if !s.on_screen_text.is_empty() {
                    out.push_str(&format!(" The screen reads \"{}\".", s.on_screen_text));
                }
            }
            return Ok(out);
        }
        Err(BackendError::Malformed {
            role: BackendRole::Llm,
            reason: "unrecognised prompt".into(),
        })
    }
}

/// Returns queued responses in order, repeating the last one once the queue
/// runs dry, and records every prompt it receives.
#[derive(Debug, Default)]
pub struct ScriptedLlm {
    responses: Mutex<VecDeque<String>>,
    last: Mutex<Option<String>>,
    prompts: Mutex<Vec<String>>,
}

impl ScriptedLlm {
    pub fn new<I, S>(responses: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            responses: Mutex::new(responses.into_iter().map(Into::into).collect()),
            ..Default::default()
        }
    }

    pub fn prompts(&self) -> Vec<String> {
        self.prompts.lock().unwrap().clone()
    }
}

impl LlmBackend for ScriptedLlm {
    fn id(&self) -> String {
        "scripted-llm".into()
    }

    fn temperature(&self) -> f64 {
        0.0
    }

    fn complete(&self, prompt: &str) -> BackendResult<String> {
        self.prompts.lock().unwrap().push(prompt.to_string());
        let mut last = self.last.lock().unwrap();
        if let Some(next) = self.responses.lock().unwrap().pop_front() {
            *last = Some(next);
        }
        last.clone().ok_or_else(|| BackendError::Unavailable {
            role: BackendRole::Llm,
            reason: "script is empty".into(),
        })
    }
}

/// Returns the same caption list every call and records the parameters.
#[derive(Debug, Default)]
pub struct ScriptedCaptioner {
    captions: Vec<String>,
    params: Mutex<Option<CaptionParams>>,
}

impl ScriptedCaptioner {
    pub fn new(captions: Vec<String>) -> Self {
        Self {
            captions,
            params: Mutex::new(None),
        }
    }

    pub fn last_params(&self) -> Option<CaptionParams> {
        self.params.lock().unwrap().clone()
    }
}

impl CaptionBackend for ScriptedCaptioner {
    fn id(&self) -> String {
        "scripted-caption".into()
    }

    fn caption(&self, _image: &RgbImage, params: &CaptionParams) -> BackendResult<Vec<String>> {
        *self.params.lock().unwrap() = Some(params.clone());
        Ok(self.captions.clone())
    }
}

/// Returns a fixed score vector regardless of input.
#[derive(Debug, Clone, Default)]
pub struct FixedScores(pub Vec<f64>);

impl EmbedBackend for FixedScores {
    fn id(&self) -> String {
        "fixed-scores".into()
    }

    fn similarity(&self, _image: &RgbImage, _texts: &[String]) -> BackendResult<Vec<f64>> {
        Ok(self.0.clone())
    }
}

/// Every call fails as unavailable.
#[derive(Debug, Clone, Copy)]
pub struct Unreachable(pub BackendRole);

impl Unreachable {
    fn fail<T>(&self) -> BackendResult<T> {
        Err(BackendError::Unavailable {
            role: self.0,
            reason: "unreachable".into(),
        })
    }
}

impl AsrBackend for Unreachable {
    fn id(&self) -> String {
        "unreachable".into()
    }
    fn transcribe(&self, _media: &Path) -> BackendResult<Vec<TranscriptSegment>> {
        self.fail()
    }
}

impl OcrBackend for Unreachable {
    fn id(&self) -> String {
        "unreachable".into()
    }
    fn detect_text(&self, _image: &RgbImage) -> BackendResult<Vec<OcrDetection>> {
        self.fail()
    }
}

impl CaptionBackend for Unreachable {
    fn id(&self) -> String {
        "unreachable".into()
    }
    fn caption(&self, _image: &RgbImage, _params: &CaptionParams) -> BackendResult<Vec<String>> {
        self.fail()
    }
}

impl EmbedBackend for Unreachable {
    fn id(&self) -> String {
        "unreachable".into()
    }
    fn similarity(&self, _image: &RgbImage, _texts: &[String]) -> BackendResult<Vec<f64>> {
        self.fail()
    }
}

impl LlmBackend for Unreachable {
    fn id(&self) -> String {
        "unreachable".into()
    }
    fn temperature(&self) -> f64 {
        0.0
    }
    fn complete(&self, _prompt: &str) -> BackendResult<String> {
        self.fail()
    }
}
