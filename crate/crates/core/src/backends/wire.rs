//! JSON request/response bodies for the backend HTTP contracts.
//!
//! Every role is a single `POST` to its configured URL. Images travel as
//! base64-encoded PNG.
//!
//! | role    | request                                   | response                     |
//! |---------|-------------------------------------------|------------------------------|
//! | asr     | [`AsrRequest`]                            | [`AsrResponse`]              |
//! | ocr     | [`OcrRequest`]                            | [`OcrResponse`]              |
//! | caption | [`CaptionRequest`]                        | [`CaptionResponse`]          |
//! | embed   | [`EmbedRequest`]                          | [`EmbedResponse`]            |
//! | llm     | [`LlmRequest`]                            | [`LlmResponse`]              |

use std::io::Cursor;

use base64::Engine;
use image::{ImageFormat, RgbImage};
use serde::{Deserialize, Serialize};

use crate::extraction::{OcrDetection, Sampling, TranscriptSegment};

/// Audio is passed either by reference (a path the service can read) or
/// inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AudioSource {
    Path { path: String },
    Bytes { filename: String, data_b64: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsrRequest {
    pub audio: AudioSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsrResponse {
    pub segments: Vec<TranscriptSegment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrRequest {
    pub image_png_b64: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrResponse {
    pub spans: Vec<OcrDetection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionRequest {
    pub image_png_b64: String,
    pub num_candidates: usize,
    pub min_words: usize,
    pub max_words: usize,
    pub top_p: f64,
    pub temperature: f64,
    pub sampling: Sampling,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionResponse {
    pub captions: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub image_png_b64: String,
    pub texts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub similarities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRequest {
    pub model_id: String,
    pub prompt: String,
    pub temperature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub text: String,
}

pub fn encode_png_b64(image: &RgbImage) -> String {
    let mut buf = Cursor::new(Vec::new());
    image
        .write_to(&mut buf, ImageFormat::Png)
        .expect("PNG encoding into memory cannot fail");
    base64::engine::general_purpose::STANDARD.encode(buf.into_inner())
}

pub fn decode_png_b64(data: &str) -> Option<RgbImage> {
    let bytes = base64::engine::general_purpose::STANDARD
        .decode(data)
        .ok()?;
    image::load_from_memory_with_format(&bytes, ImageFormat::Png)
        .ok()
        .map(|img| img.to_rgb8())
}
