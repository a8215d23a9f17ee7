//! Hierarchical descriptions for short-form video.
//!
//! A video is split into shots, each shot's keyframe is captioned and read for
//! on-screen text, speech is transcribed, and a chat model turns the per-shot
//! data into four description levels: short, long (condensed to 50 words when
//! needed), shot-by-shot, and the on-screen text. Results are kept in a JSON
//! store and served over a small HTTP API.
//!
//! | module          | what it does                                              |
//! |-----------------|-----------------------------------------------------------|
//! | [`media`]       | raw-frame decoding, shot detection, keyframes             |
//! | [`backends`]    | ASR / OCR / caption / embedding / LLM clients and stubs   |
//! | [`extraction`]  | OCR filtering, caption selection, shot records            |
//! | [`summarize`]   | prompt templates and description generation               |
//! | [`store`]       | JSON document store, content filter, interaction log      |
//! | [`service`]     | HTTP API over the store                                   |
//! | [`eval`]        | statistics over human accuracy/coverage labels            |
//! | [`pipeline`]    | end-to-end processing of one video                        |
//! | [`cli`]         | the `shortscribe` command line                            |

pub mod backends;
pub mod cli;
pub mod config;
pub mod eval;
pub mod extraction;
pub mod media;
pub mod pipeline;
pub mod service;
pub mod store;
pub mod summarize;

pub use backends::{BackendError, BackendRole, Backends};
pub use extraction::{CaptionCandidate, CaptionParams, OcrSpan, ShotRecord, TranscriptSegment};
pub use media::{FrameMeta, Keyframe, Shot};
pub use summarize::{DescriptionSet, PromptKind, ShotSummary};
