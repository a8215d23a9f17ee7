//! Per-shot signal extraction: transcript, on-screen text and the selected
//! keyframe caption, bundled into [`ShotRecord`]s.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{BackendError, BackendRole, Backends, EmbedBackend};
use crate::media::{Keyframe, Shot};

/// Default OCR confidence floor.
pub const MIN_OCR_CONFIDENCE: f64 = 0.95;

/// Platform name removed from on-screen text.
pub const DEFAULT_WATERMARKS: &[&str] = &["tiktok"];

#[derive(Debug, Error)]
pub enum ExtractionError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("shot {0} has no selected caption")]
    MissingCaption(u32),
    #[error("no caption candidates for shot {0}")]
    NoCandidates(u32),
}

pub type Result<T> = std::result::Result<T, ExtractionError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptSegment {
    pub start_s: f64,
    pub end_s: f64,
    pub text: String,
}

/// Checks ordering and interval sanity of a backend transcript.
pub fn validate_transcript(segments: &[TranscriptSegment]) -> std::result::Result<(), String> {
    for (i, s) in segments.iter().enumerate() {
        if !(s.start_s.is_finite() && s.end_s.is_finite() && s.start_s < s.end_s) {
            return Err(format!(
                "segment {i} has bad interval {}..{}",
                s.start_s, s.end_s
            ));
        }
        if i > 0 && s.start_s < segments[i - 1].end_s {
            return Err(format!(
                "segment {i} overlaps or precedes segment {}",
                i - 1
            ));
        }
    }
    Ok(())
}

/// One piece of on-screen text found in a shot's keyframe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrSpan {
    pub text: String,
    pub confidence: f64,
    pub shot_number: u32,
}

/// Raw OCR output before it is attributed to a shot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OcrDetection {
    pub text: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    Nucleus,
}

/// Decoding parameters forwarded to the captioning backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaptionParams {
    pub num_candidates: usize,
    pub min_words: usize,
    pub max_words: usize,
    pub top_p: f64,
    pub temperature: f64,
    pub sampling: Sampling,
}

impl Default for CaptionParams {
    fn default() -> Self {
        Self {
            num_candidates: 5,
            min_words: 5,
            max_words: 20,
            top_p: 0.9,
            temperature: 1.0,
            sampling: Sampling::Nucleus,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptionCandidate {
    pub text: String,
    /// Image-text similarity; `None` until scored.
    pub similarity: Option<f64>,
    pub rank: usize,
}

/// Everything the summarizer knows about one shot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub shot_number: u32,
    pub duration_s: f64,
    pub on_screen_text: String,
    pub transcript_text: String,
    pub visual_caption: String,
}

pub fn transcribe(
    media: &Path,
    asr: &dyn crate::backends::AsrBackend,
) -> Result<Vec<TranscriptSegment>> {
    let segments = asr.transcribe(media)?;
    validate_transcript(&segments).map_err(|reason| BackendError::Malformed {
        role: BackendRole::Asr,
        reason,
    })?;
    Ok(segments)
}

/// Drops low-confidence text and watermark content, preserving order.
///
/// A span is a watermark when its text contains one of `watermark_patterns`
/// (case-insensitive) or any whitespace token starting with `@`.
pub fn filter_ocr(
    spans: &[OcrSpan],
    min_confidence: f64,
    watermark_patterns: &[String],
) -> Vec<OcrSpan> {
    let patterns: Vec<String> = watermark_patterns
        .iter()
        .map(|p| p.to_lowercase())
        .filter(|p| !p.is_empty())
        .collect();
    spans
        .iter()
        .filter(|s| s.confidence >= min_confidence)
        .filter(|s| !is_watermark(&s.text, &patterns))
        .cloned()
        .collect()
}

fn is_watermark(text: &str, lowered_patterns: &[String]) -> bool {
    let lower = text.to_lowercase();
    lowered_patterns.iter().any(|p| lower.contains(p.as_str()))
        || text
            .split_whitespace()
            .any(|tok| tok.len() > 1 && tok.starts_with('@'))
}

pub fn default_watermarks() -> Vec<String> {
    DEFAULT_WATERMARKS.iter().map(|s| s.to_string()).collect()
}

/// Runs OCR on a keyframe and attributes non-empty detections to its shot.
pub fn detect_on_screen_text(
    keyframe: &Keyframe,
    ocr: &dyn crate::backends::OcrBackend,
) -> Result<Vec<OcrSpan>> {
    let detections = ocr.detect_text(&keyframe.image)?;
    let mut spans = Vec::with_capacity(detections.len());
    for d in detections {
        if !(0.0..=1.0).contains(&d.confidence) {
            return Err(BackendError::Malformed {
                role: BackendRole::Ocr,
                reason: format!("confidence {} outside [0, 1]", d.confidence),
            }
            .into());
        }
        let text = d.text.trim();
        if text.is_empty() {
            continue;
        }
        spans.push(OcrSpan {
            text: text.to_string(),
            confidence: d.confidence,
            shot_number: keyframe.shot_number,
        });
    }
    Ok(spans)
}

pub fn caption_candidates(
    keyframe: &Keyframe,
    params: &CaptionParams,
    captioner: &dyn crate::backends::CaptionBackend,
) -> Result<Vec<CaptionCandidate>> {
    let texts = captioner.caption(&keyframe.image, params)?;
    if texts.len() != params.num_candidates {
        return Err(BackendError::Malformed {
            role: BackendRole::Caption,
            reason: format!(
                "expected {} captions, got {}",
                params.num_candidates,
                texts.len()
            ),
        }
        .into());
    }
    Ok(texts
        .into_iter()
        .enumerate()
        .map(|(rank, text)| CaptionCandidate {
            text,
            similarity: None,
            rank,
        })
        .collect())
}

/// Scores every candidate against the keyframe and returns the best one.
/// Ties go to the lowest rank.
pub fn select_caption(
    keyframe: &Keyframe,
    candidates: &[CaptionCandidate],
    embedder: &dyn EmbedBackend,
) -> Result<CaptionCandidate> {
    if candidates.is_empty() {
        return Err(ExtractionError::NoCandidates(keyframe.shot_number));
    }
    let texts: Vec<String> = candidates.iter().map(|c| c.text.clone()).collect();
    let scores = embedder.similarity(&keyframe.image, &texts)?;
    if scores.len() != candidates.len() {
        return Err(BackendError::Malformed {
            role: BackendRole::Embed,
            reason: format!("expected {} scores, got {}", candidates.len(), scores.len()),
        }
        .into());
    }
    let mut scored: Vec<CaptionCandidate> = candidates
        .iter()
        .zip(scores)
        .map(|(c, s)| CaptionCandidate {
            similarity: Some(s),
            ..c.clone()
        })
        .collect();
    scored.sort_by_key(|c| c.rank);
    let mut best = 0;
    for (i, c) in scored.iter().enumerate() {
        let s = c.similarity.unwrap_or(f64::NEG_INFINITY);
        let b = scored[best].similarity.unwrap_or(f64::NEG_INFINITY);
        if s > b {
            best = i;
        }
    }
    Ok(scored.swap_remove(best))
}

fn overlaps(segment: &TranscriptSegment, shot: &Shot) -> bool {
    segment.start_s < shot.end_s && segment.end_s > shot.start_s
}

/// Joins per-shot signals into one record per shot, in shot order.
///
/// Speech is attached to every shot whose `[start_s, end_s)` window it
/// overlaps, so a segment spanning a cut shows up in both shots.
pub fn assemble_shot_records(
    shots: &[Shot],
    transcript: &[TranscriptSegment],
    ocr_by_shot: &BTreeMap<u32, Vec<OcrSpan>>,
    captions_by_shot: &BTreeMap<u32, CaptionCandidate>,
) -> Result<Vec<ShotRecord>> {
    shots
        .iter()
        .map(|shot| {
            let caption = captions_by_shot
                .get(&shot.shot_number)
                .ok_or(ExtractionError::MissingCaption(shot.shot_number))?;
            let transcript_text = join_nonempty(
                transcript
                    .iter()
                    .filter(|seg| overlaps(seg, shot))
                    .map(|seg| seg.text.as_str()),
            );
            let on_screen_text = join_nonempty(
                ocr_by_shot
                    .get(&shot.shot_number)
                    .into_iter()
                    .flatten()
                    .map(|s| s.text.as_str()),
            );
            Ok(ShotRecord {
                shot_number: shot.shot_number,
                duration_s: shot.duration_s,
                on_screen_text,
                transcript_text,
                visual_caption: caption.text.trim().to_string(),
            })
        })
        .collect()
}

fn join_nonempty<'a>(parts: impl Iterator<Item = &'a str>) -> String {
    parts
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone)]
pub struct ExtractionOptions {
    pub caption: CaptionParams,
    pub min_ocr_confidence: f64,
    pub watermarks: Vec<String>,
    /// Upper bound on in-flight per-shot backend calls.
    pub concurrency: usize,
}

impl Default for ExtractionOptions {
    fn default() -> Self {
        Self {
            caption: CaptionParams::default(),
            min_ocr_confidence: MIN_OCR_CONFIDENCE,
            watermarks: default_watermarks(),
            concurrency: 4,
        }
    }
}

/// Output of the extraction stage for one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedVideo {
    pub transcript: Vec<TranscriptSegment>,
    pub ocr_by_shot: BTreeMap<u32, Vec<OcrSpan>>,
    pub captions_by_shot: BTreeMap<u32, CaptionCandidate>,
    pub records: Vec<ShotRecord>,
}

struct ShotSignals {
    shot_number: u32,
    ocr: Vec<OcrSpan>,
    caption: CaptionCandidate,
}

fn extract_shot(
    keyframe: &Keyframe,
    backends: &Backends,
    options: &ExtractionOptions,
) -> Result<ShotSignals> {
    let spans = detect_on_screen_text(keyframe, backends.ocr.as_ref())?;
    let ocr = filter_ocr(&spans, options.min_ocr_confidence, &options.watermarks);
    let candidates = caption_candidates(keyframe, &options.caption, backends.caption.as_ref())?;
    let caption = select_caption(keyframe, &candidates, backends.embed.as_ref())?;
    Ok(ShotSignals {
        shot_number: keyframe.shot_number,
        ocr,
        caption,
    })
}

/// Runs transcription alongside the per-keyframe OCR and caption work and
/// assembles the shot records.
pub fn extract_video(
    media: &Path,
    shots: &[Shot],
    keyframes: &[Keyframe],
    backends: &Backends,
    options: &ExtractionOptions,
) -> Result<ExtractedVideo> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.concurrency.max(1))
        .build()
        .expect("thread pool");

    let (transcript, signals) = std::thread::scope(|scope| {
        let asr = scope.spawn(|| transcribe(media, backends.asr.as_ref()));
        let signals: Result<Vec<ShotSignals>> = pool.install(|| {
            keyframes
                .par_iter()
                .map(|k| extract_shot(k, backends, options))
                .collect()
        });
        let transcript = asr.join().expect("transcription thread panicked");
        (transcript, signals)
    });
    let transcript = transcript?;
    let mut ocr_by_shot = BTreeMap::new();
    let mut captions_by_shot = BTreeMap::new();
    for s in signals? {
        ocr_by_shot.insert(s.shot_number, s.ocr);
        captions_by_shot.insert(s.shot_number, s.caption);
    }
    let records = assemble_shot_records(shots, &transcript, &ocr_by_shot, &captions_by_shot)?;
    Ok(ExtractedVideo {
        transcript,
        ocr_by_shot,
        captions_by_shot,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backends::stub::{FixedScores, ScriptedCaptioner};
    use image::RgbImage;

    fn span(text: &str, confidence: f64) -> OcrSpan {
        OcrSpan {
            text: text.into(),
            confidence,
            shot_number: 1,
        }
    }

    fn texts(spans: &[OcrSpan]) -> Vec<&str> {
        spans.iter().map(|s| s.text.as_str()).collect()
    }

    fn keyframe() -> Keyframe {
        Keyframe {
            shot_number: 1,
            frame_index: 0,
            image: RgbImage::new(2, 2),
        }
    }

    #[test]
    fn ocr_threshold_drops_background_text() {
        let spans = [span("3 cups quinoa", 0.98), span("street sign", 0.80)];
        let kept = filter_ocr(&spans, MIN_OCR_CONFIDENCE, &default_watermarks());
        assert_eq!(texts(&kept), ["3 cups quinoa"]);
    }

    #[test]
    fn ocr_watermarks_removed() {
        let spans = [span("TikTok", 0.99), span("@nourished.by.mads", 0.99)];
        assert!(filter_ocr(&spans, MIN_OCR_CONFIDENCE, &default_watermarks()).is_empty());
        assert!(filter_ocr(&[], MIN_OCR_CONFIDENCE, &default_watermarks()).is_empty());
    }

    #[test]
    fn lone_at_sign_is_not_a_username() {
        let spans = [span("meet me @ noon", 0.99)];
        assert_eq!(filter_ocr(&spans, 0.95, &default_watermarks()).len(), 1);
    }

    #[test]
    fn captions_count_contract() {
        let params = CaptionParams::default();
        let five = ScriptedCaptioner::new(vec![
            "a".into(),
            "b".into(),
            "c".into(),
            "d".into(),
            "e".into(),
        ]);
        let c = caption_candidates(&keyframe(), &params, &five).unwrap();
        assert_eq!(
            c.iter().map(|c| c.rank).collect::<Vec<_>>(),
            [0, 1, 2, 3, 4]
        );
        assert!(c.iter().all(|c| c.similarity.is_none()));

        let three = ScriptedCaptioner::new(vec!["a".into(), "b".into(), "c".into()]);
        assert!(matches!(
            caption_candidates(&keyframe(), &params, &three),
            Err(ExtractionError::Backend(BackendError::Malformed {
                role: BackendRole::Caption,
                ..
            }))
        ));
    }

    #[test]
    fn caption_params_forwarded() {
        let cap = ScriptedCaptioner::new(vec!["x".into(); 5]);
        caption_candidates(&keyframe(), &CaptionParams::default(), &cap).unwrap();
        let seen = cap.last_params().unwrap();
        assert_eq!(seen.top_p, 0.9);
        assert_eq!(seen.temperature, 1.0);
        assert_eq!((seen.min_words, seen.max_words), (5, 20));
        assert_eq!(seen.sampling, Sampling::Nucleus);
    }

    fn cands(n: usize) -> Vec<CaptionCandidate> {
        (0..n)
            .map(|rank| CaptionCandidate {
                text: format!("caption {rank}"),
                similarity: None,
                rank,
            })
            .collect()
    }

    #[test]
    fn select_argmax() {
        let emb = FixedScores(vec![0.1, 0.9, 0.3, 0.2, 0.4]);
        let best = select_caption(&keyframe(), &cands(5), &emb).unwrap();
        assert_eq!(best.rank, 1);
        assert_eq!(best.similarity, Some(0.9));
    }

    #[test]
    fn select_tie_goes_to_rank_zero() {
        let emb = FixedScores(vec![0.5; 5]);
        assert_eq!(
            select_caption(&keyframe(), &cands(5), &emb).unwrap().rank,
            0
        );
    }

    #[test]
    fn select_requires_candidates() {
        let emb = FixedScores(vec![]);
        assert!(matches!(
            select_caption(&keyframe(), &[], &emb),
            Err(ExtractionError::NoCandidates(1))
        ));
    }

    fn shot(n: u32, start: f64, end: f64) -> Shot {
        Shot {
            shot_number: n,
            start_frame: 0,
            end_frame: 0,
            start_s: start,
            end_s: end,
            duration_s: end - start,
        }
    }

    fn caption_map(n: u32) -> BTreeMap<u32, CaptionCandidate> {
        (1..=n)
            .map(|i| {
                (
                    i,
                    CaptionCandidate {
                        text: format!("cap {i}"),
                        similarity: Some(1.0),
                        rank: 0,
                    },
                )
            })
            .collect()
    }

    #[test]
    fn boundary_segment_goes_to_both_shots() {
        let shots = [shot(1, 0.0, 2.0), shot(2, 2.0, 5.0)];
        let tr = [TranscriptSegment {
            start_s: 0.0,
            end_s: 3.0,
            text: "hello".into(),
        }];
        let recs = assemble_shot_records(&shots, &tr, &BTreeMap::new(), &caption_map(2)).unwrap();
        assert_eq!(recs[0].transcript_text, "hello");
        assert_eq!(recs[1].transcript_text, "hello");
    }

    #[test]
    fn empty_fields_and_cardinality() {
        let shots = [shot(1, 0.0, 1.0), shot(2, 1.0, 2.0), shot(3, 2.0, 3.0)];
        let recs = assemble_shot_records(&shots, &[], &BTreeMap::new(), &caption_map(3)).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(
            recs.iter().map(|r| r.shot_number).collect::<Vec<_>>(),
            [1, 2, 3]
        );
        assert_eq!(recs[0].on_screen_text, "");
        assert_eq!(recs[0].transcript_text, "");
    }

    #[test]
    fn missing_caption() {
        let shots = [shot(1, 0.0, 1.0), shot(2, 1.0, 2.0)];
        assert!(matches!(
            assemble_shot_records(&shots, &[], &BTreeMap::new(), &caption_map(1)),
            Err(ExtractionError::MissingCaption(2))
        ));
    }

    #[test]
    fn transcript_validation() {
        let ok = [
            TranscriptSegment {
                start_s: 0.0,
                end_s: 1.0,
                text: "a".into(),
            },
            TranscriptSegment {
                start_s: 1.0,
                end_s: 2.0,
                text: "b".into(),
            },
        ];
        assert!(validate_transcript(&ok).is_ok());
        let overlapping = [ok[1].clone(), ok[0].clone()];
        assert!(validate_transcript(&overlapping).is_err());
        let empty_interval = [TranscriptSegment {
            start_s: 1.0,
            end_s: 1.0,
            text: "a".into(),
        }];
        assert!(validate_transcript(&empty_interval).is_err());
    }
}
