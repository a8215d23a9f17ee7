//! Frame ingestion, shot boundary detection and keyframe selection.
//!
//! Frames arrive through a raw-frame byte stream: a single text header line
//! `W H FPS\n`, then for every frame a `W*H` grayscale plane followed by a
//! `W*H*3` RGB24 plane. Files that already carry this layout are read
//! directly; anything else is piped through an external decoder command that
//! emits the same layout on stdout.
//!
//! Shots are found with a single pass over the luma planes. A cut is placed
//! before frame `i` whenever the normalized mean absolute luma difference
//! between frames `i-1` and `i` reaches the threshold.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};

use image::RgbImage;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default cut threshold for [`detect_shots`].
pub const DEFAULT_SCENE_THRESHOLD: f64 = 0.4;

/// Environment variable naming the external decoder command.
pub const DECODER_ENV: &str = "SS_DECODER_CMD";

#[derive(Debug, Error)]
pub enum MediaError {
    #[error("undecodable media {path}: {reason}")]
    UndecodableMedia { path: PathBuf, reason: String },
    #[error("video contains no frames")]
    EmptyVideo,
    #[error("frame dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("scene threshold must lie in (0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("frame {index} is outside shot {shot_number} or was not supplied")]
    FrameOutOfRange { shot_number: u32, index: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, MediaError>;

/// Per-frame data used for shot detection.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMeta {
    /// 0-based ordinal within the (possibly decimated) stream.
    pub index: usize,
    /// Seconds from video start.
    pub timestamp: f64,
    /// Display duration of this frame in seconds.
    pub duration: f64,
    pub width: u32,
    pub height: u32,
    /// 8-bit grayscale plane, row-major, `width * height` bytes.
    pub luma: Vec<u8>,
}

impl FrameMeta {
    pub fn new(
        index: usize,
        timestamp: f64,
        duration: f64,
        width: u32,
        height: u32,
        luma: Vec<u8>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(MediaError::InvalidFrame("zero-sized frame".into()));
        }
        if luma.len() != width as usize * height as usize {
            return Err(MediaError::InvalidFrame(format!(
                "luma plane has {} bytes, expected {}",
                luma.len(),
                width as usize * height as usize
            )));
        }
        if !(timestamp.is_finite() && timestamp >= 0.0) || !(duration.is_finite() && duration > 0.0)
        {
            return Err(MediaError::InvalidFrame(format!(
                "bad timing t={timestamp} d={duration}"
            )));
        }
        Ok(Self {
            index,
            timestamp,
            duration,
            width,
            height,
            luma,
        })
    }
}

/// A decoded frame: luma for detection plus the RGB payload for keyframes.
#[derive(Debug, Clone)]
pub struct DecodedFrame {
    pub meta: FrameMeta,
    pub rgb: RgbImage,
}

/// A contiguous run of frames; the unit of description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shot {
    pub shot_number: u32,
    pub start_frame: usize,
    pub end_frame: usize,
    pub start_s: f64,
    pub end_s: f64,
    pub duration_s: f64,
}

impl Shot {
    pub fn frame_count(&self) -> usize {
        self.end_frame - self.start_frame + 1
    }
}

#[derive(Debug, Clone)]
pub struct Keyframe {
    pub shot_number: u32,
    pub frame_index: usize,
    pub image: RgbImage,
}

/// Temporal sampling applied while decoding.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleRate {
    #[default]
    Native,
    Fps(f64),
}

impl std::str::FromStr for SampleRate {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("native") {
            return Ok(SampleRate::Native);
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => Ok(SampleRate::Fps(v)),
            _ => Err(format!("expected \"native\" or a positive fps, got {s:?}")),
        }
    }
}

/// Header of the raw-frame stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamHeader {
    pub width: u32,
    pub height: u32,
    pub fps: f64,
}

impl StreamHeader {
    fn parse(line: &str) -> Option<Self> {
        let mut parts = line.split_ascii_whitespace();
        let width = parts.next()?.parse::<u32>().ok()?;
        let height = parts.next()?.parse::<u32>().ok()?;
        let fps = parts.next()?.parse::<f64>().ok()?;
        if parts.next().is_some() || width == 0 || height == 0 || !(fps.is_finite() && fps > 0.0) {
            return None;
        }
        Some(Self { width, height, fps })
    }

    fn luma_len(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

type RawFrame = (usize, Vec<u8>, Vec<u8>);

/// Reads frames in the raw-frame layout from any byte source.
pub struct RawFrameReader<R> {
    reader: R,
    header: StreamHeader,
    source: PathBuf,
    next_index: usize,
}

impl<R: BufRead> RawFrameReader<R> {
    pub fn new(mut reader: R, source: impl Into<PathBuf>) -> Result<Self> {
        let source = source.into();
        let mut line = Vec::new();
        // bounded read so binary garbage does not get slurped whole
        (&mut reader).take(128).read_until(b'\n', &mut line)?;
        let header = std::str::from_utf8(&line)
            .ok()
            .filter(|l| l.ends_with('\n'))
            .and_then(|l| StreamHeader::parse(l.trim_end()))
            .ok_or_else(|| MediaError::UndecodableMedia {
                path: source.clone(),
                reason: "missing or malformed `W H FPS` header".into(),
            })?;
        Ok(Self {
            reader,
            header,
            source,
            next_index: 0,
        })
    }

    pub fn header(&self) -> StreamHeader {
        self.header
    }

    /// Next frame as (source index, luma plane, RGB plane).
    fn read_frame(&mut self) -> Result<Option<RawFrame>> {
        let n = self.header.luma_len();
        let mut luma = vec![0u8; n];
        let got = read_fully(&mut self.reader, &mut luma)?;
        if got == 0 {
            return Ok(None);
        }
        let mut rgb = vec![0u8; n * 3];
        if got < n || read_fully(&mut self.reader, &mut rgb)? < n * 3 {
            return Err(MediaError::UndecodableMedia {
                path: self.source.clone(),
                reason: format!("truncated frame {}", self.next_index),
            });
        }
        let index = self.next_index;
        self.next_index += 1;
        Ok(Some((index, luma, rgb)))
    }
}

fn read_fully<R: Read>(reader: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(k) => filled += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

/// Writes frames in the raw-frame layout. Used to produce synthetic clips and
/// by decoder shims.
pub struct RawFrameWriter<W: Write> {
    writer: W,
    header: StreamHeader,
}

impl<W: Write> RawFrameWriter<W> {
    pub fn new(mut writer: W, width: u32, height: u32, fps: f64) -> Result<Self> {
        if width == 0 || height == 0 || !(fps.is_finite() && fps > 0.0) {
            return Err(MediaError::InvalidFrame(format!(
                "bad stream geometry {width}x{height}@{fps}"
            )));
        }
        writeln!(writer, "{width} {height} {fps}")?;
        Ok(Self {
            writer,
            header: StreamHeader { width, height, fps },
        })
    }

    /// Writes one frame; luma is derived from the RGB plane (BT.601).
    pub fn write_rgb(&mut self, rgb: &[u8]) -> Result<()> {
        let n = self.header.luma_len();
        if rgb.len() != n * 3 {
            return Err(MediaError::InvalidFrame(format!(
                "rgb plane has {} bytes, expected {}",
                rgb.len(),
                n * 3
            )));
        }
        let luma: Vec<u8> = rgb
            .chunks_exact(3)
            .map(|p| rgb_to_luma(p[0], p[1], p[2]))
            .collect();
        self.writer.write_all(&luma)?;
        self.writer.write_all(rgb)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.writer.flush()?;
        Ok(self.writer)
    }
}

pub fn rgb_to_luma(r: u8, g: u8, b: u8) -> u8 {
    let y = 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
    y.round().clamp(0.0, 255.0) as u8
}

/// How non-raw containers are turned into a raw-frame stream.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecoderConfig {
    /// Command line with an `{input}` placeholder, e.g. `ss-decode {input}`.
    /// The command must write the raw-frame layout to stdout.
    pub command: Option<String>,
}

impl DecoderConfig {
    pub fn from_env() -> Self {
        Self {
            command: std::env::var(DECODER_ENV)
                .ok()
                .filter(|s| !s.trim().is_empty()),
        }
    }
}

enum Source {
    File(BufReader<File>),
    Process(BufReader<std::process::ChildStdout>, Child),
}

impl Read for Source {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        match self {
            Source::File(r) => r.read(buf),
            Source::Process(r, _) => r.read(buf),
        }
    }
}

impl BufRead for Source {
    fn fill_buf(&mut self) -> io::Result<&[u8]> {
        match self {
            Source::File(r) => r.fill_buf(),
            Source::Process(r, _) => r.fill_buf(),
        }
    }

    fn consume(&mut self, amt: usize) {
        match self {
            Source::File(r) => r.consume(amt),
            Source::Process(r, _) => r.consume(amt),
        }
    }
}

impl Drop for Source {
    fn drop(&mut self) {
        if let Source::Process(_, child) = self {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

/// Iterator over decoded frames in presentation order.
pub struct FrameStream {
    reader: RawFrameReader<Source>,
    sample: SampleRate,
    emitted: usize,
    last_slot: Option<i64>,
    peeked: Option<DecodedFrame>,
}

impl FrameStream {
    pub fn header(&self) -> StreamHeader {
        self.reader.header
    }

    /// Effective frame rate after sampling.
    pub fn effective_fps(&self) -> f64 {
        match self.sample {
            SampleRate::Fps(f) if f < self.reader.header.fps => f,
            _ => self.reader.header.fps,
        }
    }

    fn next_frame(&mut self) -> Result<Option<DecodedFrame>> {
        if let Some(f) = self.peeked.take() {
            return Ok(Some(f));
        }
        let header = self.reader.header;
        let frame_duration = 1.0 / self.effective_fps();
        loop {
            let Some((src_index, luma, rgb)) = self.reader.read_frame()? else {
                return Ok(None);
            };
            if let SampleRate::Fps(target) = self.sample {
                if target < header.fps {
                    // keep the first source frame of every output slot
                    let slot = (src_index as f64 * target / header.fps + 1e-9).floor() as i64;
                    if self.last_slot == Some(slot) {
                        continue;
                    }
                    self.last_slot = Some(slot);
                }
            }
            let timestamp = src_index as f64 / header.fps;
            let meta = FrameMeta::new(
                self.emitted,
                timestamp,
                frame_duration,
                header.width,
                header.height,
                luma,
            )?;
            let rgb = RgbImage::from_raw(header.width, header.height, rgb).ok_or_else(|| {
                MediaError::InvalidFrame("rgb plane does not match dimensions".into())
            })?;
            self.emitted += 1;
            return Ok(Some(DecodedFrame { meta, rgb }));
        }
    }
}

impl Iterator for FrameStream {
    type Item = Result<DecodedFrame>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_frame().transpose()
    }
}

/// Opens `path` and yields its frames, using the decoder from the environment
/// for non-raw containers.
pub fn decode_frames(path: &Path, sample: SampleRate) -> Result<FrameStream> {
    decode_frames_with(path, sample, &DecoderConfig::from_env())
}

pub fn decode_frames_with(
    path: &Path,
    sample: SampleRate,
    decoder: &DecoderConfig,
) -> Result<FrameStream> {
    if let SampleRate::Fps(f) = sample {
        if !(f.is_finite() && f > 0.0) {
            return Err(MediaError::InvalidFrame(format!("bad sample rate {f}")));
        }
    }
    let undecodable = |reason: String| MediaError::UndecodableMedia {
        path: path.to_path_buf(),
        reason,
    };
    let file = File::open(path).map_err(|e| undecodable(e.to_string()))?;
    if file.metadata()?.len() == 0 {
        return Err(undecodable("empty file".into()));
    }
    let reader = match RawFrameReader::new(Source::File(BufReader::new(file)), path) {
        Ok(r) => r,
        Err(MediaError::UndecodableMedia { .. }) if decoder.command.is_some() => {
            let cmd = decoder.command.as_deref().unwrap_or_default();
            let source = spawn_decoder(cmd, path)?;
            RawFrameReader::new(source, path)?
        }
        Err(e) => return Err(e),
    };
    let mut stream = FrameStream {
        reader,
        sample,
        emitted: 0,
        last_slot: None,
        peeked: None,
    };
    match stream.next_frame()? {
        Some(first) => stream.peeked = Some(first),
        None => return Err(MediaError::EmptyVideo),
    }
    Ok(stream)
}

fn spawn_decoder(command: &str, input: &Path) -> Result<Source> {
    let mut parts = command.split_whitespace();
    let program = parts.next().ok_or_else(|| MediaError::UndecodableMedia {
        path: input.to_path_buf(),
        reason: "empty decoder command".into(),
    })?;
    let input_str = input.to_string_lossy();
    let args: Vec<String> = parts.map(|a| a.replace("{input}", &input_str)).collect();
    let mut child = Command::new(program)
        .args(&args)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| MediaError::UndecodableMedia {
            path: input.to_path_buf(),
            reason: format!("cannot start decoder {program}: {e}"),
        })?;
    let stdout = child.stdout.take().expect("stdout is piped");
    Ok(Source::Process(BufReader::new(stdout), child))
}

/// Mean absolute luma difference of two frames, normalized to [0, 1].
pub fn luma_delta(prev: &FrameMeta, curr: &FrameMeta) -> Result<f64> {
    if prev.width != curr.width || prev.height != curr.height || prev.luma.len() != curr.luma.len()
    {
        return Err(MediaError::DimensionMismatch(
            prev.width,
            prev.height,
            curr.width,
            curr.height,
        ));
    }
    let sum: u64 = prev
        .luma
        .iter()
        .zip(&curr.luma)
        .map(|(&a, &b)| u64::from(a.abs_diff(b)))
        .sum();
    Ok(sum as f64 / (prev.luma.len() as f64 * 255.0))
}

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.0 && threshold <= 1.0 {
        Ok(())
    } else {
        Err(MediaError::InvalidThreshold(threshold))
    }
}

/// Incremental shot detector. Feed frames in order with [`push`](Self::push);
/// each closed shot is returned as soon as the next cut is seen.
#[derive(Debug)]
pub struct ShotDetector {
    threshold: f64,
    prev: Option<FrameMeta>,
    start: Option<(usize, f64)>,
    next_shot: u32,
}

impl ShotDetector {
    pub fn new(threshold: f64) -> Result<Self> {
        check_threshold(threshold)?;
        Ok(Self {
            threshold,
            prev: None,
            start: None,
            next_shot: 1,
        })
    }

    pub fn push(&mut self, frame: &FrameMeta) -> Result<Option<Shot>> {
        let Some(prev) = self.prev.as_ref() else {
            if frame.index != 0 {
                return Err(MediaError::InvalidFrame(format!(
                    "stream must start at frame 0, got {}",
                    frame.index
                )));
            }
            self.start = Some((0, frame.timestamp));
            self.prev = Some(frame.clone());
            return Ok(None);
        };
        if frame.index != prev.index + 1 || frame.timestamp <= prev.timestamp {
            return Err(MediaError::InvalidFrame(format!(
                "frame {} (t={}) does not follow frame {} (t={})",
                frame.index, frame.timestamp, prev.index, prev.timestamp
            )));
        }
        let delta = luma_delta(prev, frame)?;
        let closed = if delta >= self.threshold {
            let shot = self.close(prev.index, frame.timestamp);
            self.start = Some((frame.index, frame.timestamp));
            Some(shot)
        } else {
            None
        };
        self.prev = Some(frame.clone());
        Ok(closed)
    }

    fn close(&mut self, end_frame: usize, end_s: f64) -> Shot {
        let (start_frame, start_s) = self.start.expect("shot start recorded");
        let shot = Shot {
            shot_number: self.next_shot,
            start_frame,
            end_frame,
            start_s,
            end_s,
            duration_s: end_s - start_s,
        };
        self.next_shot += 1;
        shot
    }

    /// Closes the final shot.
    pub fn finish(mut self) -> Result<Shot> {
        let prev = self.prev.take().ok_or(MediaError::EmptyVideo)?;
        Ok(self.close(prev.index, prev.timestamp + prev.duration))
    }
}

/// Splits a frame sequence into shots at luminance cuts.
pub fn detect_shots<'a, I>(frames: I, threshold: f64) -> Result<Vec<Shot>>
where
    I: IntoIterator<Item = &'a FrameMeta>,
{
    let mut detector = ShotDetector::new(threshold)?;
    let mut shots = Vec::new();
    for frame in frames {
        shots.extend(detector.push(frame)?);
    }
    shots.push(detector.finish()?);
    Ok(shots)
}

/// Index of the representative frame of a shot: the ceil(n/2)-th frame,
/// counting from 1 within the shot.
pub fn keyframe_index(shot: &Shot) -> usize {
    let n = shot.frame_count();
    shot.start_frame + n.div_ceil(2) - 1
}

/// Picks the middle frame of `shot`. `frames` is indexed by stream ordinal.
pub fn select_keyframe(shot: &Shot, frames: &[DecodedFrame]) -> Result<Keyframe> {
    let index = keyframe_index(shot);
    let frame =
        frames
            .get(index)
            .filter(|f| f.meta.index == index)
            .ok_or(MediaError::FrameOutOfRange {
                shot_number: shot.shot_number,
                index,
            })?;
    Ok(Keyframe {
        shot_number: shot.shot_number,
        frame_index: index,
        image: frame.rgb.clone(),
    })
}

/// Shots plus their keyframes for one video.
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub shots: Vec<Shot>,
    pub keyframes: Vec<Keyframe>,
    pub header: StreamHeader,
    pub frame_count: usize,
}

/// Streams a video once, detecting shots and keeping only the frames of the
/// shot in progress so the middle frame can be picked when it closes.
pub fn segment_video(
    path: &Path,
    sample: SampleRate,
    threshold: f64,
    decoder: &DecoderConfig,
) -> Result<Segmentation> {
    let stream = decode_frames_with(path, sample, decoder)?;
    let header = stream.header();
    let mut detector = ShotDetector::new(threshold)?;
    let mut pending: Vec<DecodedFrame> = Vec::new();
    let mut shots = Vec::new();
    let mut keyframes = Vec::new();
    let mut frame_count = 0;

    let take_keyframe = |shot: &Shot, pending: &mut Vec<DecodedFrame>| -> Result<Keyframe> {
        let index = keyframe_index(shot);
        let offset = pending.iter().position(|f| f.meta.index == index).ok_or(
            MediaError::FrameOutOfRange {
                shot_number: shot.shot_number,
                index,
            },
        )?;
        let frame = pending.swap_remove(offset);
        pending.retain(|f| f.meta.index > shot.end_frame);
        Ok(Keyframe {
            shot_number: shot.shot_number,
            frame_index: index,
            image: frame.rgb,
        })
    };

    for frame in stream {
        let frame = frame?;
        frame_count += 1;
        let closed = detector.push(&frame.meta)?;
        pending.push(frame);
        if let Some(shot) = closed {
            keyframes.push(take_keyframe(&shot, &mut pending)?);
            shots.push(shot);
        }
    }
    let last = detector.finish()?;
    keyframes.push(take_keyframe(&last, &mut pending)?);
    shots.push(last);
    Ok(Segmentation {
        shots,
        keyframes,
        header,
        frame_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(index: usize, value: u8) -> FrameMeta {
        FrameMeta::new(
            index,
            index as f64 / 30.0,
            1.0 / 30.0,
            4,
            4,
            vec![value; 16],
        )
        .unwrap()
    }

    fn frames(values: &[u8]) -> Vec<FrameMeta> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| frame(i, v))
            .collect()
    }

    #[test]
    fn delta_extremes() {
        assert_eq!(luma_delta(&frame(0, 9), &frame(1, 9)).unwrap(), 0.0);
        assert_eq!(luma_delta(&frame(0, 0), &frame(1, 255)).unwrap(), 1.0);
    }

    #[test]
    fn delta_half_flipped() {
        let a = frame(0, 0);
        let mut b = frame(1, 0);
        for px in b.luma.iter_mut().step_by(2) {
            *px = 255;
        }
        assert_eq!(luma_delta(&a, &b).unwrap(), 0.5);
    }

    #[test]
    fn delta_dimension_mismatch() {
        let a = frame(0, 0);
        let b = FrameMeta::new(1, 0.1, 0.1, 2, 8, vec![0; 16]).unwrap();
        assert!(matches!(
            luma_delta(&a, &b),
            Err(MediaError::DimensionMismatch(..))
        ));
    }

    #[test]
    fn constant_video_is_one_shot() {
        let shots = detect_shots(&frames(&[0; 90]), 0.4).unwrap();
        assert_eq!(shots.len(), 1);
        assert_eq!((shots[0].start_frame, shots[0].end_frame), (0, 89));
        assert!((shots[0].duration_s - 3.0).abs() < 1e-9);
    }

    #[test]
    fn black_then_white() {
        let mut v = vec![0u8; 30];
        v.extend([255u8; 30]);
        let shots = detect_shots(&frames(&v), 0.4).unwrap();
        let bounds: Vec<_> = shots.iter().map(|s| (s.start_frame, s.end_frame)).collect();
        assert_eq!(bounds, vec![(0, 29), (30, 59)]);
        assert_eq!(shots[1].shot_number, 2);
        assert!((shots[0].end_s - 1.0).abs() < 1e-9);
        assert_eq!(shots[0].end_s, shots[1].start_s);
    }

    #[test]
    fn alternating_frames_each_a_shot() {
        let v: Vec<u8> = (0..12).map(|i| if i % 2 == 0 { 0 } else { 255 }).collect();
        let shots = detect_shots(&frames(&v), 0.4).unwrap();
        assert_eq!(shots.len(), 12);
        assert!(shots.iter().all(|s| s.start_frame == s.end_frame));
    }

    #[test]
    fn empty_and_bad_threshold() {
        assert!(matches!(
            detect_shots(&[], 0.4),
            Err(MediaError::EmptyVideo)
        ));
        assert!(matches!(
            detect_shots(&frames(&[0]), 0.0),
            Err(MediaError::InvalidThreshold(_))
        ));
        assert!(matches!(
            detect_shots(&frames(&[0]), 1.5),
            Err(MediaError::InvalidThreshold(_))
        ));
    }

    #[test]
    fn out_of_order_frames_rejected() {
        let f = vec![frame(0, 0), frame(2, 0)];
        assert!(matches!(
            detect_shots(&f, 0.4),
            Err(MediaError::InvalidFrame(_))
        ));
    }

    fn shot(start: usize, n: usize) -> Shot {
        Shot {
            shot_number: 1,
            start_frame: start,
            end_frame: start + n - 1,
            start_s: 0.0,
            end_s: 1.0,
            duration_s: 1.0,
        }
    }

    #[test]
    fn keyframe_rule() {
        assert_eq!(keyframe_index(&shot(0, 30)), 14);
        assert_eq!(keyframe_index(&shot(7, 1)), 7);
        assert_eq!(keyframe_index(&shot(10, 31)), 25);
    }

    #[test]
    fn select_keyframe_needs_frames() {
        let decoded: Vec<DecodedFrame> = (0..5)
            .map(|i| DecodedFrame {
                meta: frame(i, i as u8),
                rgb: RgbImage::from_pixel(4, 4, image::Rgb([i as u8, 0, 0])),
            })
            .collect();
        let k = select_keyframe(&shot(1, 4), &decoded).unwrap();
        assert_eq!(k.frame_index, 2);
        assert_eq!(k.image.get_pixel(0, 0).0[0], 2);
        assert!(matches!(
            select_keyframe(&shot(3, 10), &decoded),
            Err(MediaError::FrameOutOfRange { .. })
        ));
    }

    #[test]
    fn header_parsing() {
        assert_eq!(
            StreamHeader::parse("640 360 29.97"),
            Some(StreamHeader {
                width: 640,
                height: 360,
                fps: 29.97
            })
        );
        assert_eq!(StreamHeader::parse("640 360"), None);
        assert_eq!(StreamHeader::parse("0 360 30"), None);
        assert_eq!(StreamHeader::parse("640 360 30 1"), None);
    }

    #[test]
    fn sample_rate_parse() {
        assert_eq!("native".parse::<SampleRate>().unwrap(), SampleRate::Native);
        assert_eq!("10".parse::<SampleRate>().unwrap(), SampleRate::Fps(10.0));
        assert!("-1".parse::<SampleRate>().is_err());
    }
}
