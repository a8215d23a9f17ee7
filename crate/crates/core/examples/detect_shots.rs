//! Writes a three-shot clip in the raw frame format and segments it.
//!
//! Pass a path to segment your own file instead. Files that are not in the
//! raw layout go through the command in `SS_DECODER_CMD`.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use shortscribe::media::{
    segment_video, DecoderConfig, RawFrameWriter, SampleRate, DEFAULT_SCENE_THRESHOLD,
};

fn synthetic_clip(path: &PathBuf) -> Result<(), Box<dyn std::error::Error>> {
    let (w, h) = (32u32, 18u32);
    let mut writer = RawFrameWriter::new(BufWriter::new(File::create(path)?), w, h, 30.0)?;
    for (frames, rgb) in [
        (30, [240u8, 240, 240]),
        (45, [20, 90, 20]),
        (24, [250, 240, 120]),
    ] {
        let frame: Vec<u8> = rgb
            .iter()
            .copied()
            .cycle()
            .take((w * h * 3) as usize)
            .collect();
        for _ in 0..frames {
            writer.write_rgb(&frame)?;
        }
    }
    writer.finish()?;
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tmp = tempfile::tempdir()?;
    let path = match std::env::args().nth(1) {
        Some(p) => PathBuf::from(p),
        None => {
            let p = tmp.path().join("demo.ssraw");
            synthetic_clip(&p)?;
            p
        }
    };
    let seg = segment_video(
        &path,
        SampleRate::Native,
        DEFAULT_SCENE_THRESHOLD,
        &DecoderConfig::from_env(),
    )?;
    println!("{} frames at {} fps", seg.frame_count, seg.header.fps);
    for (shot, key) in seg.shots.iter().zip(&seg.keyframes) {
        println!(
            "shot {:>2}: frames {:>4}..={:<4} {:>6.2}s..{:>6.2}s  keyframe {}",
            shot.shot_number,
            shot.start_frame,
            shot.end_frame,
            shot.start_s,
            shot.end_s,
            key.frame_index
        );
    }
    Ok(())
}
