//! Runs the full pipeline on one clip with the deterministic stub backends
//! and prints the resulting description set.
//!
//! Set `--live` with a config file path to use HTTP backends instead:
//! `cargo run --example describe_video -- clip.mp4 --live shortscribe.toml`.

use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use shortscribe::config::PipelineConfig;
use shortscribe::media::RawFrameWriter;
use shortscribe::pipeline::{BackendMode, Pipeline};

fn demo_clip(path: &PathBuf) -> Result<(), Box<dyn std::error::Error>> {
    let mut writer = RawFrameWriter::new(BufWriter::new(File::create(path)?), 16, 12, 30.0)?;
    for (frames, rgb) in [
        (30, [230u8, 230, 230]),
        (24, [20, 120, 20]),
        (36, [240, 240, 60]),
    ] {
        let frame: Vec<u8> = rgb.iter().copied().cycle().take(16 * 12 * 3).collect();
        for _ in 0..frames {
            writer.write_rgb(&frame)?;
        }
    }
    writer.finish()?;
    let mut sidecar = path.as_os_str().to_owned();
    sidecar.push(".transcript.json");
    std::fs::write(
        PathBuf::from(sidecar),
        r#"[{"start_s":0.0,"end_s":1.5,"text":"so this is the salad everyone is talking about"}]"#,
    )?;
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let tmp = tempfile::tempdir()?;
    let (media, mode, cfg) = match args.as_slice() {
        [clip, flag, cfg] if flag == "--live" => (
            PathBuf::from(clip),
            BackendMode::Live,
            PipelineConfig::load(Some(cfg.as_ref()))?,
        ),
        [clip] => (
            PathBuf::from(clip),
            BackendMode::Stub,
            PipelineConfig::default(),
        ),
        _ => {
            let p = tmp.path().join("salad.ssraw");
            demo_clip(&p)?;
            (p, BackendMode::Stub, PipelineConfig::default())
        }
    };
    let pipeline = Pipeline::from_config(&cfg, mode)?;
    let described = pipeline.describe_video(&media)?;
    for t in &described.timings {
        eprintln!("{} {:.1} ms", t.stage, t.millis);
    }
    println!("{}", serde_json::to_string_pretty(&described.set)?);
    Ok(())
}
