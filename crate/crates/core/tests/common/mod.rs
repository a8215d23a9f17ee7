#![allow(dead_code)]

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::Rng;
use shortscribe::media::RawFrameWriter;
use shortscribe::ShotRecord;

/// One shot of a synthetic clip: frame count and base RGB color.
#[derive(Debug, Clone, Copy)]
pub struct Segment {
    pub frames: usize,
    pub rgb: [u8; 3],
}

pub fn solid(w: u32, h: u32, rgb: [u8; 3]) -> Vec<u8> {
    rgb.iter()
        .copied()
        .cycle()
        .take((w * h * 3) as usize)
        .collect()
}

pub fn write_segments(path: &Path, w: u32, h: u32, fps: f64, segments: &[Segment]) {
    let file = BufWriter::new(File::create(path).unwrap());
    let mut writer = RawFrameWriter::new(file, w, h, fps).unwrap();
    for s in segments {
        let frame = solid(w, h, s.rgb);
        for _ in 0..s.frames {
            writer.write_rgb(&frame).unwrap();
        }
    }
    writer.finish().unwrap();
}

/// A clip with `cuts` planted hard cuts. Shots alternate between dark and
/// bright gray levels at least 120 apart; every frame gets per-pixel noise
/// of at most 3 levels so within-shot deltas stay far below 0.4.
/// Returns the RGB frames and the start index of every shot.
pub fn planted_frames<R: Rng>(
    rng: &mut R,
    w: u32,
    h: u32,
    cuts: usize,
) -> (Vec<Vec<u8>>, Vec<usize>) {
    let mut frames = Vec::new();
    let mut starts = Vec::new();
    let mut bright = rng.gen_bool(0.5);
    for _ in 0..=cuts {
        starts.push(frames.len());
        let level: u8 = if bright {
            rng.gen_range(190..=245)
        } else {
            rng.gen_range(10..=60)
        };
        let len = rng.gen_range(1..=40);
        for _ in 0..len {
            let frame: Vec<u8> = (0..w * h)
                .flat_map(|_| {
                    let v = level.saturating_add(rng.gen_range(0..=3));
                    [v, v, v]
                })
                .collect();
            frames.push(frame);
        }
        bright = !bright;
    }
    (frames, starts)
}

pub fn write_frames(path: &Path, w: u32, h: u32, fps: f64, frames: &[Vec<u8>]) {
    let file = BufWriter::new(File::create(path).unwrap());
    let mut writer = RawFrameWriter::new(file, w, h, fps).unwrap();
    for f in frames {
        writer.write_rgb(f).unwrap();
    }
    writer.finish().unwrap();
}

pub const METADATA_HEADER: &str =
    "file,username,author_caption,audio_title,likes,comments,bookmarks,shares";

/// Three short clips with transcript sidecars and a metadata CSV.
pub struct Corpus {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
    pub metadata: PathBuf,
}

pub fn make_corpus(root: &Path) -> Corpus {
    let dir = root.join("videos");
    std::fs::create_dir_all(&dir).unwrap();
    let specs: [(&str, Vec<Segment>, &str); 3] = [
        (
            "salad.ssraw",
            vec![
                Segment {
                    frames: 30,
                    rgb: [230, 230, 230],
                },
                Segment {
                    frames: 24,
                    rgb: [20, 120, 20],
                },
                Segment {
                    frames: 36,
                    rgb: [240, 240, 60],
                },
            ],
            r#"[{"start_s":0.0,"end_s":1.5,"text":"so this is the salad everyone is talking about"},{"start_s":1.5,"end_s":2.6,"text":"add cucumbers and quinoa"}]"#,
        ),
        (
            "dance.ssraw",
            vec![
                Segment {
                    frames: 20,
                    rgb: [20, 20, 200],
                },
                Segment {
                    frames: 20,
                    rgb: [240, 200, 220],
                },
            ],
            r#"[{"start_s":0.2,"end_s":1.2,"text":"watch this move"}]"#,
        ),
        (
            "single.ssraw",
            vec![Segment {
                frames: 15,
                rgb: [200, 30, 30],
            }],
            "",
        ),
    ];
    let mut files = Vec::new();
    let mut csv = String::from(METADATA_HEADER);
    csv.push('\n');
    for (i, (name, segments, transcript)) in specs.iter().enumerate() {
        let path = dir.join(name);
        write_segments(&path, 16, 12, 30.0, segments);
        if !transcript.is_empty() {
            let mut side = path.as_os_str().to_owned();
            side.push(".transcript.json");
            std::fs::write(PathBuf::from(side), transcript).unwrap();
        }
        csv.push_str(&format!(
            "{name},@creator{i},caption for {name},original sound,{},{},{},{}\n",
            100 * i,
            10 * i,
            i,
            0
        ));
        files.push(path);
    }
    let metadata = root.join("metadata.csv");
    std::fs::write(&metadata, csv).unwrap();
    Corpus {
        dir,
        files,
        metadata,
    }
}

pub fn record(n: u32, duration: f64, text: &str, speech: &str, caption: &str) -> ShotRecord {
    ShotRecord {
        shot_number: n,
        duration_s: duration,
        on_screen_text: text.into(),
        transcript_text: speech.into(),
        visual_caption: caption.into(),
    }
}

/// The three records rendered into the golden prompt fixtures.
pub fn golden_records() -> Vec<ShotRecord> {
    vec![
        record(
            1,
            2.5,
            "Friends quinoa salad",
            "so this is the salad everyone is talking about",
            "a woman standing in a kitchen holding a bowl",
        ),
        record(
            2,
            3.0,
            "",
            "",
            "a close up of chopped cucumbers on a cutting board",
        ),
        record(
            3,
            1.234,
            "3 cups quinoa",
            "add three cups of cooked quinoa",
            "a hand pouring quinoa\ninto a large glass bowl",
        ),
    ]
}

pub const GOLDEN_LONG_TEXT: &str = "A woman in a kitchen introduces the salad that everyone is talking about, then chops cucumbers and pours three cups of cooked quinoa into a glass bowl.";

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(rel)
}

pub fn words(n: usize) -> String {
    (1..=n)
        .map(|i| format!("w{i}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn stub_set(n_shots: usize) -> shortscribe::DescriptionSet {
    use std::sync::Arc;
    let records: Vec<ShotRecord> = (1..=n_shots as u32)
        .map(|i| {
            record(
                i,
                1.5,
                "",
                &format!("line {i}"),
                &format!("a scene number {i}"),
            )
        })
        .collect();
    let shots: Vec<shortscribe::Shot> = (0..n_shots)
        .map(|i| shortscribe::Shot {
            shot_number: i as u32 + 1,
            start_frame: i * 10,
            end_frame: i * 10 + 9,
            start_s: i as f64,
            end_s: i as f64 + 1.0,
            duration_s: 1.0,
        })
        .collect();
    shortscribe::summarize::Summarizer::new(Arc::new(shortscribe::backends::stub::StubLlm))
        .with_clock(Arc::new(shortscribe::summarize::FixedClock::default()))
        .build_description_set(&shots, &records)
        .unwrap()
}

pub fn doc(id: &str, with_set: bool) -> shortscribe::store::FeedDocument {
    shortscribe::store::FeedDocument {
        video_id: id.into(),
        username: format!("@{id}"),
        author_caption: format!("caption {id}"),
        audio_title: "original sound".into(),
        likes: 0,
        comments: 3,
        bookmarks: 1,
        shares: 2,
        video_url: format!("/media/{id}"),
        description_set: with_set.then(|| stub_set(2)),
    }
}
