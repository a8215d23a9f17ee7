mod common;

use std::path::Path;

use common::{planted_frames, write_frames, write_segments, Segment};
use proptest::prelude::*;
use rand::{rngs::StdRng, SeedableRng};
use shortscribe::media::{
    decode_frames, detect_shots, keyframe_index, luma_delta, segment_video, DecoderConfig,
    FrameMeta, MediaError, SampleRate, Shot,
};

fn decode_all(path: &Path, sample: SampleRate) -> Vec<FrameMeta> {
    decode_frames(path, sample)
        .unwrap()
        .map(|f| f.unwrap().meta)
        .collect()
}

#[test]
fn ten_seconds_native_and_decimated() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ten.ssraw");
    write_segments(
        &path,
        4,
        4,
        30.0,
        &[Segment {
            frames: 300,
            rgb: [90, 90, 90],
        }],
    );

    let native = decode_all(&path, SampleRate::Native);
    assert_eq!(native.len(), 300);
    assert_eq!(native[0].timestamp, 0.0);
    assert!((native[299].timestamp - 9.967).abs() < 5e-4);
    for (i, f) in native.iter().enumerate() {
        assert_eq!(f.index, i);
        assert!((f.timestamp - i as f64 / 30.0).abs() < 1e-9);
    }

    let ten = decode_all(&path, SampleRate::Fps(10.0));
    assert_eq!(ten.len(), 100);
    // every third source frame survives; indices are renumbered
    for (i, f) in ten.iter().enumerate() {
        assert_eq!(f.index, i);
        assert!((f.timestamp - (3 * i) as f64 / 30.0).abs() < 1e-9);
    }
}

#[test]
fn zero_byte_file_is_undecodable() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.ssraw");
    std::fs::write(&path, b"").unwrap();
    assert!(matches!(
        decode_frames(&path, SampleRate::Native),
        Err(MediaError::UndecodableMedia { .. })
    ));
}

#[test]
fn header_only_file_is_empty_video() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hdr.ssraw");
    std::fs::write(&path, b"4 4 30\n").unwrap();
    let res = decode_frames(&path, SampleRate::Native).and_then(|mut s| match s.next() {
        Some(r) => r.map(|_| ()),
        None => Err(MediaError::EmptyVideo),
    });
    assert!(matches!(res, Err(MediaError::EmptyVideo)));
}

#[test]
fn truncated_frame_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cut.ssraw");
    write_segments(
        &path,
        4,
        4,
        30.0,
        &[Segment {
            frames: 2,
            rgb: [1, 2, 3],
        }],
    );
    let mut bytes = std::fs::read(&path).unwrap();
    bytes.truncate(bytes.len() - 5);
    std::fs::write(&path, bytes).unwrap();
    let results: Vec<_> = decode_frames(&path, SampleRate::Native).unwrap().collect();
    assert!(results.iter().any(|r| r.is_err()));
}

#[test]
fn external_decoder_command_is_used_for_containers() {
    let dir = tempfile::tempdir().unwrap();
    let raw = dir.path().join("src.ssraw");
    write_segments(
        &raw,
        4,
        4,
        30.0,
        &[Segment {
            frames: 12,
            rgb: [5, 5, 5],
        }],
    );
    let mp4 = dir.path().join("clip.mp4");
    std::fs::copy(&raw, &mp4).unwrap();
    let decoder = DecoderConfig {
        command: Some("cat {input}".into()),
    };
    let seg = segment_video(&mp4, SampleRate::Native, 0.4, &decoder).unwrap();
    assert_eq!(seg.frame_count, 12);
    assert_eq!(seg.shots.len(), 1);
}

#[test]
fn black_white_file_segments_with_centered_keyframes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bw.ssraw");
    write_segments(
        &path,
        8,
        8,
        30.0,
        &[
            Segment {
                frames: 30,
                rgb: [0, 0, 0],
            },
            Segment {
                frames: 30,
                rgb: [255, 255, 255],
            },
        ],
    );
    let seg = segment_video(&path, SampleRate::Native, 0.4, &DecoderConfig::default()).unwrap();
    let bounds: Vec<_> = seg
        .shots
        .iter()
        .map(|s| (s.start_frame, s.end_frame))
        .collect();
    assert_eq!(bounds, vec![(0, 29), (30, 59)]);
    assert_eq!(seg.shots[0].end_s, seg.shots[1].start_s);
    assert!((seg.shots[1].end_s - 2.0).abs() < 1e-9);
    let kf: Vec<_> = seg.keyframes.iter().map(|k| k.frame_index).collect();
    assert_eq!(kf, vec![14, 44]);
    assert_eq!(seg.keyframes[1].image.get_pixel(0, 0).0, [255, 255, 255]);
}

#[test]
fn alternating_frames_give_one_shot_each() {
    let frames: Vec<FrameMeta> = (0..10)
        .map(|i| {
            let v = if i % 2 == 0 { 0 } else { 255 };
            FrameMeta::new(i, i as f64 / 30.0, 1.0 / 30.0, 2, 2, vec![v; 4]).unwrap()
        })
        .collect();
    let shots = detect_shots(&frames, 0.4).unwrap();
    assert_eq!(shots.len(), 10);
    assert!(shots.iter().all(|s| s.frame_count() == 1));
}

#[test]
fn half_flipped_pair_is_half() {
    let a = FrameMeta::new(0, 0.0, 0.1, 2, 2, vec![0, 0, 255, 255]).unwrap();
    let b = FrameMeta::new(1, 0.1, 0.1, 2, 2, vec![255, 255, 255, 255]).unwrap();
    assert_eq!(luma_delta(&a, &b).unwrap(), 0.5);
}

#[test]
fn planted_cuts_on_disk() {
    let mut rng = StdRng::seed_from_u64(7);
    let dir = tempfile::tempdir().unwrap();
    for cuts in [1, 6, 12] {
        let (frames, starts) = planted_frames(&mut rng, 6, 5, cuts);
        let path = dir.path().join(format!("p{cuts}.ssraw"));
        write_frames(&path, 6, 5, 24.0, &frames);
        let seg = segment_video(&path, SampleRate::Native, 0.4, &DecoderConfig::default()).unwrap();
        let found: Vec<_> = seg.shots.iter().map(|s| s.start_frame).collect();
        assert_eq!(found, starts);
    }
}

fn metas(lumas: &[u8]) -> Vec<FrameMeta> {
    lumas
        .iter()
        .enumerate()
        .map(|(i, &v)| FrameMeta::new(i, i as f64 / 25.0, 0.04, 1, 1, vec![v]).unwrap())
        .collect()
}

/// Brute-force oracle: cut before every frame whose delta reaches the threshold.
fn oracle_starts(lumas: &[u8], threshold: f64) -> Vec<usize> {
    let mut starts = vec![0];
    for i in 1..lumas.len() {
        let d = (f64::from(lumas[i]) - f64::from(lumas[i - 1])).abs() / 255.0;
        if d >= threshold {
            starts.push(i);
        }
    }
    starts
}

fn starts(shots: &[Shot]) -> Vec<usize> {
    shots.iter().map(|s| s.start_frame).collect()
}

proptest! {
    #[test]
    fn shots_partition_frames(lumas in prop::collection::vec(any::<u8>(), 1..200), t in 0.01f64..1.0) {
        let frames = metas(&lumas);
        let shots = detect_shots(&frames, t).unwrap();
        prop_assert_eq!(shots[0].start_frame, 0);
        prop_assert_eq!(shots.last().unwrap().end_frame, lumas.len() - 1);
        for w in shots.windows(2) {
            prop_assert_eq!(w[1].start_frame, w[0].end_frame + 1);
            prop_assert_eq!(w[1].start_s, w[0].end_s);
        }
        for (i, s) in shots.iter().enumerate() {
            prop_assert_eq!(s.shot_number as usize, i + 1);
            prop_assert!(s.duration_s > 0.0);
        }
        prop_assert_eq!(starts(&shots), oracle_starts(&lumas, t));
    }

    #[test]
    fn raising_threshold_only_removes_cuts(lumas in prop::collection::vec(any::<u8>(), 1..150), a in 0.01f64..1.0, b in 0.01f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let frames = metas(&lumas);
        let loose = starts(&detect_shots(&frames, lo).unwrap());
        let strict = starts(&detect_shots(&frames, hi).unwrap());
        prop_assert!(strict.iter().all(|s| loose.contains(s)));
    }

    #[test]
    fn keyframe_is_central(start in 0usize..1000, n in 1usize..500) {
        let shot = Shot {
            shot_number: 1,
            start_frame: start,
            end_frame: start + n - 1,
            start_s: 0.0,
            end_s: 1.0,
            duration_s: 1.0,
        };
        let k = keyframe_index(&shot);
        prop_assert!(k >= shot.start_frame && k <= shot.end_frame);
        let before = k - start;
        let after = shot.end_frame - k;
        prop_assert!(after == before || after == before + 1);
    }

    #[test]
    fn delta_symmetric_and_bounded(a in prop::collection::vec(any::<u8>(), 12), b in prop::collection::vec(any::<u8>(), 12)) {
        let fa = FrameMeta::new(0, 0.0, 0.1, 4, 3, a).unwrap();
        let fb = FrameMeta::new(1, 0.1, 0.1, 4, 3, b).unwrap();
        let ab = luma_delta(&fa, &fb).unwrap();
        prop_assert_eq!(ab, luma_delta(&fb, &fa).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(luma_delta(&fa, &fa).unwrap(), 0.0);
    }
}
