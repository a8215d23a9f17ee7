//! Samples five caption candidates for a keyframe and keeps the one the
//! embedding scorer rates most similar to the image.

use image::{Rgb, RgbImage};
use shortscribe::backends::stub::{StubCaptioner, StubEmbedder};
use shortscribe::extraction::{caption_candidates, select_caption};
use shortscribe::{CaptionParams, Keyframe};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let keyframe = Keyframe {
        shot_number: 1,
        frame_index: 14,
        image: RgbImage::from_fn(32, 18, |x, _| {
            if x < 16 {
                Rgb([30, 160, 40])
            } else {
                Rgb([235, 235, 230])
            }
        }),
    };
    let params = CaptionParams::default();
    let candidates = caption_candidates(&keyframe, &params, &StubCaptioner)?;
    let chosen = select_caption(&keyframe, &candidates, &StubEmbedder)?;
    for c in &candidates {
        let mark = if c.rank == chosen.rank { "*" } else { " " };
        println!("{mark} #{} {}", c.rank, c.text);
    }
    println!(
        "chosen similarity {:.4}",
        chosen.similarity.unwrap_or_default()
    );
    Ok(())
}
