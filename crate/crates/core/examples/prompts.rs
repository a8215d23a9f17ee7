//! Prints the four prompts built from a small set of shot records.

use shortscribe::summarize::{build_prompt, PromptPayload};
use shortscribe::{PromptKind, ShotRecord};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let records = vec![
        ShotRecord {
            shot_number: 1,
            duration_s: 2.5,
            on_screen_text: "Friends quinoa salad".into(),
            transcript_text: "so this is the salad everyone is talking about".into(),
            visual_caption: "a woman standing in a kitchen holding a bowl".into(),
        },
        ShotRecord {
            shot_number: 2,
            duration_s: 3.0,
            on_screen_text: String::new(),
            transcript_text: String::new(),
            visual_caption: "a close up of chopped cucumbers on a cutting board".into(),
        },
    ];
    let long = "A woman in a kitchen introduces a popular salad and chops cucumbers.";
    for kind in PromptKind::ALL {
        let payload = match kind {
            PromptKind::ShotByShot | PromptKind::Long => PromptPayload::Records(&records),
            PromptKind::Condense50 | PromptKind::CondenseShort => PromptPayload::Text(long),
        };
        println!("===== {kind} =====\n{}\n", build_prompt(kind, payload)?);
    }
    Ok(())
}
