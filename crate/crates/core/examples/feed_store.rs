//! Saves documents, pages through the feed, and logs interaction events.

use chrono::{TimeZone, Utc};
use shortscribe::store::{ContentLexicon, Control, FeedDocument, FeedStore, InteractionEvent};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let store = FeedStore::open(dir.path().join("feed"), ContentLexicon::empty())?;
    for i in 0..7 {
        store.save_document(&FeedDocument {
            video_id: format!("video{i}"),
            username: format!("@creator{i}"),
            author_caption: format!("day {i} of cooking"),
            audio_title: "original sound".into(),
            likes: 10 * i,
            comments: i,
            bookmarks: 0,
            shares: 1,
            video_url: format!("/media/video{i}"),
            description_set: None,
        })?;
    }

    let mut cursor = None;
    loop {
        let page = store.list_feed(cursor.as_deref(), 3)?;
        let ids: Vec<&str> = page.items.iter().map(|s| s.video_id.as_str()).collect();
        println!("page {ids:?}");
        match page.next_cursor {
            Some(c) => cursor = Some(c),
            None => break,
        }
    }

    for (sec, control) in [
        (0, Control::Play),
        (4, Control::OpenDescriptions),
        (9, Control::Next),
    ] {
        store.log_event(&InteractionEvent {
            session_id: "demo".into(),
            video_id: "video0".into(),
            control,
            timestamp: Utc.with_ymd_and_hms(2024, 5, 1, 10, 0, sec).unwrap(),
        })?;
    }
    for e in store.events_for_session("demo")? {
        println!("{} {:?} on {}", e.timestamp, e.control, e.video_id);
    }
    Ok(())
}
