//! Starts the HTTP API on an ephemeral port, queries it, and shuts down.
//! Pass `--wait` to keep serving until Ctrl-C.

use std::sync::Arc;

use shortscribe::service::{bind, ServerHandle};
use shortscribe::store::{ContentLexicon, FeedDocument, FeedStore};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let store = Arc::new(FeedStore::open(
        dir.path().join("feed"),
        ContentLexicon::empty(),
    )?);
    store.save_document(&FeedDocument {
        video_id: "demo".into(),
        username: "@demo".into(),
        author_caption: "hello feed".into(),
        audio_title: "original sound".into(),
        likes: 1,
        comments: 0,
        bookmarks: 0,
        shares: 0,
        video_url: "/media/demo".into(),
        description_set: None,
    })?;

    let server = ServerHandle::spawn(bind("127.0.0.1:0".parse()?)?, store, None)?;
    let base = server.base_url();
    println!("listening on {base}");
    let http = reqwest::blocking::Client::new();
    println!(
        "GET /api/feed -> {}",
        http.get(format!("{base}/api/feed")).send()?.text()?
    );
    let r = http
        .post(format!("{base}/api/events"))
        .json(&serde_json::json!({
            "session_id": "s1",
            "video_id": "demo",
            "control": "play",
            "timestamp": "2024-05-01T10:00:00Z"
        }))
        .send()?;
    println!("POST /api/events -> {} {}", r.status(), r.text()?);

    if std::env::args().any(|a| a == "--wait") {
        println!("serving until interrupted");
        loop {
            std::thread::park();
        }
    }
    server.stop()?;
    Ok(())
}
