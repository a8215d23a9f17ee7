use std::collections::VecDeque;
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::Router;
use image::{Rgb, RgbImage};
use serde_json::{json, Value};
use shortscribe::backends::http::{BackendConfig, HttpCaptioner, HttpLlm, HttpOcr};
use shortscribe::backends::{BackendError, BackendRole, CaptionBackend, LlmBackend, OcrBackend};
use shortscribe::CaptionParams;

#[derive(Default)]
struct Mock {
    replies: Mutex<VecDeque<(u16, String)>>,
    seen: Mutex<Vec<(Option<String>, Value)>>,
}

async fn handle(
    State(mock): State<Arc<Mock>>,
    headers: HeaderMap,
    body: Bytes,
) -> (StatusCode, String) {
    let auth = headers
        .get("authorization")
        .and_then(|v| v.to_str().ok())
        .map(String::from);
    let value: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
    mock.seen.lock().unwrap().push((auth, value));
    let (status, text) = mock
        .replies
        .lock()
        .unwrap()
        .pop_front()
        .unwrap_or((500, "exhausted".into()));
    (StatusCode::from_u16(status).unwrap(), text)
}

/// Starts a server answering POST / with the queued replies in order.
fn serve(replies: Vec<(u16, String)>) -> (String, Arc<Mock>) {
    let mock = Arc::new(Mock {
        replies: Mutex::new(replies.into()),
        seen: Mutex::default(),
    });
    let app = Router::new()
        .route("/", post(handle))
        .with_state(mock.clone());
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let l = tokio::net::TcpListener::from_std(listener).unwrap();
            axum::serve(l, app).await.unwrap();
        });
    });
    (format!("http://{addr}/"), mock)
}

fn config(url: &str) -> BackendConfig {
    BackendConfig {
        retries: 2,
        backoff_ms: 1,
        ..BackendConfig::new(url)
    }
}

fn image() -> RgbImage {
    RgbImage::from_pixel(3, 2, Rgb([9, 8, 7]))
}

#[test]
fn caption_request_carries_decoding_params() {
    let captions: Vec<String> = (0..5).map(|i| format!("caption {i}")).collect();
    let (url, mock) = serve(vec![(200, json!({ "captions": captions }).to_string())]);
    let cfg = config(&url);
    let client = HttpCaptioner::new((BackendRole::Caption, &cfg)).unwrap();
    let got = client.caption(&image(), &CaptionParams::default()).unwrap();
    assert_eq!(got, captions);

    let seen = mock.seen.lock().unwrap();
    let body = &seen[0].1;
    assert_eq!(body["num_candidates"], 5);
    assert_eq!(body["min_words"], 5);
    assert_eq!(body["max_words"], 20);
    assert_eq!(body["top_p"], 0.9);
    assert_eq!(body["temperature"], 1.0);
    assert_eq!(body["sampling"], "nucleus");
    let png = shortscribe::backends::wire::decode_png_b64(body["image_png_b64"].as_str().unwrap())
        .unwrap();
    assert_eq!(png, image());
}

#[test]
fn llm_request_and_bearer_token() {
    std::env::set_var("SS_TEST_LLM_TOKEN", "s3cret");
    let (url, mock) = serve(vec![(200, r#"{"text":"a summary"}"#.into())]);
    let cfg = BackendConfig {
        model_id: Some("gpt-4".into()),
        credential_env: Some("SS_TEST_LLM_TOKEN".into()),
        ..config(&url)
    };
    let llm = HttpLlm::new((BackendRole::Llm, &cfg)).unwrap();
    assert_eq!(llm.temperature(), 0.0);
    assert_eq!(llm.complete("hello prompt").unwrap(), "a summary");
    let seen = mock.seen.lock().unwrap();
    assert_eq!(seen[0].0.as_deref(), Some("Bearer s3cret"));
    assert_eq!(
        seen[0].1,
        json!({"model_id": "gpt-4", "prompt": "hello prompt", "temperature": 0.0})
    );
}

#[test]
fn server_errors_are_retried() {
    let (url, mock) = serve(vec![
        (503, "busy".into()),
        (500, "oops".into()),
        (
            200,
            r#"{"spans":[{"text":"3 cups quinoa","confidence":0.98}]}"#.into(),
        ),
    ]);
    let cfg = config(&url);
    let ocr = HttpOcr::new((BackendRole::Ocr, &cfg)).unwrap();
    let spans = ocr.detect_text(&image()).unwrap();
    assert_eq!(spans[0].text, "3 cups quinoa");
    assert_eq!(mock.seen.lock().unwrap().len(), 3);
}

#[test]
fn retries_exhausted_is_unavailable() {
    let (url, mock) = serve(vec![]);
    let cfg = config(&url);
    let ocr = HttpOcr::new((BackendRole::Ocr, &cfg)).unwrap();
    match ocr.detect_text(&image()) {
        Err(BackendError::Unavailable { role, reason }) => {
            assert_eq!(role, BackendRole::Ocr);
            assert!(reason.contains("3 attempt"), "{reason}");
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(mock.seen.lock().unwrap().len(), 3);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, mock) = serve(vec![(404, "nope".into()), (200, "{}".into())]);
    let cfg = config(&url);
    let ocr = HttpOcr::new((BackendRole::Ocr, &cfg)).unwrap();
    assert!(matches!(
        ocr.detect_text(&image()),
        Err(BackendError::Unavailable { .. })
    ));
    assert_eq!(mock.seen.lock().unwrap().len(), 1);
}

#[test]
fn bad_json_is_malformed() {
    let (url, _mock) = serve(vec![(200, r#"{"captions": 7}"#.into())]);
    let cfg = config(&url);
    let client = HttpCaptioner::new((BackendRole::Caption, &cfg)).unwrap();
    assert!(matches!(
        client.caption(&image(), &CaptionParams::default()),
        Err(BackendError::Malformed {
            role: BackendRole::Caption,
            ..
        })
    ));
}
