mod common;

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Mutex;

use common::make_corpus;
use shortscribe::cli::{
    self, cmd_describe, cmd_eval, cmd_ingest, open_store, IngestError, EXIT_OK, EXIT_PARTIAL,
    EXIT_USAGE,
};
use shortscribe::config::PipelineConfig;
use shortscribe::eval::{EvalError, SigmaConvention};
use shortscribe::pipeline::{BackendMode, Status, VideoReport};
use shortscribe::store::FeedStore;

fn config(root: &Path) -> PipelineConfig {
    PipelineConfig {
        store_dir: root.join("store"),
        ..PipelineConfig::default()
    }
}

fn describe(cfg: &PipelineConfig, store: &FeedStore, force: bool) -> (Vec<VideoReport>, String) {
    let mut buf: Vec<u8> = Vec::new();
    let reports = {
        let sink: &mut (dyn std::io::Write + Send) = &mut buf;
        let sink = Mutex::new(sink);
        cmd_describe(cfg, store, &[], BackendMode::Stub, force, &sink).unwrap()
    };
    (reports, String::from_utf8(buf).unwrap())
}

fn ingest_corpus(root: &Path) -> (PipelineConfig, FeedStore, Vec<String>) {
    let corpus = make_corpus(root);
    let cfg = config(root);
    let store = open_store(&cfg).unwrap();
    let done = cmd_ingest(
        &cfg,
        &store,
        std::slice::from_ref(&corpus.dir),
        &corpus.metadata,
    )
    .unwrap();
    let ids = done.into_iter().map(|d| d.video_id).collect();
    (cfg, store, ids)
}

#[test]
fn ingest_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, store, ids) = ingest_corpus(dir.path());
    assert_eq!(ids.len(), 3);
    assert!(ids
        .iter()
        .all(|id| id.len() == cli::ID_HEX_LEN && id.chars().all(|c| c.is_ascii_hexdigit())));
    let doc = store.load_document(&ids[1]).unwrap();
    assert_eq!(doc.username, "@creator0");
    assert_eq!(doc.video_url, format!("/media/{}", ids[1]));
    assert!(doc.description_set.is_none());

    let again = cmd_ingest(
        &cfg,
        &store,
        &[dir.path().join("videos")],
        &dir.path().join("metadata.csv"),
    )
    .unwrap();
    assert_eq!(
        again.iter().map(|d| d.video_id.clone()).collect::<Vec<_>>(),
        ids
    );
    assert!(again.iter().all(|d| !d.created));
    assert_eq!(store.len(), 3);
}

#[test]
fn missing_metadata_row_names_file_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = make_corpus(dir.path());
    let csv = std::fs::read_to_string(&corpus.metadata).unwrap();
    let trimmed: Vec<&str> = csv.lines().filter(|l| !l.starts_with("single")).collect();
    std::fs::write(&corpus.metadata, trimmed.join("\n")).unwrap();
    let cfg = config(dir.path());
    let store = open_store(&cfg).unwrap();
    match cmd_ingest(
        &cfg,
        &store,
        std::slice::from_ref(&corpus.dir),
        &corpus.metadata,
    ) {
        Err(IngestError::MetadataMissing(name)) => assert_eq!(name, "single.ssraw"),
        other => panic!("{other:?}"),
    }
    assert_eq!(store.len(), 0);
}

#[test]
fn describe_all_then_skip_then_force() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, store, ids) = ingest_corpus(dir.path());
    let (first, printed) = describe(&cfg, &store, false);
    assert!(
        first.iter().all(|r| r.status == Status::Described),
        "{printed}"
    );
    assert_eq!(printed.lines().count(), 3);
    let shots: Vec<_> = first.iter().map(|r| r.shot_count.unwrap()).collect();
    let by_id: Vec<_> = ids
        .iter()
        .map(|id| {
            first
                .iter()
                .find(|r| &r.video_id == id)
                .unwrap()
                .shot_count
                .unwrap()
        })
        .collect();
    assert_eq!(shots, by_id);
    // dance.ssraw, salad.ssraw and single.ssraw in directory order
    assert_eq!(by_id, vec![2, 3, 1]);
    for id in &ids {
        let set = store.load_document(id).unwrap().description_set.unwrap();
        set.validate().unwrap();
        assert_eq!(set.shot_by_shot.len(), set.generation_meta.shot_count);
        assert!(!set.generation_meta.source_sha256.is_none());
    }
    let saved = store.load_document(&ids[0]).unwrap();

    let (second, _) = describe(&cfg, &store, false);
    assert!(second.iter().all(|r| r.status == Status::Skipped));
    assert_eq!(store.load_document(&ids[0]).unwrap(), saved);

    let (third, _) = describe(&cfg, &store, true);
    assert!(third.iter().all(|r| r.status == Status::Described));
    assert_eq!(store.load_document(&ids[0]).unwrap(), saved);
}

#[test]
fn unreachable_backend_names_role() {
    let dir = tempfile::tempdir().unwrap();
    let (_, store, ids) = ingest_corpus(dir.path());
    let mut toml = format!("store_dir = {:?}\n", dir.path().join("store"));
    for role in ["asr", "ocr", "caption", "embed", "llm"] {
        toml.push_str(&format!(
            "[backends.{role}]\nendpoint = \"http://127.0.0.1:9/\"\nretries = 0\ntimeout_s = 2.0\n"
        ));
    }
    let path = dir.path().join("live.toml");
    std::fs::write(&path, toml).unwrap();
    let cfg = PipelineConfig::from_file(&path).unwrap();
    let mut buf: Vec<u8> = Vec::new();
    let reports = {
        let sink: &mut (dyn std::io::Write + Send) = &mut buf;
        let sink = Mutex::new(sink);
        cmd_describe(&cfg, &store, &ids[..1], BackendMode::Live, false, &sink).unwrap()
    };
    let r = &reports[0];
    assert_eq!(r.status, Status::Failed);
    let failure = r.failure.as_ref().unwrap();
    assert!(failure.role.is_some(), "{failure}");
    assert!(failure.to_string().contains(" backend)"), "{failure}");
    assert!(store
        .load_document(&ids[0])
        .unwrap()
        .description_set
        .is_none());
}

#[test]
fn live_mode_without_endpoints_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let (cfg, store, _) = ingest_corpus(dir.path());
    let mut buf: Vec<u8> = Vec::new();
    let sink: &mut (dyn std::io::Write + Send) = &mut buf;
    let sink = Mutex::new(sink);
    assert!(cmd_describe(&cfg, &store, &[], BackendMode::Live, false, &sink).is_err());
}

#[test]
fn eval_writes_report_and_handles_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let report = cmd_eval(
        &common::fixture("study_labels.csv"),
        &out,
        SigmaConvention::Population,
    )
    .unwrap();
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(json["videos"], report.videos as u64);
    assert_eq!(json["rows"].as_array().unwrap().len(), 4);

    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "video_id,dtype,rater,errors,covered,total,words\n").unwrap();
    let zero = cmd_eval(
        &empty,
        &dir.path().join("z.json"),
        SigmaConvention::Population,
    )
    .unwrap();
    assert_eq!(zero.videos, 0);
    assert!(zero
        .rows
        .iter()
        .all(|r| r.errors.n == 0 && r.errors.mean == 0.0));

    let bad = dir.path().join("bad.csv");
    std::fs::write(
        &bad,
        "video_id,dtype,rater,errors,covered,total,words\nv1,short,1,0,1,2,10\nv2,short,1,0,5,2,10\n",
    )
    .unwrap();
    match cmd_eval(
        &bad,
        &dir.path().join("b.json"),
        SigmaConvention::Population,
    ) {
        Err(EvalError::LabelSchema { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
}

fn bin(args: &[&str], cwd: &Path) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_shortscribe"))
        .args(args)
        .current_dir(cwd)
        .env_remove("SS_STORE_DIR")
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    make_corpus(root);
    let store = root.join("store");
    let s = store.to_str().unwrap();

    let (code, out, _) = bin(
        &[
            "--store",
            s,
            "ingest",
            "videos",
            "--metadata",
            "metadata.csv",
        ],
        root,
    );
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.lines().count(), 3);

    let (code, out, _) = bin(&["--store", s, "describe", "--all"], root);
    assert_eq!(code, EXIT_OK, "{out}");
    assert!(out.contains("described=3 skipped=0 failed=0"), "{out}");

    let (code, _, err) = bin(&["--store", s, "describe"], root);
    assert_eq!(code, EXIT_USAGE, "{err}");
    let (code, _, _) = bin(
        &[
            "--store",
            s,
            "--scene-threshold",
            "1.5",
            "describe",
            "--all",
        ],
        root,
    );
    assert_eq!(code, EXIT_USAGE);
    let (code, _, _) = bin(&["frobnicate"], root);
    assert_eq!(code, EXIT_USAGE);
    let (code, _, _) = bin(
        &["--store", s, "ingest", "videos", "--metadata", "nope.csv"],
        root,
    );
    assert_eq!(code, EXIT_USAGE);

    let (code, out, _) = bin(&["--store", s, "describe", "unknown-id"], root);
    assert_eq!(code, EXIT_PARTIAL, "{out}");

    let labels = common::fixture("study_labels.csv");
    let report = root.join("r.json");
    let (code, out, _) = bin(
        &[
            "eval",
            labels.to_str().unwrap(),
            "--out",
            report.to_str().unwrap(),
        ],
        root,
    );
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("Short"), "{out}");
    assert!(report.exists());
}

#[test]
fn serve_on_busy_port_fails() {
    let dir = tempfile::tempdir().unwrap();
    let holder = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = holder.local_addr().unwrap().port().to_string();
    let store: PathBuf = dir.path().join("store");
    let (code, _, err) = bin(
        &["--store", store.to_str().unwrap(), "serve", "--port", &port],
        dir.path(),
    );
    assert_eq!(code, EXIT_PARTIAL);
    assert!(err.contains(&port), "{err}");
}
