mod common;

use std::io::Write;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use harlstm::ingest::ClassSet;
use harlstm::synthetic::{generate_session, Motif};
use harlstm_cli::service::{router, RecordingSummary, Store, UploadRecord};
use harlstm_cli::trace::Trace;
use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::Value;

fn start(root: &Path) -> String {
    let store = Arc::new(Store::open(root, ClassSet::default()).unwrap());
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let addr: SocketAddr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener).unwrap();
            axum::serve(listener, router(store, None)).await.unwrap();
        });
    });
    format!("http://{addr}")
}

fn archive(members: &[(&str, &str)]) -> Vec<u8> {
    let mut buf = std::io::Cursor::new(Vec::new());
    {
        let mut zip = zip::ZipWriter::new(&mut buf);
        let opts = zip::write::SimpleFileOptions::default();
        for (name, body) in members {
            zip.start_file(*name, opts).unwrap();
            zip.write_all(body.as_bytes()).unwrap();
        }
        zip.finish().unwrap();
    }
    buf.into_inner()
}

fn session_zip(seed: u64) -> (Vec<u8>, String) {
    let (rec, doc) = generate_session(&[(Motif::Bite, 8.0), (Motif::Puff, 6.0)], seed);
    let json = doc.to_json();
    (archive(&[("trip.csv", &rec.to_csv()), ("trip.json", &json)]), json)
}

fn upload(client: &Client, base: &str, name: &str, body: Vec<u8>) -> reqwest::blocking::Response {
    client.post(format!("{base}/upload?filename={name}")).body(body).send().unwrap()
}

#[test]
fn same_filename_uploads_get_distinct_names_and_are_logged() {
    let dir = tempfile::tempdir().unwrap();
    let base = start(dir.path());
    let client = Client::new();
    let (zip, _) = session_zip(1);
    let mut names = Vec::new();
    for _ in 0..3 {
        let res = upload(&client, &base, "trip.zip", zip.clone());
        assert_eq!(res.status(), StatusCode::CREATED);
        let rec: UploadRecord = res.json().unwrap();
        assert_eq!(rec.original_filename, "trip.zip");
        assert_eq!(rec.bytes, zip.len() as u64);
        assert_eq!(std::fs::read(dir.path().join("uploads").join(&rec.stored_name)).unwrap(), zip);
        names.push(rec.stored_name);
    }
    names.sort();
    names.dedup();
    assert_eq!(names.len(), 3);
    let log = std::fs::read_to_string(dir.path().join("uploads.log")).unwrap();
    assert_eq!(log.lines().count(), 3);
    for line in log.lines() {
        serde_json::from_str::<UploadRecord>(line).unwrap();
    }
}

#[test]
fn concurrent_uploads_are_all_kept() {
    let dir = tempfile::tempdir().unwrap();
    let base = start(dir.path());
    let (zip, _) = session_zip(2);
    let n = 16;
    let handles: Vec<_> = (0..n)
        .map(|_| {
            let base = base.clone();
            let zip = zip.clone();
            std::thread::spawn(move || {
                let res = upload(&Client::new(), &base, "same.zip", zip);
                assert_eq!(res.status(), StatusCode::CREATED);
                res.json::<UploadRecord>().unwrap().stored_name
            })
        })
        .collect();
    let mut names: Vec<String> = handles.into_iter().map(|h| h.join().unwrap()).collect();
    names.sort();
    names.dedup();
    assert_eq!(names.len(), n);
    let stored = std::fs::read_dir(dir.path().join("uploads")).unwrap().count();
    assert_eq!(stored, n);
    let log = std::fs::read_to_string(dir.path().join("uploads.log")).unwrap();
    assert_eq!(log.lines().count(), n);
    let listed: Vec<RecordingSummary> = Client::new().get(format!("{base}/recordings")).send().unwrap().json().unwrap();
    assert_eq!(listed.len(), n);
    assert!(listed.iter().all(|r| r.spans == 2));
}

#[test]
fn malformed_archives_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let base = start(dir.path());
    let client = Client::new();
    let (rec, doc) = generate_session(&[(Motif::Bite, 8.0)], 3);
    let csv = rec.to_csv();
    let json = doc.to_json();
    let bad = [
        b"not a zip".to_vec(),
        archive(&[("trip.csv", &csv)]),
        archive(&[("a.csv", &csv), ("b.csv", &csv)]),
        archive(&[("trip.csv", &csv), ("trip.json", &json), ("extra.txt", "hello")]),
        archive(&[("trip.csv", &csv), ("trip.json", &json.replace("eating", "napping"))]),
    ];
    for body in bad {
        assert_eq!(upload(&client, &base, "x.zip", body).status(), StatusCode::BAD_REQUEST);
    }
    assert_eq!(std::fs::read_dir(dir.path().join("uploads")).unwrap().count(), 0);
    assert!(!dir.path().join("uploads.log").exists());
}

#[test]
fn annotations_round_trip_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let base = start(dir.path());
    let client = Client::new();
    let (zip, original) = session_zip(4);
    let id = upload(&client, &base, "t.zip", zip).json::<UploadRecord>().unwrap().recording_id;
    let url = format!("{base}/recordings/{id}/annotations");

    let res = client.get(&url).send().unwrap();
    assert_eq!(res.status(), StatusCode::OK);
    assert_eq!(res.text().unwrap(), original);

    let mut doc: Value = serde_json::from_str(&original).unwrap();
    doc["spans"][0]["trim_head_ms"] = Value::from(400);
    doc["spans"][1]["confirmed"] = Value::Bool(false);
    let edited = format!("{}\n", serde_json::to_string(&doc).unwrap());
    let res = client.put(&url).body(edited.clone()).send().unwrap();
    assert_eq!(res.status(), StatusCode::NO_CONTENT);
    let put_tag = res.headers()["etag"].to_str().unwrap().to_string();

    let res = client.get(&url).send().unwrap();
    assert_eq!(res.headers()["etag"].to_str().unwrap(), put_tag);
    assert_eq!(res.text().unwrap(), edited);

    let res = client.put(&url).body(r#"{"spans":[{"label":"eating","start_ms":5,"stop_ms":1}]}"#).send().unwrap();
    assert_eq!(res.status(), StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(client.get(&url).send().unwrap().text().unwrap(), edited);
}

#[test]
fn trace_is_downsampled_and_windowed() {
    let dir = tempfile::tempdir().unwrap();
    let base = start(dir.path());
    let client = Client::new();
    let (zip, _) = session_zip(5);
    let id = upload(&client, &base, "t.zip", zip).json::<UploadRecord>().unwrap().recording_id;

    let full: Trace = client.get(format!("{base}/recordings/{id}/trace")).send().unwrap().json().unwrap();
    assert!(!full.downsampled);
    assert_eq!(full.t_ms.len(), full.source_samples);

    let small: Trace = client
        .get(format!("{base}/recordings/{id}/trace?max_points=100&from_ms=2000&to_ms=9000"))
        .send()
        .unwrap()
        .json()
        .unwrap();
    assert!(small.downsampled);
    assert!(small.t_ms.len() <= 100);
    assert_eq!(small.t_ms[0], 2000);
    assert_eq!(*small.t_ms.last().unwrap(), 9000);
    assert_eq!(small.source_samples, 176);
}

#[test]
fn unknown_recordings_are_not_found() {
    let dir = tempfile::tempdir().unwrap();
    let base = start(dir.path());
    let client = Client::new();
    for id in ["1-abcdef", "..", "x"] {
        let res = client.get(format!("{base}/recordings/{id}/annotations")).send().unwrap();
        assert_eq!(res.status(), StatusCode::NOT_FOUND, "{id}");
    }
}
