//! Starts the service on a temporary store, uploads a zipped session twice
//! under the same name, pulls a downsampled trace, edits the annotations
//! and reads them back.
//!
//! cargo run -p harlstm-cli --example annotation_service

use std::io::Write;
use std::sync::Arc;

use harlstm::ingest::ClassSet;
use harlstm::synthetic::{generate_session, Motif};
use harlstm_cli::service::{router, RecordingSummary, Store, UploadRecord};
use harlstm_cli::trace::Trace;

fn zip_session(csv: &str, json: &str) -> Result<Vec<u8>, Box<dyn std::error::Error>> {
    let mut buf = std::io::Cursor::new(Vec::new());
    let mut zip = zip::ZipWriter::new(&mut buf);
    let opts = zip::write::SimpleFileOptions::default();
    zip.start_file("session.csv", opts)?;
    zip.write_all(csv.as_bytes())?;
    zip.start_file("session.json", opts)?;
    zip.write_all(json.as_bytes())?;
    zip.finish()?;
    Ok(buf.into_inner())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = std::env::temp_dir().join(format!("harlstm-store-{}", std::process::id()));
    let store = Arc::new(Store::open(&root, ClassSet::default())?);

    let listener = std::net::TcpListener::bind("127.0.0.1:0")?;
    listener.set_nonblocking(true)?;
    let base = format!("http://{}", listener.local_addr()?);
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().expect("runtime");
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener).expect("listener");
            axum::serve(listener, router(store, None)).await.expect("server");
        });
    });

    let (rec, doc) = generate_session(&[(Motif::Bite, 30.0), (Motif::Pill, 20.0)], 5);
    let body = zip_session(&rec.to_csv(), &doc.to_json())?;
    let client = reqwest::blocking::Client::new();
    let mut id = String::new();
    for _ in 0..2 {
        let up: UploadRecord = client
            .post(format!("{base}/upload?filename=watch.zip"))
            .body(body.clone())
            .send()?
            .error_for_status()?
            .json()?;
        println!("uploaded {} as {}", up.original_filename, up.stored_name);
        id = up.recording_id;
    }

    let list: Vec<RecordingSummary> = client.get(format!("{base}/recordings")).send()?.json()?;
    for r in &list {
        println!("recording {}: {} samples, {} spans", r.id, r.samples, r.spans);
    }

    let trace: Trace = client
        .get(format!("{base}/recordings/{id}/trace?max_points=200"))
        .send()?
        .json()?;
    println!("trace: {} of {} samples (downsampled: {})", trace.t_ms.len(), trace.source_samples, trace.downsampled);

    let url = format!("{base}/recordings/{id}/annotations");
    let mut edited = doc.clone();
    edited.spans[0].trim_head_ms += 400;
    edited.spans[1].confirmed = false;
    let put = client.put(&url).body(edited.to_json()).send()?;
    println!("PUT annotations: {}", put.status());
    let back = client.get(&url).send()?.text()?;
    println!("read back unchanged: {}", back == edited.to_json());

    let bad = client.put(&url).body(r#"{"spans":[{"label":"dancing","start_ms":0,"stop_ms":10}]}"#).send()?;
    println!("invalid document: {}", bad.status());

    std::fs::remove_dir_all(&root)?;
    Ok(())
}
