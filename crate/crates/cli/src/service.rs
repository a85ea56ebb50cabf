//! Local upload and annotation service.
//!
//! Store layout under the root directory:
//!
//! ```text
//! uploads/<ms>-<hex6>.<ext>          accepted uploads, never modified
//! uploads.log                        one JSON UploadRecord per line
//! recordings/<id>/recording.csv      extracted recording
//! recordings/<id>/annotations.json   current annotation document (PUT target)
//! recordings/<id>/upload.json        the UploadRecord for this recording
//! ```

use std::fs::{self, OpenOptions};
use std::io::{self, Cursor, Read, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path as UrlPath, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{Html, IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use clap::Args;
use harlstm::ingest::{parse_annotation_document, parse_recording, ClassSet};
use rand::Rng;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use crate::manifest::sha256_hex;
use crate::trace::{downsample, Trace, MAX_POINTS};

pub const STORE_ENV: &str = "HARLSTM_STORE";
const MAX_UPLOAD_BYTES: usize = 256 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    /// Store directory
    #[arg(long, env = STORE_ENV, default_value = "harlstm-store")]
    pub store: PathBuf,
    /// Directory of static annotator assets served at `/`
    #[arg(long)]
    pub ui: Option<PathBuf>,
    /// Activity classes accepted in annotation documents
    #[arg(long, value_delimiter = ',', default_value = "eating,smoking,medication,jogging,other")]
    pub classes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UploadRecord {
    pub original_filename: String,
    pub stored_name: String,
    pub bytes: u64,
    pub received_ms: u64,
    pub recording_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordingSummary {
    pub id: String,
    pub original_filename: String,
    pub samples: usize,
    pub first_ms: i64,
    pub last_ms: i64,
    pub spans: usize,
}

#[derive(Debug)]
pub enum ServiceError {
    BadRequest(String),
    Unprocessable(String),
    NotFound(String),
    Internal(String),
}

impl From<io::Error> for ServiceError {
    fn from(e: io::Error) -> Self {
        ServiceError::Internal(e.to_string())
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let (status, msg) = match self {
            ServiceError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            ServiceError::Unprocessable(m) => (StatusCode::UNPROCESSABLE_ENTITY, m),
            ServiceError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ServiceError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(serde_json::json!({ "error": msg }))).into_response()
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn valid_id(id: &str) -> bool {
    match id.split_once('-') {
        Some((ms, hex)) => {
            !ms.is_empty()
                && ms.bytes().all(|b| b.is_ascii_digit())
                && hex.len() == 6
                && hex.bytes().all(|b| b.is_ascii_hexdigit() && !b.is_ascii_uppercase())
        }
        None => false,
    }
}

fn extension_of(name: &str) -> String {
    Path::new(name)
        .extension()
        .and_then(|e| e.to_str())
        .filter(|e| !e.is_empty() && e.bytes().all(|b| b.is_ascii_alphanumeric()))
        .map(str::to_ascii_lowercase)
        .unwrap_or_else(|| "zip".to_string())
}

/// The two members of an upload archive.
struct UploadContents {
    recording: String,
    annotations: String,
    samples: usize,
    first_ms: i64,
    last_ms: i64,
}

pub struct Store {
    root: PathBuf,
    classes: ClassSet,
    log: Mutex<()>,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>, classes: ClassSet) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("uploads"))?;
        fs::create_dir_all(root.join("recordings"))?;
        Ok(Self {
            root,
            classes,
            log: Mutex::new(()),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn log_path(&self) -> PathBuf {
        self.root.join("uploads.log")
    }

    fn recording_dir(&self, id: &str) -> Result<PathBuf, ServiceError> {
        let dir = self.root.join("recordings").join(id);
        if valid_id(id) && dir.is_dir() {
            Ok(dir)
        } else {
            Err(ServiceError::NotFound(format!("no recording {id:?}")))
        }
    }

    fn unpack(&self, bytes: &[u8]) -> Result<UploadContents, ServiceError> {
        let mut archive = zip::ZipArchive::new(Cursor::new(bytes))
            .map_err(|e| ServiceError::BadRequest(format!("not a zip archive: {e}")))?;
        let mut recording = None;
        let mut annotations = None;
        let mut members = 0;
        for i in 0..archive.len() {
            let mut file = archive
                .by_index(i)
                .map_err(|e| ServiceError::BadRequest(format!("unreadable member: {e}")))?;
            if file.is_dir() {
                continue;
            }
            members += 1;
            let name = file.name().to_string();
            let mut text = String::new();
            file.read_to_string(&mut text)
                .map_err(|e| ServiceError::BadRequest(format!("{name}: {e}")))?;
            if let Ok(rec) = parse_recording(&text) {
                if recording.replace((text, rec)).is_some() {
                    return Err(ServiceError::BadRequest("archive holds two recordings".into()));
                }
            } else if parse_annotation_document(&text, &self.classes).is_ok() {
                if annotations.replace(text).is_some() {
                    return Err(ServiceError::BadRequest("archive holds two annotation documents".into()));
                }
            } else {
                return Err(ServiceError::BadRequest(format!(
                    "{name} is neither a recording CSV nor a valid annotation document"
                )));
            }
        }
        if members != 2 {
            return Err(ServiceError::BadRequest(format!("expected 2 files in the archive, found {members}")));
        }
        match (recording, annotations) {
            (Some((recording, rec)), Some(annotations)) => Ok(UploadContents {
                recording,
                annotations,
                samples: rec.samples.len(),
                first_ms: rec.samples[0].t_ms,
                last_ms: rec.samples[rec.samples.len() - 1].t_ms,
            }),
            _ => Err(ServiceError::BadRequest(
                "archive must hold one recording and one annotation document".into(),
            )),
        }
    }

    /// Validates, stores under a fresh unique name, unpacks and logs.
    pub fn accept_upload(&self, original: &str, bytes: &[u8]) -> Result<UploadRecord, ServiceError> {
        let contents = self.unpack(bytes)?;
        let ext = extension_of(original);
        let uploads = self.root.join("uploads");
        let mut rng = rand::thread_rng();
        let tmp = uploads.join(format!(".incoming-{:016x}", rng.gen::<u64>()));
        fs::File::create(&tmp)
            .and_then(|mut f| f.write_all(bytes).and_then(|_| f.sync_all()))
            .map_err(|e| {
                let _ = fs::remove_file(&tmp);
                ServiceError::from(e)
            })?;
        // hard_link refuses to overwrite, so a name collision just retries
        let (id, stored_name, received_ms) = loop {
            let ms = now_ms();
            let id = format!("{ms}-{:06x}", rng.gen_range(0..0x100_0000u32));
            let name = format!("{id}.{ext}");
            match fs::hard_link(&tmp, uploads.join(&name)) {
                Ok(()) => break (id, name, ms),
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
                Err(e) => {
                    let _ = fs::remove_file(&tmp);
                    return Err(e.into());
                }
            }
        };
        fs::remove_file(&tmp)?;

        let record = UploadRecord {
            original_filename: original.to_string(),
            stored_name,
            bytes: bytes.len() as u64,
            received_ms,
            recording_id: id.clone(),
        };
        let dir = self.root.join("recordings").join(&id);
        let staging = self.root.join("recordings").join(format!(".{id}"));
        fs::create_dir_all(&staging)?;
        fs::write(staging.join("recording.csv"), &contents.recording)?;
        fs::write(staging.join("annotations.json"), &contents.annotations)?;
        let summary = RecordingSummary {
            id: id.clone(),
            original_filename: original.to_string(),
            samples: contents.samples,
            first_ms: contents.first_ms,
            last_ms: contents.last_ms,
            spans: 0,
        };
        fs::write(staging.join("upload.json"), serde_json::to_vec_pretty(&summary).unwrap())?;
        fs::rename(&staging, &dir)?;

        let mut line = serde_json::to_string(&record).expect("record serializes");
        line.push('\n');
        let _guard = self.log.lock().unwrap_or_else(|p| p.into_inner());
        OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.log_path())?
            .write_all(line.as_bytes())?;
        Ok(record)
    }

    pub fn list(&self) -> Result<Vec<RecordingSummary>, ServiceError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(self.root.join("recordings"))? {
            let entry = entry?;
            let id = entry.file_name().to_string_lossy().into_owned();
            if !valid_id(&id) {
                continue;
            }
            let meta = fs::read(entry.path().join("upload.json"))?;
            let mut summary: RecordingSummary =
                serde_json::from_slice(&meta).map_err(|e| ServiceError::Internal(e.to_string()))?;
            summary.spans = self
                .annotations(&id)
                .ok()
                .and_then(|b| String::from_utf8(b).ok())
                .and_then(|t| parse_annotation_document(&t, &self.classes).ok())
                .map_or(0, |d| d.spans.len());
            out.push(summary);
        }
        out.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(out)
    }

    pub fn trace(&self, id: &str, q: &TraceQuery) -> Result<Trace, ServiceError> {
        let dir = self.recording_dir(id)?;
        let text = fs::read_to_string(dir.join("recording.csv"))?;
        let rec = parse_recording(&text).map_err(|e| ServiceError::Internal(e.to_string()))?;
        let lo = q.from_ms.unwrap_or(i64::MIN);
        let hi = q.to_ms.unwrap_or(i64::MAX);
        let start = rec.samples.partition_point(|s| s.t_ms < lo);
        let end = rec.samples.partition_point(|s| s.t_ms <= hi);
        Ok(downsample(&rec.samples[start..end.max(start)], q.max_points.unwrap_or(MAX_POINTS)))
    }

    pub fn annotations(&self, id: &str) -> Result<Vec<u8>, ServiceError> {
        Ok(fs::read(self.recording_dir(id)?.join("annotations.json"))?)
    }

    /// Replaces the annotation document, byte for byte, after validation.
    pub fn put_annotations(&self, id: &str, body: &[u8]) -> Result<(), ServiceError> {
        let dir = self.recording_dir(id)?;
        let text = std::str::from_utf8(body)
            .map_err(|_| ServiceError::Unprocessable("annotation document is not UTF-8".into()))?;
        parse_annotation_document(text, &self.classes).map_err(|e| ServiceError::Unprocessable(e.to_string()))?;
        let tmp = dir.join(format!(".annotations-{:016x}", rand::thread_rng().gen::<u64>()));
        fs::write(&tmp, body)?;
        fs::rename(&tmp, dir.join("annotations.json")).map_err(|e| {
            let _ = fs::remove_file(&tmp);
            ServiceError::from(e)
        })
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct TraceQuery {
    pub max_points: Option<usize>,
    pub from_ms: Option<i64>,
    pub to_ms: Option<i64>,
}

#[derive(Debug, Deserialize)]
struct UploadQuery {
    filename: Option<String>,
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))?
}

async fn upload(
    State(store): State<Arc<Store>>,
    Query(q): Query<UploadQuery>,
    body: Bytes,
) -> Result<(StatusCode, Json<UploadRecord>), ServiceError> {
    let name = q.filename.unwrap_or_else(|| "upload.zip".into());
    let record = blocking(move || store.accept_upload(&name, &body)).await?;
    Ok((StatusCode::CREATED, Json(record)))
}

async fn list(State(store): State<Arc<Store>>) -> Result<Json<Vec<RecordingSummary>>, ServiceError> {
    Ok(Json(blocking(move || store.list()).await?))
}

async fn trace(
    State(store): State<Arc<Store>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<TraceQuery>,
) -> Result<Json<Trace>, ServiceError> {
    Ok(Json(blocking(move || store.trace(&id, &q)).await?))
}

fn etag(bytes: &[u8]) -> HeaderValue {
    HeaderValue::from_str(&format!("\"{}\"", sha256_hex(bytes))).expect("hex is a valid header")
}

async fn get_annotations(
    State(store): State<Arc<Store>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Response, ServiceError> {
    let bytes = blocking(move || store.annotations(&id)).await?;
    let mut headers = HeaderMap::new();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static("application/json"));
    headers.insert(header::ETAG, etag(&bytes));
    Ok((headers, bytes).into_response())
}

async fn put_annotations(
    State(store): State<Arc<Store>>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Response, ServiceError> {
    let tag = etag(&body);
    blocking(move || store.put_annotations(&id, &body)).await?;
    Ok((StatusCode::NO_CONTENT, [(header::ETAG, tag)]).into_response())
}

async fn index() -> Html<&'static str> {
    Html(
        "<!doctype html><title>harlstm</title><h1>harlstm store</h1><ul>\
         <li>POST /upload?filename=NAME.zip</li><li>GET /recordings</li>\
         <li>GET /recordings/{id}/trace</li><li>GET|PUT /recordings/{id}/annotations</li></ul>",
    )
}

pub fn router(store: Arc<Store>, ui: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/upload", post(upload))
        .route("/recordings", get(list))
        .route("/recordings/{id}/trace", get(trace))
        .route("/recordings/{id}/annotations", get(get_annotations).put(put_annotations))
        .layer(DefaultBodyLimit::max(MAX_UPLOAD_BYTES))
        .with_state(store);
    match ui {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.route("/", get(index)),
    }
}

/// Binds and serves until the process is stopped.
pub async fn serve(args: &ServeArgs) -> io::Result<()> {
    let store = Arc::new(Store::open(&args.store, ClassSet::new(&args.classes))?);
    let addr: SocketAddr = format!("{}:{}", args.host, args.port)
        .parse()
        .map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, format!("{e}")))?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!(
        "serving store {} on http://{}",
        store.root().display(),
        listener.local_addr()?
    );
    axum::serve(listener, router(store, args.ui.as_deref())).await
}
