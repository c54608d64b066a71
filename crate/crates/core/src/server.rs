//! HTTP labeling sessions.
//!
//! A session serves one GALAXY query at a time, records the label, and moves to
//! the next query. New scores between batches arrive with
//! `PUT /sessions/{id}/scores` (GXSM body). Every mutation is appended to a
//! per-session JSON-lines log under the data directory; on startup the logs are
//! replayed, which reproduces the same state because selection is deterministic.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::engine::{GalaxySession, Query};
use crate::error::Error;
use crate::formats::{decode_gxsm, encode_gxsm, parse_scores_csv};
use crate::labels::{ClassId, ExampleId, LabeledSet};
use crate::pool_sim::id_label_fraction;
use crate::scores::ScoreMatrix;
use crate::strategies::{Provenance, Strategy};

pub const DEFAULT_BODY_LIMIT: usize = 256 << 20;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelPair {
    pub example_id: usize,
    pub class: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_strategy")]
    pub strategy: Strategy,
    #[serde(default)]
    pub class_names: Vec<String>,
    #[serde(default)]
    pub seed_labels: Vec<LabelPair>,
}

fn default_strategy() -> Strategy {
    Strategy::Galaxy
}

/// Body of `POST /sessions`. Exactly one of `scores` (rows), `scores_csv`
/// (inline CSV text) or `scores_path` (server-side GXSM file) must be given.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateRequest {
    #[serde(default)]
    pub scores: Option<Vec<Vec<f32>>>,
    #[serde(default)]
    pub scores_csv: Option<String>,
    #[serde(default)]
    pub scores_path: Option<PathBuf>,
    #[serde(default)]
    pub meta: BTreeMap<usize, String>,
    pub config: Option<SessionConfig>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct LabelRequest {
    pub example_id: usize,
    pub class: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
enum Event {
    Created {
        config: SessionConfig,
        /// Pairs rather than a map: tagged enums cannot read integer keys.
        meta: Vec<(usize, String)>,
        scores_file: String,
    },
    Label {
        example_id: usize,
        class: usize,
    },
    Scores {
        batch: usize,
        scores_file: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SessionState {
    AwaitingLabel,
    BatchComplete,
    Exhausted,
}

#[derive(Debug, Clone, Serialize)]
struct HistoryEntry {
    example_id: usize,
    class: usize,
    provenance: Provenance,
    batch: usize,
}

struct Session {
    id: String,
    config: SessionConfig,
    meta: BTreeMap<usize, String>,
    n: usize,
    k: usize,
    batch: usize,
    engine: Option<GalaxySession<ChaCha8Rng>>,
    labeled: LabeledSet,
    history: Vec<HistoryEntry>,
    log: Option<PathBuf>,
}

/// A request failure with its HTTP status.
#[derive(Debug)]
pub struct ApiError(StatusCode, String);

impl ApiError {
    fn bad(msg: impl Into<String>) -> Self {
        Self(StatusCode::BAD_REQUEST, msg.into())
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            Error::PoolExhausted => StatusCode::CONFLICT,
            _ => StatusCode::BAD_REQUEST,
        };
        Self(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

fn batch_rng(seed: u64, batch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch as u64);
    rng
}

impl Session {
    fn start(
        id: String,
        config: SessionConfig,
        meta: BTreeMap<usize, String>,
        scores: &ScoreMatrix,
    ) -> ApiResult<Self> {
        if config.batch_size == 0 {
            return Err(ApiError::bad("batch_size must be >= 1"));
        }
        if config.strategy != Strategy::Galaxy {
            return Err(ApiError::bad("labeling sessions run the galaxy strategy only"));
        }
        if !config.class_names.is_empty() && config.class_names.len() != scores.k() {
            return Err(ApiError::bad(format!(
                "{} class names for K={}",
                config.class_names.len(),
                scores.k()
            )));
        }
        if let Some((&i, _)) = meta.iter().find(|(&i, _)| i >= scores.n()) {
            return Err(ApiError::bad(format!("meta for example {i} outside N={}", scores.n())));
        }
        let labeled = LabeledSet::from_pairs(
            config
                .seed_labels
                .iter()
                .map(|p| (ExampleId(p.example_id), ClassId(p.class))),
        )?;
        labeled.validate(scores.n(), scores.k())?;
        let mut s = Self {
            id,
            n: scores.n(),
            k: scores.k(),
            config,
            meta,
            batch: 0,
            engine: None,
            labeled,
            history: Vec::new(),
            log: None,
        };
        s.begin_batch(scores)?;
        Ok(s)
    }

    fn begin_batch(&mut self, scores: &ScoreMatrix) -> ApiResult<()> {
        if (scores.n(), scores.k()) != (self.n, self.k) {
            return Err(ApiError::bad(format!(
                "scores are {}x{}, session is {}x{}",
                scores.n(),
                scores.k(),
                self.n,
                self.k
            )));
        }
        let rng = batch_rng(self.config.seed, self.batch);
        let mut engine = GalaxySession::new(scores, self.labeled.clone(), self.config.batch_size, rng)?;
        engine.next_query()?;
        self.engine = Some(engine);
        Ok(())
    }

    fn state(&self) -> SessionState {
        match &self.engine {
            _ if self.labeled.len() == self.n => SessionState::Exhausted,
            Some(e) if e.pending().is_some() => SessionState::AwaitingLabel,
            _ => SessionState::BatchComplete,
        }
    }

    fn pending(&self) -> Option<&Query> {
        self.engine.as_ref().and_then(|e| e.pending())
    }

    fn next_json(&self) -> serde_json::Value {
        match self.pending() {
            Some(q) => json!({
                "example_id": q.id.0,
                "meta": self.meta.get(&q.id.0),
                "provenance": q.provenance,
                "ord": q.ord,
            }),
            None => serde_json::Value::Null,
        }
    }

    fn id_classes(&self) -> Vec<ClassId> {
        (0..self.k - 1).map(ClassId).collect()
    }

    fn summary_json(&self) -> serde_json::Value {
        let batch_labels: LabeledSet = LabeledSet::from_pairs(
            self.history
                .iter()
                .filter(|h| h.batch == self.batch)
                .map(|h| (ExampleId(h.example_id), ClassId(h.class))),
        )
        .expect("history has unique ids");
        json!({
            "batch": self.batch,
            "batch_labels": batch_labels.len(),
            "id_label_fraction": id_label_fraction(&batch_labels, &self.id_classes()),
            "labels_used": self.labeled.len(),
        })
    }

    fn step_json(&self) -> serde_json::Value {
        match self.state() {
            SessionState::AwaitingLabel => json!({ "state": SessionState::AwaitingLabel, "next": self.next_json() }),
            state => json!({ "state": state, "summary": self.summary_json() }),
        }
    }

    fn snapshot(&self) -> serde_json::Value {
        let ids = self.id_classes();
        json!({
            "session_id": self.id,
            "state": self.state(),
            "n": self.n,
            "k": self.k,
            "config": self.config,
            "batch": self.batch,
            "batch_progress": self.engine.as_ref().map_or(0, |e| e.issued().len()),
            "ord": self.engine.as_ref().map_or(1, |e| e.ord()),
            "history": self.history,
            "next": self.next_json(),
            "metrics": {
                "labels_used": self.labeled.len(),
                "id_labels": self.labeled.iter().filter(|(_, c)| ids.contains(c)).count(),
                "id_label_fraction": id_label_fraction(&self.labeled, &ids),
            },
        })
    }

    fn submit(&mut self, req: &LabelRequest) -> ApiResult<()> {
        let Some(q) = self.pending().cloned() else {
            return Err(ApiError(
                StatusCode::CONFLICT,
                format!("no query is outstanding; example {} is stale", req.example_id),
            ));
        };
        if q.id.0 != req.example_id {
            return Err(ApiError(
                StatusCode::CONFLICT,
                format!("example {} is not the outstanding query {}", req.example_id, q.id),
            ));
        }
        if req.class >= self.k {
            return Err(ApiError::bad(format!("class {} out of range for K={}", req.class, self.k)));
        }
        let engine = self.engine.as_mut().expect("pending implies engine");
        engine.submit(q.id, ClassId(req.class))?;
        engine.next_query()?;
        self.labeled.insert(q.id, ClassId(req.class))?;
        self.history.push(HistoryEntry {
            example_id: req.example_id,
            class: req.class,
            provenance: q.provenance,
            batch: self.batch,
        });
        Ok(())
    }

    fn new_scores(&mut self, scores: &ScoreMatrix) -> ApiResult<()> {
        if self.state() == SessionState::AwaitingLabel {
            return Err(ApiError(
                StatusCode::CONFLICT,
                "the current batch still has an outstanding query".into(),
            ));
        }
        if self.state() == SessionState::Exhausted {
            return Err(ApiError(StatusCode::CONFLICT, "every example is labeled".into()));
        }
        self.batch += 1;
        if let Err(e) = self.begin_batch(scores) {
            self.batch -= 1;
            return Err(e);
        }
        Ok(())
    }

    fn append(&self, event: &Event) -> ApiResult<()> {
        let Some(path) = &self.log else { return Ok(()) };
        let io = |e: std::io::Error| ApiError::from(Error::io(path, e));
        let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
        let line = serde_json::to_string(event).expect("events serialize");
        writeln!(f, "{line}").map_err(io)?;
        f.sync_data().map_err(io)
    }
}

/// Shared server state.
#[derive(Clone, Default)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Arc<Mutex<Session>>>>>,
    data_dir: Option<PathBuf>,
}

impl AppState {
    /// In-memory state; nothing is persisted.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// State persisted under `dir`; existing session logs are replayed.
    pub fn open(dir: &Path) -> crate::Result<Self> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let state = Self {
            sessions: Arc::default(),
            data_dir: Some(dir.to_path_buf()),
        };
        let mut logs: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        logs.sort();
        for log in logs {
            match replay(dir, &log) {
                Ok(session) => {
                    state
                        .sessions
                        .write()
                        .expect("session map lock")
                        .insert(session.id.clone(), Arc::new(Mutex::new(session)));
                }
                Err(e) => log::warn!("skipping session log {}: {}", log.display(), e.1),
            }
        }
        Ok(state)
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().expect("session map lock").keys().cloned().collect();
        ids.sort();
        ids
    }

    fn get(&self, id: &str) -> ApiResult<Arc<Mutex<Session>>> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("unknown session {id:?}")))
    }

    fn save_scores(&self, name: &str, scores: &ScoreMatrix) -> ApiResult<()> {
        if let Some(dir) = &self.data_dir {
            let path = dir.join(name);
            fs::write(&path, encode_gxsm(scores)).map_err(|e| ApiError::from(Error::io(&path, e)))?;
        }
        Ok(())
    }
}

fn replay(dir: &Path, log: &Path) -> ApiResult<Session> {
    let io = |e: std::io::Error| ApiError::from(Error::io(log, e));
    let id = log
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| ApiError::bad("bad log name"))?
        .to_string();
    let reader = BufReader::new(File::open(log).map_err(io)?);
    let mut session: Option<Session> = None;
    let read_scores = |name: &str| -> ApiResult<ScoreMatrix> {
        let path = dir.join(name);
        Ok(decode_gxsm(&fs::read(&path).map_err(|e| ApiError::from(Error::io(&path, e)))?)?)
    };
    for line in reader.lines() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let event: Event = serde_json::from_str(&line).map_err(|e| ApiError::bad(e.to_string()))?;
        match (event, session.as_mut()) {
            (Event::Created { config, meta, scores_file }, None) => {
                session = Some(Session::start(id.clone(), config, meta.into_iter().collect(), &read_scores(&scores_file)?)?);
            }
            (Event::Label { example_id, class }, Some(s)) => s.submit(&LabelRequest { example_id, class })?,
            (Event::Scores { scores_file, .. }, Some(s)) => s.new_scores(&read_scores(&scores_file)?)?,
            _ => return Err(ApiError::bad("event log out of order")),
        }
    }
    let mut session = session.ok_or_else(|| ApiError::bad("empty event log"))?;
    session.log = Some(log.to_path_buf());
    Ok(session)
}

fn new_session_id() -> String {
    format!("{:016x}", rand::random::<u64>())
}

async fn create_session(
    State(app): State<AppState>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<serde_json::Value>)> {
    let req: CreateRequest = serde_json::from_slice(&body).map_err(|e| ApiError::bad(e.to_string()))?;
    let config = req.config.ok_or_else(|| ApiError::bad("missing config"))?;
    let scores = match (req.scores, req.scores_csv, req.scores_path) {
        (Some(rows), None, None) => ScoreMatrix::from_rows(&rows)?,
        (None, Some(csv), None) => parse_scores_csv(csv.as_bytes())?,
        (None, None, Some(path)) => crate::formats::read_gxsm(&path)?,
        _ => return Err(ApiError::bad("give exactly one of scores, scores_csv, scores_path")),
    };
    let id = new_session_id();
    let meta = req.meta;
    let mut session = Session::start(id.clone(), config.clone(), meta.clone(), &scores)?;
    if let Some(dir) = &app.data_dir {
        let scores_file = format!("{id}.batch0.gxsm");
        app.save_scores(&scores_file, &scores)?;
        session.log = Some(dir.join(format!("{id}.jsonl")));
        session.append(&Event::Created {
            config,
            meta: meta.into_iter().collect(),
            scores_file,
        })?;
    }
    let body = json!({
        "session_id": id,
        "state": session.state(),
        "next": session.next_json(),
    });
    app.sessions
        .write()
        .expect("session map lock")
        .insert(id, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(body)))
}

async fn submit_label(
    State(app): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Json<serde_json::Value>> {
    let session = app.get(&id)?;
    let req: LabelRequest = serde_json::from_slice(&body).map_err(|e| ApiError::bad(e.to_string()))?;
    let mut s = session.lock().expect("session lock");
    s.submit(&req)?;
    s.append(&Event::Label {
        example_id: req.example_id,
        class: req.class,
    })?;
    Ok(Json(s.step_json()))
}

async fn session_state(
    State(app): State<AppState>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Json<serde_json::Value>> {
    let session = app.get(&id)?;
    let s = session.lock().expect("session lock");
    Ok(Json(s.snapshot()))
}

async fn update_scores(
    State(app): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Json<serde_json::Value>> {
    let session = app.get(&id)?;
    let scores = decode_gxsm(&body)?;
    let mut s = session.lock().expect("session lock");
    s.new_scores(&scores)?;
    let scores_file = format!("{id}.batch{}.gxsm", s.batch);
    app.save_scores(&scores_file, &scores)?;
    s.append(&Event::Scores {
        batch: s.batch,
        scores_file,
    })?;
    Ok(Json(s.step_json()))
}

/// Routes with the default body limit.
pub fn router(state: AppState) -> Router {
    router_with_limit(state, DEFAULT_BODY_LIMIT)
}

pub fn router_with_limit(state: AppState, max_body: usize) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_state))
        .route("/sessions/{id}/labels", post(submit_label))
        .route("/sessions/{id}/scores", put(update_scores))
        .layer(DefaultBodyLimit::max(max_body))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(port: u16, data_dir: Option<&Path>) -> crate::Result<()> {
    let state = match data_dir {
        Some(d) => AppState::open(d)?,
        None => AppState::in_memory(),
    };
    let addr = std::net::SocketAddr::from(([0, 0, 0, 0], port));
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| Error::io(Path::new(&addr.to_string()), e))?;
    log::info!("listening on {addr}");
    axum::serve(listener, router(state))
        .await
        .map_err(|e| Error::io(Path::new(&addr.to_string()), e))
}
