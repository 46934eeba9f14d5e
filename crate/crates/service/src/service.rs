//! The service state shared by every request: sessions, ratings, the record queue and store.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use gamebot_core::agent::AgentError;
use gamebot_core::{Action, AgentDescriptor, GameConfig, GameKind, GameRecord, GameSpec, PlayerId};
use gamebot_llm::LlmContext;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Notify;
use tokio::task::JoinHandle;

use crate::elo::{Leaderboard, LeaderboardEntry, RatingDelta};
use crate::queue::{SyncQueue, DEFAULT_BATCH_SIZE, DEFAULT_FLUSH_INTERVAL};
use crate::session::{
    MoveReport, Session, SessionError, SessionManager, View, DEFAULT_SESSION_TTL,
};
use crate::store::{FileStore, RecordStore, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("unknown agent: {0}")]
    UnknownAgent(String),
    #[error("agent unavailable: {0}")]
    AgentUnavailable(String),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    pub flush_interval: Duration,
    pub batch_size: usize,
    pub session_ttl: Duration,
    pub llm: LlmContext,
}

impl ServiceConfig {
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            data_dir: data_dir.into(),
            flush_interval: DEFAULT_FLUSH_INTERVAL,
            batch_size: DEFAULT_BATCH_SIZE,
            session_ttl: DEFAULT_SESSION_TTL,
            llm: LlmContext::default(),
        }
    }
}

/// Body of a session request.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct CreateSession {
    pub game: String,
    #[serde(default)]
    pub config: Option<Value>,
    pub agent: String,
    #[serde(default)]
    pub human_seat: Option<PlayerId>,
    #[serde(default)]
    pub participant: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Parameters used when a request leaves them out.
pub fn default_params(kind: GameKind) -> Value {
    match kind {
        GameKind::TicTacToe => json!({}),
        GameKind::Nim => json!({"n": 21, "k": 3}),
        GameKind::Euclid => json!({"a": 89, "b": 55}),
        GameKind::Mancala => json!({"pits_per_side": 6, "seeds_per_pit": 4}),
    }
}

/// Resolves a game name and partial parameters into a validated spec.
pub fn resolve_spec(game: &str, params: Option<&Value>) -> Result<GameSpec, ServiceError> {
    let kind: GameKind = game
        .parse()
        .map_err(|e: gamebot_core::GameError| ServiceError::InvalidConfig(e.to_string()))?;
    let mut merged = default_params(kind);
    match params {
        None | Some(Value::Null) => {}
        Some(Value::Object(given)) => {
            let target = merged.as_object_mut().expect("defaults are objects");
            for (k, v) in given {
                if !target.contains_key(k) {
                    return Err(ServiceError::InvalidConfig(format!(
                        "unknown {kind} parameter '{k}'"
                    )));
                }
                target.insert(k.clone(), v.clone());
            }
        }
        Some(other) => {
            return Err(ServiceError::InvalidConfig(format!(
                "config must be an object, got {other}"
            )))
        }
    }
    let config: GameConfig = serde_json::from_value(json!({"game": kind.name(), "params": merged}))
        .map_err(|e| ServiceError::InvalidConfig(e.to_string()))?;
    GameSpec::new(config).map_err(|e| ServiceError::InvalidConfig(e.to_string()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecordOutcome {
    pub record_id: String,
    pub rating_delta: Vec<RatingDelta>,
    /// True when the record was already known; nothing was rated or stored again.
    pub duplicate: bool,
}

/// Replay check of every stored record, run when the store is opened.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AuditReport {
    pub records: usize,
    pub failures: Vec<(String, String)>,
}

#[derive(Default)]
struct Ratings {
    board: Leaderboard,
    by_record: HashMap<String, Vec<RatingDelta>>,
}

pub struct Service {
    config: ServiceConfig,
    store: Mutex<Box<dyn RecordStore>>,
    queue: SyncQueue,
    ratings: Mutex<Ratings>,
    sessions: SessionManager,
    wake: Notify,
    audit: AuditReport,
}

impl Service {
    /// Opens the file store under `config.data_dir` and rebuilds ratings from it.
    pub fn open(config: ServiceConfig) -> Result<Self, ServiceError> {
        let store = FileStore::open(&config.data_dir)?;
        Self::with_store(config, Box::new(store))
    }

    pub fn with_store(
        config: ServiceConfig,
        store: Box<dyn RecordStore>,
    ) -> Result<Self, ServiceError> {
        let mut ratings = Ratings::default();
        let mut audit = AuditReport::default();
        for rec in store.records()? {
            audit.records += 1;
            if let Err(e) = rec.replay() {
                audit.failures.push((rec.record_id.clone(), e.to_string()));
                continue;
            }
            let deltas = ratings.board.apply(&rec);
            ratings.by_record.insert(rec.record_id.clone(), deltas);
        }
        Ok(Service {
            queue: SyncQueue::new(config.flush_interval, config.batch_size),
            config,
            store: Mutex::new(store),
            ratings: Mutex::new(ratings),
            sessions: SessionManager::default(),
            wake: Notify::new(),
            audit,
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn audit(&self) -> &AuditReport {
        &self.audit
    }

    pub fn queue(&self) -> &SyncQueue {
        &self.queue
    }

    pub fn sessions(&self) -> &SessionManager {
        &self.sessions
    }

    /// Runs `f` with the store locked; used by tests to inject faults.
    pub fn with_store_mut<R>(&self, f: impl FnOnce(&mut dyn RecordStore) -> R) -> R {
        f(self.store.lock().unwrap().as_mut())
    }

    pub fn create_session(&self, req: &CreateSession) -> Result<(View, MoveReport), ServiceError> {
        let spec = resolve_spec(&req.game, req.config.as_ref())?;
        let descriptor: AgentDescriptor = req
            .agent
            .parse()
            .map_err(|_| ServiceError::UnknownAgent(req.agent.clone()))?;
        let agent = self
            .config
            .llm
            .build_agent(&descriptor, &spec)
            .map_err(|e| match e {
                AgentError::UnknownAgent(a) => ServiceError::UnknownAgent(a),
                e @ AgentError::Unsupported { .. } => ServiceError::AgentUnavailable(e.to_string()),
            })?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let seed = req
            .seed
            .unwrap_or_else(|| u64::from_str_radix(&id[..16], 16).expect("hex id"));
        let participant = req
            .participant
            .as_deref()
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .unwrap_or("anonymous");
        let (session, report) = Session::start(
            id,
            spec,
            agent,
            req.human_seat.unwrap_or(PlayerId::First),
            participant,
            seed,
        );
        let view = session.view();
        self.sessions.insert(session);
        if let Some(rec) = &report.record {
            self.record_result(rec.clone())?;
        }
        Ok((view, report))
    }

    /// Applies a human move. A finished game is rated and queued before this returns.
    pub fn submit_move(
        &self,
        session_id: &str,
        action: Action,
    ) -> Result<(View, MoveReport, Option<RecordOutcome>), ServiceError> {
        let handle = self.sessions.get(session_id)?;
        let mut session = handle.lock().unwrap();
        let report = session.submit(action)?;
        let rated = match &report.record {
            Some(rec) => Some(self.record_result(rec.clone())?),
            None => None,
        };
        Ok((session.view(), report, rated))
    }

    pub fn view(&self, session_id: &str) -> Result<View, ServiceError> {
        Ok(self.sessions.get(session_id)?.lock().unwrap().view())
    }

    /// Audits, rates and queues a finished game. Known record ids return their original
    /// deltas without any further effect.
    pub fn record_result(&self, record: GameRecord) -> Result<RecordOutcome, ServiceError> {
        record
            .replay()
            .map_err(|e| ServiceError::InvalidRecord(e.to_string()))?;
        let mut ratings = self.ratings.lock().unwrap();
        if let Some(deltas) = ratings.by_record.get(&record.record_id) {
            return Ok(RecordOutcome {
                record_id: record.record_id,
                rating_delta: deltas.clone(),
                duplicate: true,
            });
        }
        let deltas = ratings.board.apply(&record);
        ratings
            .by_record
            .insert(record.record_id.clone(), deltas.clone());
        let record_id = record.record_id.clone();
        if self.queue.enqueue(record) {
            self.wake.notify_one();
        }
        Ok(RecordOutcome {
            record_id,
            rating_delta: deltas,
            duplicate: false,
        })
    }

    pub fn leaderboard(&self, limit: usize) -> Vec<LeaderboardEntry> {
        self.ratings.lock().unwrap().board.ranked(limit)
    }

    pub fn rating_of(&self, participant: &str) -> Option<LeaderboardEntry> {
        self.ratings.lock().unwrap().board.get(participant).cloned()
    }

    /// Persists everything pending and rewrites the leaderboard snapshot.
    pub fn flush(&self) -> Result<usize, StoreError> {
        let n = self.queue.flush(&self.store)?;
        let entries = self.leaderboard(usize::MAX);
        self.store.lock().unwrap().write_snapshot(&entries)?;
        Ok(n)
    }

    pub fn expire_sessions(&self) -> usize {
        self.sessions
            .expire(self.config.session_ttl, Instant::now())
    }

    /// Starts the background flusher. It runs every flush interval, or as soon as a full
    /// batch is waiting.
    pub fn spawn_worker(self: &Arc<Self>) -> Worker {
        let stop = Arc::new(Notify::new());
        let svc = self.clone();
        let stop_rx = stop.clone();
        let handle = tokio::spawn(async move {
            loop {
                let stopping = tokio::select! {
                    _ = tokio::time::sleep(svc.config.flush_interval) => false,
                    _ = svc.wake.notified() => false,
                    _ = stop_rx.notified() => true,
                };
                let s = svc.clone();
                let flushed = tokio::task::spawn_blocking(move || {
                    s.expire_sessions();
                    s.flush()
                })
                .await;
                if let Ok(Err(e)) = &flushed {
                    eprintln!("flush failed, records kept for retry: {e}");
                }
                if stopping {
                    break;
                }
            }
        });
        Worker { stop, handle }
    }
}

pub struct Worker {
    stop: Arc<Notify>,
    handle: JoinHandle<()>,
}

impl Worker {
    /// Stops the loop after one final flush.
    pub async fn shutdown(self) {
        self.stop.notify_one();
        let _ = self.handle.await;
    }
}
