//! The `/v1` session API. Bodies are JSON wrapped in an [`ApiEnvelope`].
//!
//! Sessions live in memory and expire after a configurable idle period.
//! Requests on one session are serialized by a per-session lock; different
//! sessions never wait on each other.

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use sqlclarify::candidate::{CandidateDistribution, CandidateId};
use sqlclarify::clarify::{
    Answer, CandidateSummary, Choice, ClarificationQuestion, ClarifyError, FinalResult, InteractionMode, SessionConfig,
    SessionState, SessionStatus, TurnRecord,
};
use sqlclarify::eig::{SelectionStrategy, StrategyKind};
use sqlclarify::source::{
    generate_candidates, FixtureCandidate, FixtureInstance, GenerationMetadata, LlmBackend, Schema, SourceError,
};
use sqlclarify::sql::{duplicate_collapse, VariableId};

use crate::explain::ExplainTable;

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EnvelopeStatus {
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

/// Exactly one of `payload` and `error` is present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiEnvelope {
    pub status: EnvelopeStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

impl ApiEnvelope {
    pub fn ok(payload: impl Serialize) -> Self {
        Self {
            status: EnvelopeStatus::Ok,
            payload: Some(serde_json::to_value(payload).expect("payloads serialize")),
            error: None,
        }
    }

    pub fn error(code: &str, message: impl Into<String>) -> Self {
        Self {
            status: EnvelopeStatus::Error,
            payload: None,
            error: Some(ErrorBody { code: code.into(), message: message.into() }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into() }
    }

    fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    fn conflict(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, code, message)
    }

    fn envelope(&self) -> ApiEnvelope {
        ApiEnvelope::error(self.code, self.message.clone())
    }
}

impl From<SourceError> for ApiError {
    fn from(e: SourceError) -> Self {
        match e {
            SourceError::BackendUnavailable(_) | SourceError::BackendProtocol(_) => {
                Self::new(StatusCode::BAD_GATEWAY, "BACKEND_ERROR", e.to_string())
            }
            other => Self::bad_request("INVALID_SOURCE", other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.envelope())).into_response()
    }
}

type ApiResult = Result<Response, ApiError>;

fn ok(payload: impl Serialize) -> ApiResult {
    Ok((StatusCode::OK, Json(ApiEnvelope::ok(payload))).into_response())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LlmSettings {
    pub endpoint: String,
    pub model: String,
    pub api_key_env: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ServiceOptions {
    /// Instances sessions can be created from by id.
    pub fixtures: Vec<FixtureInstance>,
    /// Backend for free questions; without it only fixtures and inline
    /// candidates are accepted.
    pub llm: Option<LlmSettings>,
    pub idle_timeout: Duration,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        Self { fixtures: Vec::new(), llm: None, idle_timeout: Duration::from_secs(1800) }
    }
}

/// A reply recorded per answered turn, replayed verbatim on retries.
#[derive(Debug, Clone)]
struct StoredReply {
    status: StatusCode,
    envelope: ApiEnvelope,
}

struct Entry {
    id: String,
    created_at: u64,
    source: String,
    generation: Option<GenerationMetadata>,
    state: SessionState,
    replies: Vec<StoredReply>,
}

struct Slot {
    last_used: Mutex<Instant>,
    entry: tokio::sync::Mutex<Entry>,
}

impl Slot {
    fn touch(&self) {
        *self.last_used.lock().expect("clock lock") = Instant::now();
    }

    fn idle_for(&self) -> Duration {
        self.last_used.lock().expect("clock lock").elapsed()
    }
}

struct Inner {
    fixtures: BTreeMap<String, FixtureInstance>,
    llm: Option<LlmSettings>,
    idle_timeout: Duration,
    sessions: Mutex<HashMap<String, Arc<Slot>>>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    pub fn new(options: ServiceOptions) -> Self {
        let fixtures = options.fixtures.into_iter().map(|f| (f.instance_id.clone(), f)).collect();
        Self {
            inner: Arc::new(Inner {
                fixtures,
                llm: options.llm,
                idle_timeout: options.idle_timeout,
                sessions: Mutex::new(HashMap::new()),
            }),
        }
    }

    pub fn session_count(&self) -> usize {
        self.inner.sessions.lock().expect("store lock").len()
    }

    /// Drops sessions idle for longer than the timeout; returns how many.
    pub fn purge_expired(&self) -> usize {
        let mut sessions = self.inner.sessions.lock().expect("store lock");
        let before = sessions.len();
        sessions.retain(|_, slot| slot.idle_for() <= self.inner.idle_timeout);
        before - sessions.len()
    }

    fn lookup(&self, id: &str) -> Result<Arc<Slot>, ApiError> {
        let mut sessions = self.inner.sessions.lock().expect("store lock");
        let slot = sessions
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "UNKNOWN_SESSION", format!("no session '{id}'")))?;
        if slot.idle_for() > self.inner.idle_timeout {
            sessions.remove(id);
            return Err(ApiError::new(StatusCode::NOT_FOUND, "SESSION_EXPIRED", format!("session '{id}' expired")));
        }
        slot.touch();
        Ok(slot)
    }

    fn insert(&self, entry: Entry) {
        let slot = Arc::new(Slot { last_used: Mutex::new(Instant::now()), entry: tokio::sync::Mutex::new(entry) });
        let id = slot.entry.try_lock().expect("fresh lock").id.clone();
        self.inner.sessions.lock().expect("store lock").insert(id, slot);
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/instances", get(list_instances))
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session).delete(delete_session))
        .route("/v1/sessions/{id}/answer", post(post_answer))
        .route("/v1/sessions/{id}/explain", get(explain_session))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "NOT_FOUND", "no such endpoint") })
        .with_state(state)
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(addr: &str, options: ServiceOptions) -> anyhow::Result<()> {
    let state = AppState::new(options);
    let purger = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(Duration::from_secs(30));
        loop {
            tick.tick().await;
            let n = purger.purge_expired();
            if n > 0 {
                log::info!("expired {n} idle session(s)");
            }
        }
    });
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request("MALFORMED_BODY", e.to_string()))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigBody {
    pub strategy: Option<String>,
    pub tau: Option<f64>,
    pub max_turns: Option<usize>,
    pub mode: Option<String>,
    pub seed: Option<u64>,
}

impl ConfigBody {
    fn resolve(&self) -> Result<SessionConfig, ApiError> {
        let invalid = |m: String| ApiError::bad_request("INVALID_CONFIG", m);
        let defaults = SessionConfig::default();
        let kind = match &self.strategy {
            Some(s) => s.parse::<StrategyKind>().map_err(invalid)?,
            None => defaults.strategy.kind,
        };
        let mode = match &self.mode {
            Some(m) => m.parse::<InteractionMode>().map_err(invalid)?,
            None => defaults.mode,
        };
        let config = SessionConfig {
            strategy: SelectionStrategy::new(kind, self.seed.unwrap_or(0)),
            tau: self.tau.unwrap_or(defaults.tau),
            max_turns: self.max_turns.unwrap_or(defaults.max_turns),
            mode,
        };
        config.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(config)
    }
}

/// Exactly one source: a fixture `instance_id`, inline `candidates` (with
/// `question`), or `question` + `schema` for the configured model.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSessionBody {
    pub instance_id: Option<String>,
    pub question: Option<String>,
    pub candidates: Option<Vec<FixtureCandidate>>,
    pub schema: Option<Schema>,
    /// Candidates to request from the model.
    pub n: Option<usize>,
    #[serde(default)]
    pub config: ConfigBody,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnswerBody {
    /// Zero-based turn being answered; replays of a recorded turn return
    /// the stored reply.
    pub turn: Option<usize>,
    pub variable_id: Option<VariableId>,
    pub choice: Option<Choice>,
    /// Zero-based index into the pending question's options.
    pub option: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionView {
    pub session_id: String,
    pub created_at: u64,
    pub source: String,
    pub status: SessionStatus,
    /// Answers recorded so far.
    pub turn: usize,
    pub question: String,
    pub candidates: Vec<CandidateSummary>,
    pub entropy: f64,
    pub entropy_trace: Vec<f64>,
    pub pending_question: Option<ClarificationQuestion>,
    pub result: Option<FinalResult>,
    pub failure: Option<String>,
    pub turns: Vec<TurnRecord>,
    pub config: SessionConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generation: Option<GenerationMetadata>,
}

fn view(entry: &Entry) -> SessionView {
    let s = &entry.state;
    let t = s.transcript();
    SessionView {
        session_id: entry.id.clone(),
        created_at: entry.created_at,
        source: entry.source.clone(),
        status: s.status(),
        turn: s.turns_taken(),
        question: s.distribution().question().to_string(),
        candidates: s.distribution().iter().map(CandidateSummary::of).collect(),
        entropy: s.distribution().entropy(),
        entropy_trace: t.entropy_trace.clone(),
        pending_question: s.pending_question().cloned(),
        result: s.outcome().cloned(),
        failure: s.failure().map(str::to_string),
        turns: t.turns.clone(),
        config: *s.config(),
        generation: entry.generation.clone(),
    }
}

async fn list_instances(State(app): State<AppState>) -> ApiResult {
    let list: Vec<Value> = app
        .inner
        .fixtures
        .values()
        .map(|f| {
            serde_json::json!({
                "instance_id": f.instance_id,
                "question": f.question,
                "candidates": f.candidates.len(),
                "difficulty": f.difficulty,
            })
        })
        .collect();
    ok(serde_json::json!({ "instances": list }))
}

fn inline_distribution(question: &str, candidates: &[FixtureCandidate]) -> Result<CandidateDistribution, ApiError> {
    let dist = CandidateDistribution::from_weighted(
        question,
        candidates.iter().enumerate().map(|(i, c)| (CandidateId(i as u32 + 1), c.sql_text.as_str(), c.weight)),
    )
    .map_err(|e| ApiError::bad_request("INVALID_CANDIDATES", e.to_string()))?;
    Ok(duplicate_collapse(&dist))
}

async fn build_distribution(
    app: &AppState,
    body: CreateSessionBody,
) -> Result<(CandidateDistribution, String, Option<GenerationMetadata>), ApiError> {
    match (&body.instance_id, &body.candidates) {
        (Some(_), Some(_)) => Err(ApiError::bad_request("INVALID_SOURCE", "give either instance_id or candidates")),
        (Some(id), None) => {
            let inst = app.inner.fixtures.get(id).ok_or_else(|| {
                ApiError::bad_request("UNKNOWN_INSTANCE", format!("no fixture instance '{id}'"))
            })?;
            let dist = inst.distribution().map_err(|e| ApiError::bad_request("INVALID_SOURCE", e.to_string()))?;
            Ok((dist, format!("fixture:{id}"), None))
        }
        (None, Some(candidates)) => {
            let question = body.question.clone().unwrap_or_default();
            Ok((inline_distribution(&question, candidates)?, "inline".into(), None))
        }
        (None, None) => {
            let (Some(question), Some(schema)) = (body.question, body.schema) else {
                return Err(ApiError::bad_request(
                    "INVALID_SOURCE",
                    "a session needs instance_id, candidates, or question and schema",
                ));
            };
            let llm = app
                .inner
                .llm
                .clone()
                .ok_or_else(|| ApiError::bad_request("NO_BACKEND", "the service has no generation backend"))?;
            let n = body.n.unwrap_or(8);
            let generated = tokio::task::spawn_blocking(move || {
                let mut backend = LlmBackend::http(&llm.endpoint, &llm.model, llm.api_key_env.as_deref());
                generate_candidates(&mut backend, &question, &schema, n)
            })
            .await
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e.to_string()))??;
            Ok((generated.distribution, "llm".into(), Some(generated.metadata)))
        }
    }
}

async fn create_session(State(app): State<AppState>, body: Bytes) -> ApiResult {
    let body: CreateSessionBody = parse_body(&body)?;
    let config = body.config.resolve()?;
    let (dist, source, generation) = build_distribution(&app, body).await?;
    let mut state = SessionState::new(config, dist).map_err(|e| ApiError::bad_request("INVALID_CONFIG", e.to_string()))?;
    state.step();
    let created_at = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let entry = Entry { id: uuid::Uuid::new_v4().to_string(), created_at, source, generation, state, replies: Vec::new() };
    let payload = view(&entry);
    app.insert(entry);
    Ok((StatusCode::CREATED, Json(ApiEnvelope::ok(payload))).into_response())
}

async fn get_session(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let slot = app.lookup(&id)?;
    let entry = slot.entry.lock().await;
    ok(view(&entry))
}

async fn delete_session(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult {
    app.lookup(&id)?;
    app.inner.sessions.lock().expect("store lock").remove(&id);
    ok(serde_json::json!({ "session_id": id, "deleted": true }))
}

fn resolve_choice(question: &ClarificationQuestion, body: &AnswerBody) -> Result<Choice, ApiError> {
    if let Some(v) = body.variable_id {
        if v != question.variable_id {
            return Err(ApiError::bad_request(
                "WRONG_VARIABLE",
                format!("the question is about {}, not {v}", question.variable_id),
            ));
        }
    }
    match (&body.choice, body.option) {
        (Some(c), None) => Ok(c.clone()),
        (None, Some(i)) => question
            .option(i)
            .map(|o| o.choice.clone())
            .ok_or_else(|| ApiError::bad_request("UNKNOWN_OPTION", format!("option {i} does not exist"))),
        _ => Err(ApiError::bad_request("MALFORMED_BODY", "give exactly one of choice and option")),
    }
}

async fn post_answer(State(app): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult {
    let body: AnswerBody = parse_body(&body)?;
    let slot = app.lookup(&id)?;
    let mut entry = slot.entry.lock().await;
    let current = entry.state.turns_taken();

    if let Some(turn) = body.turn {
        if turn < current {
            let recorded = &entry.state.transcript().turns[turn];
            let choice = resolve_choice(&recorded.question, &body)?;
            if choice == recorded.answer.chosen {
                let reply = entry.replies[turn].clone();
                return Ok((reply.status, Json(reply.envelope)).into_response());
            }
            return Err(ApiError::conflict(
                "TURN_ALREADY_ANSWERED",
                format!("turn {turn} was answered with {}", recorded.answer.chosen),
            ));
        }
        if turn > current {
            return Err(ApiError::conflict("TURN_NOT_OPEN", format!("the open turn is {current}, not {turn}")));
        }
    }
    let status = entry.state.status();
    let Some(question) = entry.state.pending_question().cloned() else {
        return Err(ApiError::conflict("NOT_AWAITING_ANSWER", format!("session is {status}")));
    };
    let choice = resolve_choice(&question, &body)?;
    let answer = Answer { variable_id: question.variable_id, chosen: choice };

    let reply = match entry.state.apply_answer(answer) {
        Ok(_) => {
            entry.state.step();
            StoredReply { status: StatusCode::OK, envelope: ApiEnvelope::ok(view(&entry)) }
        }
        Err(e @ ClarifyError::InconsistentAnswer { .. }) => StoredReply {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            envelope: ApiEnvelope::error("INCONSISTENT_ANSWER", format!("{e}; the session is now FAILED")),
        },
        Err(e @ ClarifyError::UnknownOption(_)) => return Err(ApiError::bad_request("UNKNOWN_OPTION", e.to_string())),
        Err(e) => return Err(ApiError::conflict("NOT_AWAITING_ANSWER", e.to_string())),
    };
    entry.replies.push(reply.clone());
    Ok((reply.status, Json(reply.envelope)).into_response())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplainView {
    pub session_id: String,
    pub status: SessionStatus,
    /// Present when there is nothing left to score.
    pub note: Option<String>,
    pub table: ExplainTable,
}

async fn explain_session(State(app): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let slot = app.lookup(&id)?;
    let entry = slot.entry.lock().await;
    let s = &entry.state;
    let (table, note) = match s.status() {
        SessionStatus::Finished | SessionStatus::Failed => (
            ExplainTable::build(s.distribution(), &[], None),
            Some(format!("session is {}; nothing left to ask", s.status())),
        ),
        _ => {
            let askable = s.askable_variables();
            let next = s.pending_question().map(|q| q.variable_id);
            (ExplainTable::build(s.distribution(), &askable, next), None)
        }
    };
    ok(ExplainView { session_id: entry.id.clone(), status: s.status(), note, table })
}
