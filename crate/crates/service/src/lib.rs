//! HTTP API for running a live evaluation: agents are registered with one
//! video per evaluation seed, raters lease matches chosen by the scheduler,
//! judgments are appended to the event log, and leaderboards and final
//! standings are read back from the derived ratings.
//!
//! Field names and status codes are listed in `docs/API.md`.

pub mod config;
mod error;

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, MutexGuard};

use arena_core::store::{
    AgentRegistration, Assignment, AssignmentPolicy, CalibrationExample, JudgmentSubmission, MatchRecord, Question,
    RatingStream, Slot, Store, CALIBRATION_EXAMPLES_REQUIRED,
};
use arena_core::{
    AgentId, MatchId, Outcome, ParticipantId, QuestionId, RaterClass, RaterId, Rating, ScoreKind, SeedId, TaskId,
};
use axum::body::Bytes;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use config::{ConfigError, EngineConfig, ServiceSettings, StoreSettings};
pub use error::ApiError;

pub const API_SCHEMA_VERSION: u32 = 1;

/// Source of the current time, so tests can move it by hand.
pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

#[derive(Clone, Debug)]
pub struct ManualClock(Arc<Mutex<DateTime<Utc>>>);

impl ManualClock {
    pub fn new(at: DateTime<Utc>) -> Self {
        Self(Arc::new(Mutex::new(at)))
    }

    pub fn set(&self, at: DateTime<Utc>) {
        *self.0.lock().unwrap_or_else(|e| e.into_inner()) = at;
    }

    pub fn advance(&self, by: chrono::Duration) {
        let mut t = self.0.lock().unwrap_or_else(|e| e.into_inner());
        *t += by;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> DateTime<Utc> {
        *self.0.lock().unwrap_or_else(|e| e.into_inner())
    }
}

struct Arena {
    store: Store,
    slot_rng: StdRng,
}

/// Shared handle behind every route. Mutations go through one lock, which is
/// the store's single-writer contract.
#[derive(Clone)]
pub struct AppState {
    arena: Arc<Mutex<Arena>>,
    settings: Arc<ServiceSettings>,
    policy: Arc<AssignmentPolicy>,
    clock: Arc<dyn Clock>,
}

impl AppState {
    pub fn new(store: Store, config: &EngineConfig, clock: Arc<dyn Clock>) -> Self {
        Self {
            arena: Arc::new(Mutex::new(Arena {
                store,
                slot_rng: StdRng::seed_from_u64(config.service.slot_seed),
            })),
            settings: Arc::new(config.service.clone()),
            policy: Arc::new(config.assignment_policy()),
            clock,
        }
    }

    /// Open the configured store (replaying its log) and apply the task list.
    pub fn from_config(config: &EngineConfig, clock: Arc<dyn Clock>) -> Result<Self, ApiError> {
        let mut store = match &config.store.dir {
            Some(dir) => Store::open(dir, config.store_config())?,
            None => Store::in_memory(config.store_config()),
        };
        for task in &config.tasks {
            store.configure_task(task.clone())?;
        }
        Ok(Self::new(store, config, clock))
    }

    fn lock(&self) -> MutexGuard<'_, Arena> {
        self.arena.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Run `f` with read access to the store.
    pub fn with_store<T>(&self, f: impl FnOnce(&Store) -> T) -> T {
        f(&self.lock().store)
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/agents", post(register_agent))
        .route("/matches/next", get(next_match))
        .route("/raters/{rater_id}/calibration/{task_id}", post(calibrate))
        .route("/judgments", post(submit_judgment))
        .route("/leaderboard/{task_id}", get(provisional_leaderboard))
        .route("/leaderboard/{task_id}/official", get(official_leaderboard))
        .route("/standings/final", get(final_standings))
        .route("/participants/{participant_id}/reciprocity", get(reciprocity))
        .route("/tasks", get(list_tasks))
        .route("/tasks/{task_id}", get(task_info))
        .route("/health", get(health))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state)
}

/// Bind and serve until the process is stopped.
pub async fn serve(state: AppState, bind: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    axum::serve(listener, router(state)).await
}

async fn require_token(State(state): State<AppState>, request: Request, next: Next) -> Response {
    if let Some(token) = &state.settings.auth_token {
        let presented = request
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if presented != Some(token.as_str()) {
            return ApiError::Unauthorized.into_response();
        }
    }
    next.run(request).await
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ApiError::BadRequest(if path == "." {
            e.inner().to_string()
        } else {
            format!("{path}: {}", e.inner())
        })
    })
}

fn with_version(body: impl Serialize) -> Value {
    let mut value = serde_json::to_value(body).unwrap_or(Value::Null);
    if let Value::Object(map) = &mut value {
        map.insert("schemaVersion".into(), API_SCHEMA_VERSION.into());
    }
    value
}

async fn health() -> Json<Value> {
    Json(json!({ "schemaVersion": API_SCHEMA_VERSION, "status": "ok" }))
}

async fn register_agent(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let reg: AgentRegistration = parse_body(&body)?;
    state.lock().store.register_agent(reg.clone())?;
    Ok((StatusCode::CREATED, Json(with_version(json!({ "agent": reg })))).into_response())
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct NextMatchQuery {
    rater_id: RaterId,
    task_id: TaskId,
    #[serde(default = "public")]
    rater_class: RaterClass,
}

fn public() -> RaterClass {
    RaterClass::Public
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct CalibrationPayload<'a> {
    task_id: &'a TaskId,
    description: &'a str,
    examples: &'a [CalibrationExample],
    examples_required: usize,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct VideoRef<'a> {
    video: &'a str,
}

/// What a rater sees: the two videos in display order, never the agents.
#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct Lease<'a> {
    calibration_required: bool,
    match_id: &'a MatchId,
    rater_id: &'a RaterId,
    task_id: &'a TaskId,
    eval_seed: &'a SeedId,
    expires_at: DateTime<Utc>,
    /// True when the second agent of the match is shown on the left.
    swapped: bool,
    left: VideoRef<'a>,
    right: VideoRef<'a>,
    description: &'a str,
    questions: &'a [Question],
}

fn lease_body(record: &MatchRecord, description: &str, questions: &[Question]) -> Value {
    let swapped = record.left == Slot::Second;
    let (left, right) = if swapped {
        (&record.video_b, &record.video_a)
    } else {
        (&record.video_a, &record.video_b)
    };
    with_version(Lease {
        calibration_required: false,
        match_id: &record.match_id,
        rater_id: &record.rater_id,
        task_id: &record.task_id,
        eval_seed: &record.eval_seed,
        expires_at: record.expires_at,
        swapped,
        left: VideoRef { video: left },
        right: VideoRef { video: right },
        description,
        questions,
    })
}

async fn next_match(State(state): State<AppState>, Query(q): Query<NextMatchQuery>) -> Result<Response, ApiError> {
    let now = state.clock.now();
    let mut arena = state.lock();
    let Arena { store, slot_rng } = &mut *arena;
    let assignment = store.assign_match(&q.task_id, &q.rater_id, q.rater_class, &state.policy, now, slot_rng)?;
    let task = store.task(&q.task_id).expect("assignment checked the task");
    let response = match assignment {
        Assignment::NoneAvailable => StatusCode::NO_CONTENT.into_response(),
        Assignment::CalibrationRequired => Json(with_version(json!({
            "calibrationRequired": true,
            "raterId": q.rater_id,
            "calibration": CalibrationPayload {
                task_id: &task.task_id,
                description: &task.description,
                examples: &task.calibration,
                examples_required: CALIBRATION_EXAMPLES_REQUIRED.min(task.calibration.len()),
            },
        })))
        .into_response(),
        Assignment::Leased { record, .. } => Json(lease_body(&record, &task.description, &task.questions)).into_response(),
    };
    Ok(response)
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct CalibrationBody {
    acknowledged_description: bool,
    reviewed_examples: Vec<String>,
}

async fn calibrate(
    State(state): State<AppState>,
    Path((rater_id, task_id)): Path<(RaterId, TaskId)>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let body: CalibrationBody = parse_body(&body)?;
    state
        .lock()
        .store
        .calibrate(&task_id, &rater_id, body.acknowledged_description, &body.reviewed_examples)?;
    Ok(Json(with_version(json!({
        "raterId": rater_id,
        "taskId": task_id,
        "calibrated": true,
    }))))
}

/// The rater's verdict in display terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Choice {
    Left,
    Right,
    Tie,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct JudgmentBody {
    match_id: MatchId,
    rater_id: RaterId,
    #[serde(default = "public")]
    rater_class: RaterClass,
    choice: Choice,
    #[serde(default)]
    questionnaire: BTreeMap<QuestionId, String>,
    idempotency_key: String,
}

fn outcome_of(choice: Choice, left: Slot) -> Outcome {
    match (choice, left) {
        (Choice::Tie, _) => Outcome::Draw,
        (Choice::Left, Slot::First) | (Choice::Right, Slot::Second) => Outcome::FirstWins,
        (Choice::Left, Slot::Second) | (Choice::Right, Slot::First) => Outcome::SecondWins,
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct RatedAgent<'a> {
    agent_id: &'a AgentId,
    mu: f64,
    sigma: f64,
    conservative: f64,
}

async fn submit_judgment(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let body: JudgmentBody = parse_body(&body)?;
    let now = state.clock.now();
    let mut arena = state.lock();
    let store = &mut arena.store;
    // The outcome is defined relative to the match, so unknown matches fail here.
    let record = store
        .match_record(&body.match_id)
        .cloned()
        .ok_or_else(|| ApiError::from(arena_core::StoreError::NotFound(format!("unknown match {}", body.match_id))))?;
    let ack = store.append_judgment(
        JudgmentSubmission {
            match_id: body.match_id,
            rater_id: body.rater_id,
            outcome: outcome_of(body.choice, record.left),
            questionnaire: body.questionnaire,
            rater_class: body.rater_class,
            idempotency_key: body.idempotency_key,
        },
        now,
    )?;
    let stream = record.rater_class.stream();
    let board = store.board(&record.task_id, stream).expect("task exists");
    let k = state.settings.leaderboard_k;
    let rated: Vec<RatedAgent> = [&record.agent_a, &record.agent_b]
        .into_iter()
        .map(|a| {
            let r = board.ratings[a];
            RatedAgent {
                agent_id: a,
                mu: r.mu,
                sigma: r.sigma,
                conservative: r.conservative(k),
            }
        })
        .collect();
    let status = if ack.duplicate { StatusCode::OK } else { StatusCode::CREATED };
    let body = with_version(json!({
        "ack": ack,
        "stream": stream,
        "ratings": rated,
    }));
    Ok((status, Json(body)).into_response())
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct Page {
    offset: Option<usize>,
    limit: Option<usize>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct LeaderboardEntry {
    rank: usize,
    agent_id: AgentId,
    participant_id: ParticipantId,
    mu: f64,
    sigma: f64,
    score: f64,
    judgments: u64,
}

fn leaderboard(state: &AppState, task_id: &TaskId, stream: RatingStream, page: &Page) -> Result<Value, ApiError> {
    let settings = &state.settings;
    let limit = page.limit.unwrap_or(settings.default_page_size);
    if limit == 0 || limit > settings.max_page_size {
        return Err(ApiError::BadRequest(format!("limit must be between 1 and {}", settings.max_page_size)));
    }
    let offset = page.offset.unwrap_or(0);
    let arena = state.lock();
    let store = &arena.store;
    let board = store
        .board(task_id, stream)
        .ok_or_else(|| ApiError::from(arena_core::StoreError::NotFound(format!("unknown task {task_id}"))))?;
    let kind = ScoreKind::Conservative(settings.leaderboard_k);
    let mut rows: Vec<(&AgentId, &Rating)> = board.ratings.iter().collect();
    rows.sort_by(|x, y| kind.raw(y.1).total_cmp(&kind.raw(x.1)).then_with(|| x.0.cmp(y.0)));
    let total = rows.len();
    let entries: Vec<LeaderboardEntry> = rows
        .into_iter()
        .enumerate()
        .skip(offset)
        .take(limit)
        .map(|(i, (agent, r))| LeaderboardEntry {
            rank: i + 1,
            agent_id: agent.clone(),
            participant_id: store
                .agent(agent)
                .expect("board agents are registered")
                .participant_id
                .clone(),
            mu: r.mu,
            sigma: r.sigma,
            score: kind.raw(r),
            judgments: board.judgments_count.get(agent).copied().unwrap_or(0),
        })
        .collect();
    Ok(with_version(json!({
        "taskId": task_id,
        "stream": stream,
        "scoreKind": kind,
        "total": total,
        "offset": offset,
        "limit": limit,
        "entries": entries,
    })))
}

async fn provisional_leaderboard(
    State(state): State<AppState>,
    Path(task_id): Path<TaskId>,
    Query(page): Query<Page>,
) -> Result<Json<Value>, ApiError> {
    leaderboard(&state, &task_id, RatingStream::Provisional, &page).map(Json)
}

async fn official_leaderboard(
    State(state): State<AppState>,
    Path(task_id): Path<TaskId>,
    Query(page): Query<Page>,
) -> Result<Json<Value>, ApiError> {
    leaderboard(&state, &task_id, RatingStream::Official, &page).map(Json)
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct StandingsQuery {
    score_kind: Option<String>,
}

async fn final_standings(
    State(state): State<AppState>,
    Query(q): Query<StandingsQuery>,
) -> Result<Json<Value>, ApiError> {
    let kind: ScoreKind = match q.score_kind {
        Some(s) => s.parse().map_err(ApiError::BadRequest)?,
        None => ScoreKind::default(),
    };
    let report = state.with_store(|s| s.final_standings(RatingStream::Official, kind));
    Ok(Json(serde_json::to_value(report).unwrap_or(Value::Null)))
}

async fn reciprocity(
    State(state): State<AppState>,
    Path(participant_id): Path<ParticipantId>,
) -> Result<Json<Value>, ApiError> {
    let entry = state.with_store(|s| s.reciprocity_status(&participant_id))?;
    Ok(Json(with_version(entry)))
}

async fn list_tasks(State(state): State<AppState>) -> Json<Value> {
    let tasks: Vec<Value> = state.with_store(|s| {
        s.tasks()
            .map(|t| json!({ "taskId": t.task_id, "description": t.description }))
            .collect()
    });
    Json(with_version(json!({ "tasks": tasks })))
}

async fn task_info(State(state): State<AppState>, Path(task_id): Path<TaskId>) -> Result<Json<Value>, ApiError> {
    state.with_store(|s| {
        let task = s
            .task(&task_id)
            .ok_or_else(|| ApiError::from(arena_core::StoreError::NotFound(format!("unknown task {task_id}"))))?;
        Ok(Json(with_version(json!({
            "task": task,
            "agents": s.board(&task_id, RatingStream::Provisional).map_or(0, |b| b.len()),
            "judgments": s.judgment_count(&task_id),
        }))))
    })
}
