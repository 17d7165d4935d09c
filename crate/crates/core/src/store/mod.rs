//! Event-sourced record of tasks, agents, matches and judgments.
//!
//! The append-only judgment log is the source of truth; every rating is
//! derived by folding judgments through [`update_pair`] in sequence order.
//! Contractor judgments feed the official stream, everything else the
//! provisional one.

mod log;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use chrono::{DateTime, Duration, Utc};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{AgentId, JudgmentId, MatchId, ParticipantId, QuestionId, RaterId, SeedId, SubmissionId, TaskId};
use crate::matchmaker::{next_match, MatchRequest, ScheduleError, ScheduledMatch, SchedulerPolicy, TaskRoster};
use crate::rating::{update_pair, Outcome, Rating, RatingParams};
use crate::scoring::{standings_from_boards, ScoreKind, StandingsReport, TaskScoreboard};

pub use log::{log_files, read_events, read_snapshot, LogLine, SnapshotFile, LOG_SCHEMA_VERSION};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StoreError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("forbidden: {0}")]
    Forbidden(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("lease expired: {0}")]
    LeaseExpired(String),
    #[error("unprocessable: {0}")]
    Unprocessable(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("corrupt event log {file} line {line}: {message}")]
    Corrupt { file: String, line: usize, message: String },
}

impl StoreError {
    fn io(path: &Path, e: std::io::Error) -> Self {
        StoreError::Io(format!("{}: {e}", path.display()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RaterClass {
    Contractor,
    Participant,
    Public,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RatingStream {
    /// Public and participant judgments; drives the live leaderboard.
    Provisional,
    /// Contractor judgments; drives final standings.
    Official,
}

impl RaterClass {
    pub fn stream(self) -> RatingStream {
        match self {
            RaterClass::Contractor => RatingStream::Official,
            RaterClass::Participant | RaterClass::Public => RatingStream::Provisional,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Question {
    pub id: QuestionId,
    pub prompt: String,
    #[serde(default)]
    pub required: bool,
}

/// A reference video with an explanation of how good it is.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CalibrationExample {
    pub id: String,
    pub video: String,
    pub explanation: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TaskConfig {
    pub task_id: TaskId,
    pub description: String,
    #[serde(default)]
    pub questions: Vec<Question>,
    pub eval_seeds: Vec<SeedId>,
    #[serde(default)]
    pub calibration: Vec<CalibrationExample>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AgentRegistration {
    pub agent_id: AgentId,
    pub participant_id: ParticipantId,
    pub submission_id: SubmissionId,
    pub task_id: TaskId,
    /// Video reference per evaluation seed.
    pub videos: BTreeMap<SeedId, String>,
}

/// Which agent of the match is shown on the left.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Slot {
    First,
    Second,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MatchRecord {
    pub match_id: MatchId,
    pub task_id: TaskId,
    pub agent_a: AgentId,
    pub agent_b: AgentId,
    pub eval_seed: SeedId,
    pub video_a: String,
    pub video_b: String,
    pub rater_id: RaterId,
    pub rater_class: RaterClass,
    pub left: Slot,
    pub created_at: DateTime<Utc>,
    pub expires_at: DateTime<Utc>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct JudgmentSubmission {
    pub match_id: MatchId,
    pub rater_id: RaterId,
    pub outcome: Outcome,
    #[serde(default)]
    pub questionnaire: BTreeMap<QuestionId, String>,
    pub rater_class: RaterClass,
    pub idempotency_key: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct JudgmentRecord {
    pub judgment_id: JudgmentId,
    /// 1-based position in the task's judgment log.
    pub seq: u64,
    pub task_id: TaskId,
    pub match_id: MatchId,
    pub rater_id: RaterId,
    pub outcome: Outcome,
    pub questionnaire: BTreeMap<QuestionId, String>,
    pub rater_class: RaterClass,
    pub submitted_at: DateTime<Utc>,
    pub idempotency_key: String,
}

impl JudgmentRecord {
    fn submission(&self) -> JudgmentSubmission {
        JudgmentSubmission {
            match_id: self.match_id.clone(),
            rater_id: self.rater_id.clone(),
            outcome: self.outcome,
            questionnaire: self.questionnaire.clone(),
            rater_class: self.rater_class,
            idempotency_key: self.idempotency_key.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum Event {
    TaskConfigured(TaskConfig),
    AgentRegistered(AgentRegistration),
    #[serde(rename_all = "camelCase")]
    RaterCalibrated { task_id: TaskId, rater_id: RaterId },
    MatchCreated(MatchRecord),
    JudgmentAppended(JudgmentRecord),
}

impl Event {
    fn task_id(&self) -> &TaskId {
        match self {
            Event::TaskConfigured(t) => &t.task_id,
            Event::AgentRegistered(a) => &a.task_id,
            Event::RaterCalibrated { task_id, .. } => task_id,
            Event::MatchCreated(m) => &m.task_id,
            Event::JudgmentAppended(j) => &j.task_id,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Ack {
    pub judgment_id: JudgmentId,
    pub task_id: TaskId,
    pub seq: u64,
    /// True when this was a replay of an already stored judgment.
    pub duplicate: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReciprocityEntry {
    pub participant_id: ParticipantId,
    pub submissions: u64,
    pub owed: u64,
    pub provided: u64,
    pub compliant: bool,
}

/// One rating change and the judgment that caused it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RatingChange {
    pub seq: u64,
    pub judgment_id: JudgmentId,
    pub agent_a: AgentId,
    pub agent_b: AgentId,
    pub before: (Rating, Rating),
    pub after: (Rating, Rating),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct StoreConfig {
    pub rating: RatingParams,
    /// Comparisons owed per submission after a participant's first.
    pub reciprocity_quota: u64,
    /// Write a snapshot file every this many judgments per task (0 = never).
    pub snapshot_every: u64,
    /// fsync after every appended event.
    pub durable: bool,
}

impl Default for StoreConfig {
    fn default() -> Self {
        Self {
            rating: RatingParams::default(),
            reciprocity_quota: 20,
            snapshot_every: 100,
            durable: true,
        }
    }
}

/// Calibration examples a rater must review before judging a task.
pub const CALIBRATION_EXAMPLES_REQUIRED: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct AssignmentPolicy {
    pub scheduler: SchedulerPolicy,
    pub lease_minutes: i64,
    /// Most contractor matches any one agent may take part in per task.
    pub contractor_cap: Option<u64>,
}

impl Default for AssignmentPolicy {
    fn default() -> Self {
        Self {
            scheduler: SchedulerPolicy::default(),
            lease_minutes: 30,
            contractor_cap: None,
        }
    }
}

impl AssignmentPolicy {
    pub fn lease_ttl(&self) -> Duration {
        Duration::minutes(self.lease_minutes)
    }
}

#[derive(Clone, Debug, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Assignment {
    CalibrationRequired,
    /// `reused` is true when the rater already held this unexpired lease.
    Leased { record: MatchRecord, reused: bool },
    NoneAvailable,
}

#[derive(Clone, Debug)]
struct TaskState {
    config: TaskConfig,
    /// Registration order.
    agents: Vec<AgentId>,
    judgments: Vec<JudgmentRecord>,
    provisional: TaskScoreboard,
    official: TaskScoreboard,
    calibrated: BTreeSet<RaterId>,
}

impl TaskState {
    fn board(&self, stream: RatingStream) -> &TaskScoreboard {
        match stream {
            RatingStream::Provisional => &self.provisional,
            RatingStream::Official => &self.official,
        }
    }

    fn board_mut(&mut self, stream: RatingStream) -> &mut TaskScoreboard {
        match stream {
            RatingStream::Provisional => &mut self.provisional,
            RatingStream::Official => &mut self.official,
        }
    }
}

#[derive(Clone, Debug, Default)]
struct ParticipantState {
    submissions: BTreeSet<SubmissionId>,
    provided: u64,
}

#[derive(Debug)]
pub struct Store {
    config: StoreConfig,
    tasks: BTreeMap<TaskId, TaskState>,
    agents: BTreeMap<AgentId, AgentRegistration>,
    matches: BTreeMap<MatchId, MatchRecord>,
    judged: BTreeMap<MatchId, JudgmentId>,
    idempotency: HashMap<String, (JudgmentSubmission, Ack)>,
    participants: BTreeMap<ParticipantId, ParticipantState>,
    writer: Option<log::LogWriter>,
}

fn valid_task_id(id: &TaskId) -> bool {
    !id.as_str().is_empty()
        && id
            .as_str()
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        && !id.as_str().starts_with('.')
}

/// Fold judgments through the rating model, skipping other streams.
fn fold_into(
    board: &mut TaskScoreboard,
    judgment: &JudgmentRecord,
    m: &MatchRecord,
    params: &RatingParams,
) -> Option<RatingChange> {
    let before = (*board.ratings.get(&m.agent_a)?, *board.ratings.get(&m.agent_b)?);
    // Ratings in the board are always valid, so the update cannot fail.
    let after = update_pair(&before.0, &before.1, judgment.outcome, params).ok()?;
    board.ratings.insert(m.agent_a.clone(), after.0);
    board.ratings.insert(m.agent_b.clone(), after.1);
    *board.judgments_count.entry(m.agent_a.clone()).or_default() += 1;
    *board.judgments_count.entry(m.agent_b.clone()).or_default() += 1;
    Some(RatingChange {
        seq: judgment.seq,
        judgment_id: judgment.judgment_id.clone(),
        agent_a: m.agent_a.clone(),
        agent_b: m.agent_b.clone(),
        before,
        after,
    })
}

impl Store {
    /// Store without a backing log.
    pub fn in_memory(config: StoreConfig) -> Self {
        Self {
            config,
            tasks: BTreeMap::new(),
            agents: BTreeMap::new(),
            matches: BTreeMap::new(),
            judged: BTreeMap::new(),
            idempotency: HashMap::new(),
            participants: BTreeMap::new(),
            writer: None,
        }
    }

    /// Open (or create) a log directory, replaying whatever it holds, and
    /// append new events to it.
    pub fn open(dir: &Path, config: StoreConfig) -> Result<Self, StoreError> {
        let writer = log::LogWriter::new(dir, config.durable)?;
        let mut store = Self::load(dir, config)?;
        store.writer = Some(writer);
        Ok(store)
    }

    /// Read-only replay of a log file or directory.
    pub fn load(path: &Path, config: StoreConfig) -> Result<Self, StoreError> {
        let mut store = Self::in_memory(config);
        for file in log_files(path)? {
            store.replay(read_events(&file)?)?;
        }
        Ok(store)
    }

    /// Apply previously recorded events.
    pub fn replay<I: IntoIterator<Item = Event>>(&mut self, events: I) -> Result<(), StoreError> {
        for event in events {
            self.check_replayable(&event)?;
            self.apply(event);
        }
        Ok(())
    }

    fn check_replayable(&self, event: &Event) -> Result<(), StoreError> {
        let task = event.task_id();
        let known = self.tasks.contains_key(task);
        let missing = |what: String| Err(StoreError::InvalidInput(format!("log references {what}")));
        match event {
            Event::TaskConfigured(_) => Ok(()),
            _ if !known => missing(format!("unconfigured task {task}")),
            Event::MatchCreated(m) if !self.agents.contains_key(&m.agent_a) || !self.agents.contains_key(&m.agent_b) => {
                missing(format!("unregistered agent in match {}", m.match_id))
            }
            Event::JudgmentAppended(j) if !self.matches.contains_key(&j.match_id) => {
                missing(format!("unknown match {}", j.match_id))
            }
            Event::JudgmentAppended(j) if j.seq != self.tasks[task].judgments.len() as u64 + 1 => {
                missing(format!("judgment {} out of sequence", j.judgment_id))
            }
            _ => Ok(()),
        }
    }

    fn record(&mut self, event: Event) -> Result<(), StoreError> {
        if let Some(w) = self.writer.as_mut() {
            w.append(event.task_id(), &event)?;
        }
        self.apply(event);
        Ok(())
    }

    fn apply(&mut self, event: Event) {
        match event {
            Event::TaskConfigured(config) => {
                let task_id = config.task_id.clone();
                match self.tasks.get_mut(&task_id) {
                    Some(state) => state.config = config,
                    None => {
                        self.tasks.insert(
                            task_id.clone(),
                            TaskState {
                                config,
                                agents: Vec::new(),
                                judgments: Vec::new(),
                                provisional: TaskScoreboard::new(task_id.clone()),
                                official: TaskScoreboard::new(task_id),
                                calibrated: BTreeSet::new(),
                            },
                        );
                    }
                }
            }
            Event::AgentRegistered(reg) => {
                let prior = self.config.rating.prior();
                if let Some(task) = self.tasks.get_mut(&reg.task_id) {
                    task.agents.push(reg.agent_id.clone());
                    task.provisional.insert_agent(reg.agent_id.clone(), prior);
                    task.official.insert_agent(reg.agent_id.clone(), prior);
                }
                self.participants
                    .entry(reg.participant_id.clone())
                    .or_default()
                    .submissions
                    .insert(reg.submission_id.clone());
                self.agents.insert(reg.agent_id.clone(), reg);
            }
            Event::RaterCalibrated { task_id, rater_id } => {
                if let Some(task) = self.tasks.get_mut(&task_id) {
                    task.calibrated.insert(rater_id);
                }
            }
            Event::MatchCreated(m) => {
                self.matches.insert(m.match_id.clone(), m);
            }
            Event::JudgmentAppended(j) => {
                let m = &self.matches[&j.match_id];
                let params = self.config.rating;
                if let Some(task) = self.tasks.get_mut(&j.task_id) {
                    fold_into(task.board_mut(j.rater_class.stream()), &j, m, &params);
                    task.judgments.push(j.clone());
                }
                if j.rater_class == RaterClass::Participant {
                    self.participants
                        .entry(ParticipantId::new(j.rater_id.as_str()))
                        .or_default()
                        .provided += 1;
                }
                self.judged.insert(j.match_id.clone(), j.judgment_id.clone());
                let ack = Ack {
                    judgment_id: j.judgment_id.clone(),
                    task_id: j.task_id.clone(),
                    seq: j.seq,
                    duplicate: false,
                };
                self.idempotency.insert(j.idempotency_key.clone(), (j.submission(), ack));
            }
        }
    }

    pub fn config(&self) -> &StoreConfig {
        &self.config
    }

    pub fn params(&self) -> &RatingParams {
        &self.config.rating
    }

    pub fn configure_task(&mut self, config: TaskConfig) -> Result<(), StoreError> {
        if !valid_task_id(&config.task_id) {
            return Err(StoreError::InvalidInput(format!(
                "task id {:?} must be non-empty ASCII letters, digits, '-', '_' or '.'",
                config.task_id.as_str()
            )));
        }
        if config.eval_seeds.is_empty() {
            return Err(StoreError::InvalidInput(format!("task {} has no evaluation seeds", config.task_id)));
        }
        let unique: BTreeSet<_> = config.questions.iter().map(|q| &q.id).collect();
        if unique.len() != config.questions.len() {
            return Err(StoreError::InvalidInput(format!("task {} has duplicate question ids", config.task_id)));
        }
        if self.tasks.get(&config.task_id).is_some_and(|t| t.config == config) {
            return Ok(());
        }
        self.record(Event::TaskConfigured(config))
    }

    pub fn task(&self, task: &TaskId) -> Option<&TaskConfig> {
        self.tasks.get(task).map(|t| &t.config)
    }

    pub fn tasks(&self) -> impl Iterator<Item = &TaskConfig> {
        self.tasks.values().map(|t| &t.config)
    }

    pub fn register_agent(&mut self, reg: AgentRegistration) -> Result<(), StoreError> {
        let task = self
            .tasks
            .get(&reg.task_id)
            .ok_or_else(|| StoreError::NotFound(format!("unknown task {}", reg.task_id)))?;
        if self.agents.contains_key(&reg.agent_id) {
            return Err(StoreError::Conflict(format!("agent {} is already registered", reg.agent_id)));
        }
        let missing: Vec<&str> = task
            .config
            .eval_seeds
            .iter()
            .filter(|s| reg.videos.get(*s).is_none_or(|v| v.trim().is_empty()))
            .map(|s| s.as_str())
            .collect();
        if !missing.is_empty() {
            return Err(StoreError::Unprocessable(format!("missing videos for seeds: {}", missing.join(", "))));
        }
        self.record(Event::AgentRegistered(reg))
    }

    pub fn agent(&self, agent: &AgentId) -> Option<&AgentRegistration> {
        self.agents.get(agent)
    }

    pub fn mark_calibrated(&mut self, task_id: &TaskId, rater_id: &RaterId) -> Result<(), StoreError> {
        let task = self
            .tasks
            .get(task_id)
            .ok_or_else(|| StoreError::NotFound(format!("unknown task {task_id}")))?;
        if task.calibrated.contains(rater_id) {
            return Ok(());
        }
        self.record(Event::RaterCalibrated {
            task_id: task_id.clone(),
            rater_id: rater_id.clone(),
        })
    }

    pub fn is_calibrated(&self, task_id: &TaskId, rater_id: &RaterId) -> bool {
        self.tasks.get(task_id).is_some_and(|t| t.calibrated.contains(rater_id))
    }

    /// Record that a rater acknowledged the task description and reviewed
    /// enough distinct calibration examples.
    pub fn calibrate(
        &mut self,
        task_id: &TaskId,
        rater_id: &RaterId,
        acknowledged_description: bool,
        reviewed: &[String],
    ) -> Result<(), StoreError> {
        let task = self
            .tasks
            .get(task_id)
            .ok_or_else(|| StoreError::NotFound(format!("unknown task {task_id}")))?;
        if !acknowledged_description {
            return Err(StoreError::Unprocessable("the task description must be acknowledged".into()));
        }
        let known: BTreeSet<&str> = task.config.calibration.iter().map(|c| c.id.as_str()).collect();
        if let Some(bad) = reviewed.iter().find(|r| !known.contains(r.as_str())) {
            return Err(StoreError::Unprocessable(format!("{bad} is not a calibration example of {task_id}")));
        }
        let distinct: BTreeSet<&str> = reviewed.iter().map(String::as_str).collect();
        let needed = CALIBRATION_EXAMPLES_REQUIRED.min(known.len());
        if distinct.len() < needed {
            return Err(StoreError::Unprocessable(format!(
                "review at least {needed} calibration examples (got {})",
                distinct.len()
            )));
        }
        self.mark_calibrated(task_id, rater_id)
    }

    /// Lease the next match of a task to a rater.
    ///
    /// An unexpired lease the rater already holds is returned again.
    /// Participants never judge their own agents, and contractors never see
    /// an agent that reached the contractor cap.
    pub fn assign_match<R: Rng + ?Sized>(
        &mut self,
        task_id: &TaskId,
        rater_id: &RaterId,
        rater_class: RaterClass,
        policy: &AssignmentPolicy,
        now: DateTime<Utc>,
        rng: &mut R,
    ) -> Result<Assignment, StoreError> {
        let task = self
            .tasks
            .get(task_id)
            .ok_or_else(|| StoreError::NotFound(format!("unknown task {task_id}")))?;
        if !task.calibrated.contains(rater_id) {
            return Ok(Assignment::CalibrationRequired);
        }
        if let Some(lease) = self.open_lease(task_id, rater_id, now) {
            return Ok(Assignment::Leased {
                record: lease.clone(),
                reused: true,
            });
        }

        let stream = rater_class.stream();
        let history = self.history(task_id, stream, now);
        let mut exposure: BTreeMap<&AgentId, u64> = BTreeMap::new();
        for m in &history {
            *exposure.entry(&m.agent_a).or_default() += 1;
            *exposure.entry(&m.agent_b).or_default() += 1;
        }
        let own = ParticipantId::new(rater_id.as_str());
        let eligible = |agent: &AgentId| {
            let reg = &self.agents[agent];
            let own_agent = rater_class == RaterClass::Participant && reg.participant_id == own;
            let capped = rater_class == RaterClass::Contractor
                && policy
                    .contractor_cap
                    .is_some_and(|cap| exposure.get(agent).copied().unwrap_or(0) >= cap);
            !own_agent && !capped
        };
        let mut board = TaskScoreboard::new(task_id.clone());
        for (agent, rating) in &task.board(stream).ratings {
            if eligible(agent) {
                board.insert_agent(agent.clone(), *rating);
            }
        }
        let roster = self.roster(task_id).expect("task exists");
        let request = match next_match(&board, &roster, &history, &policy.scheduler, &self.config.rating) {
            Ok(r) => r,
            Err(ScheduleError::NotEnoughAgents(_) | ScheduleError::BudgetExhausted) => {
                return Ok(Assignment::NoneAvailable)
            }
        };
        let left = if rng.random::<bool>() { Slot::First } else { Slot::Second };
        let record = self.create_match(&request, rater_id, rater_class, left, now, policy.lease_ttl())?;
        Ok(Assignment::Leased { record, reused: false })
    }

    /// Seeds and videos of the agents registered on a task.
    pub fn roster(&self, task_id: &TaskId) -> Option<TaskRoster> {
        let task = self.tasks.get(task_id)?;
        Some(TaskRoster {
            task_id: task_id.clone(),
            seeds: task.config.eval_seeds.clone(),
            videos: task
                .agents
                .iter()
                .map(|a| (a.clone(), self.agents[a].videos.clone()))
                .collect(),
        })
    }

    /// Live board of one stream.
    pub fn board(&self, task_id: &TaskId, stream: RatingStream) -> Option<&TaskScoreboard> {
        self.tasks.get(task_id).map(|t| t.board(stream))
    }

    fn lease_is_open(&self, m: &MatchRecord, now: DateTime<Utc>) -> bool {
        !self.judged.contains_key(&m.match_id) && now < m.expires_at
    }

    /// Matches that count against pair budgets: judged ones and open leases.
    pub fn history(&self, task_id: &TaskId, stream: RatingStream, now: DateTime<Utc>) -> Vec<ScheduledMatch> {
        self.matches
            .values()
            .filter(|m| &m.task_id == task_id && m.rater_class.stream() == stream)
            .filter(|m| self.judged.contains_key(&m.match_id) || self.lease_is_open(m, now))
            .map(|m| ScheduledMatch {
                agent_a: m.agent_a.clone(),
                agent_b: m.agent_b.clone(),
                eval_seed: m.eval_seed.clone(),
            })
            .collect()
    }

    /// The rater's unexpired, unjudged lease on a task, if any.
    pub fn open_lease(&self, task_id: &TaskId, rater_id: &RaterId, now: DateTime<Utc>) -> Option<&MatchRecord> {
        self.matches
            .values()
            .find(|m| &m.task_id == task_id && &m.rater_id == rater_id && self.lease_is_open(m, now))
    }

    pub fn match_record(&self, match_id: &MatchId) -> Option<&MatchRecord> {
        self.matches.get(match_id)
    }

    /// Record a scheduled match leased to one rater.
    pub fn create_match(
        &mut self,
        request: &MatchRequest,
        rater_id: &RaterId,
        rater_class: RaterClass,
        left: Slot,
        now: DateTime<Utc>,
        ttl: Duration,
    ) -> Result<MatchRecord, StoreError> {
        if ttl <= Duration::zero() {
            return Err(StoreError::InvalidInput("lease duration must be positive".into()));
        }
        if request.agent_a == request.agent_b {
            return Err(StoreError::InvalidInput("an agent cannot be matched against itself".into()));
        }
        let task = self
            .tasks
            .get(&request.task_id)
            .ok_or_else(|| StoreError::NotFound(format!("unknown task {}", request.task_id)))?;
        for agent in [&request.agent_a, &request.agent_b] {
            let reg = self
                .agents
                .get(agent)
                .filter(|r| r.task_id == request.task_id)
                .ok_or_else(|| StoreError::NotFound(format!("agent {agent} is not registered on {}", request.task_id)))?;
            if !reg.videos.contains_key(&request.eval_seed) {
                return Err(StoreError::Unprocessable(format!("agent {agent} has no video for {}", request.eval_seed)));
            }
        }
        if !task.config.eval_seeds.contains(&request.eval_seed) {
            return Err(StoreError::Unprocessable(format!("unknown seed {}", request.eval_seed)));
        }
        let record = MatchRecord {
            match_id: MatchId::new(format!("m{:07}", self.matches.len() + 1)),
            task_id: request.task_id.clone(),
            agent_a: request.agent_a.clone(),
            agent_b: request.agent_b.clone(),
            eval_seed: request.eval_seed.clone(),
            video_a: self.agents[&request.agent_a].videos[&request.eval_seed].clone(),
            video_b: self.agents[&request.agent_b].videos[&request.eval_seed].clone(),
            rater_id: rater_id.clone(),
            rater_class,
            left,
            created_at: now,
            expires_at: now + ttl,
        };
        self.record(Event::MatchCreated(record.clone()))?;
        Ok(record)
    }

    /// Append a judgment for a leased match. Replays with a known
    /// idempotency key and identical payload return the original ack.
    pub fn append_judgment(&mut self, sub: JudgmentSubmission, now: DateTime<Utc>) -> Result<Ack, StoreError> {
        if let Some((stored, ack)) = self.idempotency.get(&sub.idempotency_key) {
            return if *stored == sub {
                Ok(Ack {
                    duplicate: true,
                    ..ack.clone()
                })
            } else {
                Err(StoreError::Conflict(format!(
                    "idempotency key {} was used with a different payload",
                    sub.idempotency_key
                )))
            };
        }
        if sub.idempotency_key.is_empty() {
            return Err(StoreError::InvalidInput("idempotencyKey must not be empty".into()));
        }
        let m = self
            .matches
            .get(&sub.match_id)
            .ok_or_else(|| StoreError::NotFound(format!("unknown match {}", sub.match_id)))?;
        if m.rater_id != sub.rater_id || m.rater_class != sub.rater_class {
            return Err(StoreError::Forbidden(format!("match {} is not leased to {}", m.match_id, sub.rater_id)));
        }
        if self.judged.contains_key(&m.match_id) {
            return Err(StoreError::Conflict(format!("match {} was already judged", m.match_id)));
        }
        if now >= m.expires_at {
            return Err(StoreError::LeaseExpired(format!("lease on {} expired at {}", m.match_id, m.expires_at)));
        }
        let task = &self.tasks[&m.task_id];
        let known: BTreeMap<&QuestionId, &crate::store::Question> =
            task.config.questions.iter().map(|q| (&q.id, q)).collect();
        if let Some(q) = sub.questionnaire.keys().find(|q| !known.contains_key(q)) {
            return Err(StoreError::InvalidInput(format!("question {q} is not configured for {}", m.task_id)));
        }
        if let Some(q) = task
            .config
            .questions
            .iter()
            .find(|q| q.required && sub.questionnaire.get(&q.id).is_none_or(|a| a.trim().is_empty()))
        {
            return Err(StoreError::InvalidInput(format!("required question {} was not answered", q.id)));
        }

        let seq = task.judgments.len() as u64 + 1;
        let record = JudgmentRecord {
            judgment_id: JudgmentId::new(format!("{}-j{seq:07}", m.task_id)),
            seq,
            task_id: m.task_id.clone(),
            match_id: sub.match_id,
            rater_id: sub.rater_id,
            outcome: sub.outcome,
            questionnaire: sub.questionnaire,
            rater_class: sub.rater_class,
            submitted_at: now,
            idempotency_key: sub.idempotency_key,
        };
        let ack = Ack {
            judgment_id: record.judgment_id.clone(),
            task_id: record.task_id.clone(),
            seq,
            duplicate: false,
        };
        let task_id = record.task_id.clone();
        self.record(Event::JudgmentAppended(record))?;
        self.maybe_snapshot(&task_id, seq)?;
        Ok(ack)
    }

    fn maybe_snapshot(&self, task_id: &TaskId, seq: u64) -> Result<(), StoreError> {
        let (Some(writer), every) = (self.writer.as_ref(), self.config.snapshot_every) else {
            return Ok(());
        };
        if every == 0 || !seq.is_multiple_of(every) {
            return Ok(());
        }
        let task = &self.tasks[task_id];
        writer.write_snapshot(&SnapshotFile {
            schema_version: LOG_SCHEMA_VERSION,
            task_id: task_id.clone(),
            seq,
            provisional: task.provisional.clone(),
            official: task.official.clone(),
        })?;
        Ok(())
    }

    pub fn judgments(&self, task_id: &TaskId) -> &[JudgmentRecord] {
        self.tasks.get(task_id).map_or(&[], |t| &t.judgments)
    }

    pub fn judgment_count(&self, task_id: &TaskId) -> u64 {
        self.judgments(task_id).len() as u64
    }

    fn prior_board(&self, task: &TaskState) -> TaskScoreboard {
        TaskScoreboard::with_agents(task.config.task_id.clone(), task.agents.iter().cloned(), &self.config.rating)
    }

    /// Board obtained by folding judgments `1..=at` of one stream from the prior.
    pub fn rating_snapshot(&self, task_id: &TaskId, at: u64, stream: RatingStream) -> Result<TaskScoreboard, StoreError> {
        Ok(self.rating_history_upto(task_id, at, stream)?.0)
    }

    /// Every rating change of one stream, each tied to its judgment.
    pub fn rating_history(&self, task_id: &TaskId, stream: RatingStream) -> Result<Vec<RatingChange>, StoreError> {
        Ok(self.rating_history_upto(task_id, self.judgment_count(task_id), stream)?.1)
    }

    fn rating_history_upto(
        &self,
        task_id: &TaskId,
        at: u64,
        stream: RatingStream,
    ) -> Result<(TaskScoreboard, Vec<RatingChange>), StoreError> {
        let task = self
            .tasks
            .get(task_id)
            .ok_or_else(|| StoreError::NotFound(format!("unknown task {task_id}")))?;
        if at > task.judgments.len() as u64 {
            return Err(StoreError::InvalidInput(format!(
                "sequence {at} is beyond the {} judgments recorded for {task_id}",
                task.judgments.len()
            )));
        }
        let mut board = self.prior_board(task);
        let mut changes = Vec::new();
        for j in task.judgments.iter().take(at as usize) {
            if j.rater_class.stream() != stream {
                continue;
            }
            changes.extend(fold_into(&mut board, j, &self.matches[&j.match_id], &self.config.rating));
        }
        Ok((board, changes))
    }

    pub fn reciprocity_status(&self, participant: &ParticipantId) -> Result<ReciprocityEntry, StoreError> {
        let state = self
            .participants
            .get(participant)
            .filter(|p| !p.submissions.is_empty())
            .ok_or_else(|| StoreError::NotFound(format!("unknown participant {participant}")))?;
        let submissions = state.submissions.len() as u64;
        let owed = self.config.reciprocity_quota * submissions.saturating_sub(1);
        Ok(ReciprocityEntry {
            participant_id: participant.clone(),
            submissions,
            owed,
            provided: state.provided,
            compliant: state.provided >= owed,
        })
    }

    /// Per-task boards keyed by participant, one representative agent each
    /// (the participant's most recently registered agent on that task).
    pub fn entrant_boards(&self, stream: RatingStream) -> BTreeMap<TaskId, TaskScoreboard> {
        self.tasks
            .iter()
            .map(|(task_id, task)| {
                let mut representative: BTreeMap<&ParticipantId, &AgentId> = BTreeMap::new();
                for agent in &task.agents {
                    representative.insert(&self.agents[agent].participant_id, agent);
                }
                let live = task.board(stream);
                let mut board = TaskScoreboard::new(task_id.clone());
                for (participant, agent) in representative {
                    let entrant = AgentId::new(participant.as_str());
                    board.insert_agent(entrant.clone(), live.ratings[agent]);
                    board.judgments_count.insert(entrant, live.judgments_count.get(agent).copied().unwrap_or(0));
                }
                (task_id.clone(), board)
            })
            .collect()
    }

    /// Cross-task standings of participants from one stream.
    pub fn final_standings(&self, stream: RatingStream, kind: ScoreKind) -> StandingsReport {
        standings_from_boards(&self.entrant_boards(stream), kind)
    }
}
