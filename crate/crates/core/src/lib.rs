//! Tournament engine for agents judged by pairwise human preference.
//!
//! - [`rating`]: Gaussian skill beliefs and two-player Bayesian updates.
//! - [`matchmaker`]: information-seeking match selection and the stopping rule.
//! - [`scoring`]: per-task z-score normalization and cross-task standings.
//! - [`simlab`]: Boltzmann-rational simulated raters and full tournament runs.
//! - [`store`]: the event-sourced judgment log everything else is replayed from.
//!
//! Runnable walkthroughs of each piece live in `examples/`.

pub mod gaussian;
pub mod ids;
pub mod matchmaker;
pub mod rating;
pub mod scoring;
mod seeding;
pub mod simlab;
pub mod store;

pub use ids::{AgentId, JudgmentId, MatchId, ParticipantId, QuestionId, RaterId, SeedId, SubmissionId, TaskId};
pub use matchmaker::{
    next_match, stopping_report, uniform_baseline_schedule, MatchRequest, ScheduleError, ScheduledMatch,
    SchedulerKind, SchedulerPolicy, StoppingReport, TaskRoster,
};
pub use rating::{
    conservative_score, draw_margin_from_probability, match_quality, update_pair, Outcome, Rating, RatingError,
    RatingParams,
};
pub use scoring::{aggregate, normalize_task, FinalStanding, ScoreKind, StandingsReport, TaskScoreboard};
pub use simlab::{kendall_tau, p_prefer, run_tournament, sample_judgment, RaterModel, SimAgent, SimError};
pub use store::{Assignment, AssignmentPolicy, RaterClass, RatingStream, Store, StoreConfig, StoreError};
