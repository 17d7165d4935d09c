//! Simulated raters working through a [`Store`], the way live raters use the
//! service: take a lease, judge the two videos, submit.

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, Utc};
use rand::rngs::StdRng;
use rand::SeedableRng;

use super::{RaterModel, SimAgent, SimError, SimWorld};
use crate::ids::{AgentId, RaterId, TaskId};
use crate::seeding;
use crate::store::{Assignment, AssignmentPolicy, JudgmentSubmission, RaterClass, Store};

#[derive(Clone, Debug)]
pub struct SessionPlan {
    pub raters: Vec<(RaterId, RaterClass)>,
    /// Judgments to collect per task.
    pub judgments_per_task: usize,
    pub policy: AssignmentPolicy,
    pub start: DateTime<Utc>,
    /// Simulated time between consecutive submissions.
    pub step: Duration,
}

/// Play `plan` against every listed task of `store`, with raters taking turns.
/// Returns the number of judgments stored per task; a task stops early once
/// no rater can be given a match.
pub fn run_sessions(
    store: &mut Store,
    tasks: &[TaskId],
    agents: &[SimAgent],
    model: &RaterModel,
    plan: &SessionPlan,
    rng_seed: u64,
) -> Result<BTreeMap<TaskId, usize>, SimError> {
    model.validate()?;
    if plan.raters.is_empty() {
        return Err(SimError::InvalidInput("at least one rater is needed".into()));
    }
    let by_id: BTreeMap<&AgentId, &SimAgent> = agents.iter().map(|a| (&a.id, a)).collect();
    let world = SimWorld::new(rng_seed);
    let mut now = plan.start;
    let mut collected = BTreeMap::new();

    for task in tasks {
        let mut judge_rng = StdRng::seed_from_u64(seeding::mix_labels(rng_seed, &["judge", task.as_str()]));
        let mut slot_rng = StdRng::seed_from_u64(seeding::mix_labels(rng_seed, &["slot", task.as_str()]));
        for (rater, _) in &plan.raters {
            store.mark_calibrated(task, rater)?;
        }
        let mut done = 0;
        let mut idle = 0;
        let mut turn = 0;
        while done < plan.judgments_per_task && idle < plan.raters.len() {
            let (rater, class) = &plan.raters[turn % plan.raters.len()];
            turn += 1;
            let record = match store.assign_match(task, rater, *class, &plan.policy, now, &mut slot_rng)? {
                Assignment::Leased { record, .. } => record,
                Assignment::NoneAvailable | Assignment::CalibrationRequired => {
                    idle += 1;
                    continue;
                }
            };
            idle = 0;
            let missing = |id: &AgentId| SimError::InvalidInput(format!("no simulated agent {id}"));
            let a = by_id.get(&record.agent_a).ok_or_else(|| missing(&record.agent_a))?;
            let b = by_id.get(&record.agent_b).ok_or_else(|| missing(&record.agent_b))?;
            let (outcome, ..) = world.judge(a, b, task, &record.eval_seed, model, &mut judge_rng)?;
            now += plan.step;
            store.append_judgment(
                JudgmentSubmission {
                    match_id: record.match_id.clone(),
                    rater_id: rater.clone(),
                    outcome,
                    questionnaire: BTreeMap::new(),
                    rater_class: *class,
                    idempotency_key: format!("{rater}:{}", record.match_id),
                },
                now,
            )?;
            done += 1;
        }
        collected.insert(task.clone(), done);
    }
    Ok(collected)
}
