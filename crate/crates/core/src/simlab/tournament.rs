use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use super::{kendall_tau, true_order, RaterModel, SimAgent, SimError, SimWorld};
use crate::ids::{AgentId, SeedId, TaskId};
use crate::matchmaker::{
    next_match, stopping_report, uniform_baseline_schedule, ScheduleError, ScheduledMatch, SchedulerKind,
    SchedulerPolicy, TaskRoster,
};
use crate::rating::{update_pair, Outcome, RatingParams};
use crate::scoring::{standings_from_boards, ScoreKind, StandingsReport, TaskScoreboard};
use crate::seeding;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct TournamentConfig {
    pub scheduler: SchedulerKind,
    /// Judgments per task.
    pub budget: usize,
    pub rating: RatingParams,
    pub policy: SchedulerPolicy,
    pub eval_seeds: Vec<SeedId>,
    /// Record a stopping report every this many judgments (0 disables the trace).
    pub report_every: usize,
    /// End a task early once its stopping report is stable.
    pub stop_when_stable: bool,
    /// Kendall tau level whose first crossing is recorded per task.
    pub tau_target: f64,
}

impl Default for TournamentConfig {
    fn default() -> Self {
        Self {
            scheduler: SchedulerKind::Active,
            budget: 400,
            rating: RatingParams::default(),
            policy: SchedulerPolicy::default(),
            eval_seeds: (0..5).map(|i| SeedId::new(format!("seed-{i}"))).collect(),
            report_every: 50,
            stop_when_stable: false,
            tau_target: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimJudgment {
    pub task_id: TaskId,
    /// 1-based position within the task.
    pub seq: usize,
    pub agent_a: AgentId,
    pub agent_b: AgentId,
    pub eval_seed: SeedId,
    pub quality_a: f64,
    pub quality_b: f64,
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StoppingPoint {
    pub task_id: TaskId,
    pub after_judgments: usize,
    pub p_stable_ranking: f64,
    pub stable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TournamentResult {
    pub judgments: Vec<SimJudgment>,
    pub boards: BTreeMap<TaskId, TaskScoreboard>,
    pub standing: StandingsReport,
    pub stopping_trace: Vec<StoppingPoint>,
    /// Final Kendall tau between the posterior-mean order and the true order.
    pub kendall_tau: BTreeMap<TaskId, f64>,
    /// Kendall tau after each judgment.
    pub tau_trace: BTreeMap<TaskId, Vec<f64>>,
    /// Judgments needed before tau first reached the target, if it did.
    pub judgments_to_target: BTreeMap<TaskId, Option<usize>>,
}

/// Play a full simulated evaluation on every task. Everything random is
/// derived from `rng_seed`, so equal seeds give identical results.
pub fn run_tournament(
    agents: &[SimAgent],
    tasks: &[TaskId],
    model: &RaterModel,
    config: &TournamentConfig,
    rng_seed: u64,
) -> Result<TournamentResult, SimError> {
    if agents.len() < 2 {
        return Err(ScheduleError::NotEnoughAgents(agents.len()).into());
    }
    if config.budget == 0 {
        return Err(SimError::InvalidInput("budget must be >= 1".into()));
    }
    model.validate()?;
    config.rating.validate()?;
    config.policy.validate().map_err(SimError::InvalidInput)?;
    for a in agents {
        a.validate()?;
    }
    let by_id: BTreeMap<&AgentId, &SimAgent> = agents.iter().map(|a| (&a.id, a)).collect();
    if by_id.len() != agents.len() {
        return Err(SimError::InvalidInput("duplicate agent ids".into()));
    }

    let world = SimWorld::new(rng_seed);
    let mut result = TournamentResult {
        judgments: Vec::new(),
        boards: BTreeMap::new(),
        standing: standings_from_boards(&BTreeMap::new(), ScoreKind::Mean),
        stopping_trace: Vec::new(),
        kendall_tau: BTreeMap::new(),
        tau_trace: BTreeMap::new(),
        judgments_to_target: BTreeMap::new(),
    };

    for task in tasks {
        let truth = true_order(agents, task)?;
        let roster = TaskRoster::complete(
            task.clone(),
            agents.iter().map(|a| a.id.clone()),
            config.eval_seeds.iter().cloned(),
        );
        let mut board = TaskScoreboard::with_agents(task.clone(), agents.iter().map(|a| a.id.clone()), &config.rating);
        let mut history: Vec<ScheduledMatch> = Vec::new();
        let mut judge_rng = StdRng::seed_from_u64(seeding::mix_labels(rng_seed, &["judge", task.as_str()]));
        let schedule_seed = seeding::mix_labels(rng_seed, &["schedule", task.as_str()]);
        let stop_seed = seeding::mix_labels(rng_seed, &["stopping", task.as_str()]);
        let mut taus = Vec::new();
        let mut reached = None;

        for seq in 1..=config.budget {
            let scheduled = match config.scheduler {
                SchedulerKind::Active => next_match(&board, &roster, &history, &config.policy, &config.rating),
                SchedulerKind::Uniform => {
                    uniform_baseline_schedule(&board, &roster, &history, &config.policy, schedule_seed)
                }
            };
            let m = match scheduled {
                Ok(m) => m,
                Err(ScheduleError::BudgetExhausted) => break,
                Err(e) => return Err(e.into()),
            };
            let (a, b) = (by_id[&m.agent_a], by_id[&m.agent_b]);
            let (outcome, qa, qb) = world.judge(a, b, task, &m.eval_seed, model, &mut judge_rng)?;

            let (ra, rb) = update_pair(&board.ratings[&m.agent_a], &board.ratings[&m.agent_b], outcome, &config.rating)?;
            board.ratings.insert(m.agent_a.clone(), ra);
            board.ratings.insert(m.agent_b.clone(), rb);
            *board.judgments_count.entry(m.agent_a.clone()).or_default() += 1;
            *board.judgments_count.entry(m.agent_b.clone()).or_default() += 1;

            history.push(ScheduledMatch {
                agent_a: m.agent_a.clone(),
                agent_b: m.agent_b.clone(),
                eval_seed: m.eval_seed.clone(),
            });
            result.judgments.push(SimJudgment {
                task_id: task.clone(),
                seq,
                agent_a: m.agent_a,
                agent_b: m.agent_b,
                eval_seed: m.eval_seed,
                quality_a: qa,
                quality_b: qb,
                outcome,
            });

            let tau = kendall_tau(&board.mean_order(), &truth)?;
            taus.push(tau);
            if reached.is_none() && tau >= config.tau_target {
                reached = Some(seq);
            }

            let report_due = config.report_every > 0 && seq % config.report_every == 0;
            if report_due || config.stop_when_stable {
                let rep = stopping_report(
                    &board,
                    config.policy.stop_samples,
                    seeding::mix(stop_seed, seq as u64),
                    config.policy.stop_threshold,
                );
                if report_due {
                    result.stopping_trace.push(StoppingPoint {
                        task_id: task.clone(),
                        after_judgments: seq,
                        p_stable_ranking: rep.p_stable_ranking,
                        stable: rep.stable,
                    });
                }
                if config.stop_when_stable && rep.stable {
                    break;
                }
            }
        }

        result.kendall_tau.insert(task.clone(), kendall_tau(&board.mean_order(), &truth)?);
        result.tau_trace.insert(task.clone(), taus);
        result.judgments_to_target.insert(task.clone(), reached);
        result.boards.insert(task.clone(), board);
    }

    result.standing = standings_from_boards(&result.boards, ScoreKind::Mean);
    Ok(result)
}
