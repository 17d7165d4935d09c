//! Match selection and the stopping rule.
//!
//! The active scheduler picks the ordered pair whose next comparison is
//! expected to remove the most posterior variance from the two ratings,
//! with the outcome distribution taken from the current ratings.

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gaussian;
use crate::ids::{AgentId, SeedId, TaskId};
use crate::rating::{update_pair, Outcome, Rating, RatingParams};
use crate::scoring::TaskScoreboard;
use crate::seeding;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("at least two agents are needed to schedule a match (found {0})")]
    NotEnoughAgents(usize),
    #[error("every pair has used its comparison budget or lacks a shared seed")]
    BudgetExhausted,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct SchedulerPolicy {
    /// Maximum judgments per ordered pair per task.
    pub per_pair_budget: u32,
    pub stop_threshold: f64,
    pub stop_samples: usize,
}

impl Default for SchedulerPolicy {
    fn default() -> Self {
        Self {
            per_pair_budget: 10,
            stop_threshold: 0.8,
            stop_samples: 10_000,
        }
    }
}

impl SchedulerPolicy {
    pub fn validate(&self) -> Result<(), String> {
        if self.per_pair_budget == 0 {
            return Err("perPairBudget must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.stop_threshold) {
            return Err("stopThreshold must lie in [0, 1]".into());
        }
        if self.stop_samples == 0 {
            return Err("stopSamples must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SchedulerKind {
    #[default]
    Active,
    Uniform,
}

/// Seeds and video references available for one task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskRoster {
    pub task_id: TaskId,
    pub seeds: Vec<SeedId>,
    pub videos: BTreeMap<AgentId, BTreeMap<SeedId, String>>,
}

impl TaskRoster {
    /// Every agent has a video for every seed, with synthetic references.
    pub fn complete<A, S>(task_id: TaskId, agents: A, seeds: S) -> Self
    where
        A: IntoIterator<Item = AgentId>,
        S: IntoIterator<Item = SeedId>,
    {
        let seeds: Vec<SeedId> = seeds.into_iter().collect();
        let videos = agents
            .into_iter()
            .map(|a| {
                let vids = seeds
                    .iter()
                    .map(|s| (s.clone(), format!("sim://{a}/{task_id}/{s}")))
                    .collect();
                (a, vids)
            })
            .collect();
        TaskRoster { task_id, seeds, videos }
    }

    fn video(&self, agent: &AgentId, seed: &SeedId) -> Option<&String> {
        self.videos.get(agent)?.get(seed)
    }
}

/// A match already issued on a task; the unit the budgets are counted in.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScheduledMatch {
    pub agent_a: AgentId,
    pub agent_b: AgentId,
    pub eval_seed: SeedId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MatchRequest {
    pub task_id: TaskId,
    pub agent_a: AgentId,
    pub agent_b: AgentId,
    pub eval_seed: SeedId,
    pub video_a: String,
    pub video_b: String,
}

#[derive(Default)]
struct Usage<'h> {
    ordered: BTreeMap<(&'h AgentId, &'h AgentId), u32>,
    by_seed: BTreeMap<(&'h AgentId, &'h AgentId, &'h SeedId), u32>,
}

impl<'h> Usage<'h> {
    fn from_history(history: &'h [ScheduledMatch]) -> Self {
        let mut usage = Usage::default();
        for m in history {
            *usage.ordered.entry((&m.agent_a, &m.agent_b)).or_default() += 1;
            let (lo, hi) = unordered(&m.agent_a, &m.agent_b);
            *usage.by_seed.entry((lo, hi, &m.eval_seed)).or_default() += 1;
        }
        usage
    }

    fn pair_count(&self, a: &AgentId, b: &AgentId) -> u32 {
        self.ordered.get(&(a, b)).copied().unwrap_or(0)
    }

    fn seed_count(&self, a: &AgentId, b: &AgentId, seed: &SeedId) -> u32 {
        let (lo, hi) = unordered(a, b);
        self.by_seed.get(&(lo, hi, seed)).copied().unwrap_or(0)
    }
}

fn unordered<'a>(a: &'a AgentId, b: &'a AgentId) -> (&'a AgentId, &'a AgentId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Ordered pairs still within budget, each with its least-used shared seed.
fn open_candidates<'b>(
    board: &'b TaskScoreboard,
    roster: &'b TaskRoster,
    history: &[ScheduledMatch],
    policy: &SchedulerPolicy,
) -> Result<Vec<(&'b AgentId, &'b AgentId, &'b SeedId)>, ScheduleError> {
    let agents: Vec<&AgentId> = board
        .ratings
        .keys()
        .filter(|a| roster.videos.contains_key(*a))
        .collect();
    if agents.len() < 2 {
        return Err(ScheduleError::NotEnoughAgents(agents.len()));
    }
    let usage = Usage::from_history(history);
    let mut out = Vec::new();
    for &a in &agents {
        for &b in &agents {
            if a == b || usage.pair_count(a, b) >= policy.per_pair_budget {
                continue;
            }
            let seed = roster
                .seeds
                .iter()
                .filter(|s| roster.video(a, s).is_some() && roster.video(b, s).is_some())
                .min_by(|x, y| usage.seed_count(a, b, x).cmp(&usage.seed_count(a, b, y)).then_with(|| x.cmp(y)));
            if let Some(seed) = seed {
                out.push((a, b, seed));
            }
        }
    }
    if out.is_empty() {
        return Err(ScheduleError::BudgetExhausted);
    }
    Ok(out)
}

fn request(roster: &TaskRoster, task_id: &TaskId, a: &AgentId, b: &AgentId, seed: &SeedId) -> MatchRequest {
    MatchRequest {
        task_id: task_id.clone(),
        agent_a: a.clone(),
        agent_b: b.clone(),
        eval_seed: seed.clone(),
        video_a: roster.video(a, seed).cloned().unwrap_or_default(),
        video_b: roster.video(b, seed).cloned().unwrap_or_default(),
    }
}

/// Probabilities of (first wins, second wins, draw) under the current beliefs.
pub fn outcome_probabilities(a: &Rating, b: &Rating, params: &RatingParams) -> [f64; 3] {
    let tau_sq = params.tau * params.tau;
    let c = (2.0 * params.beta * params.beta + ((a.sigma * a.sigma + tau_sq) + (b.sigma * b.sigma + tau_sq))).sqrt();
    let eps = params.draw_margin().unwrap_or(0.0);
    let first = gaussian::cdf((a.mu - b.mu - eps) / c);
    let second = gaussian::cdf((b.mu - a.mu - eps) / c);
    [first, second, (1.0 - (first + second)).max(0.0)]
}

/// Expected drop in the summed posterior variance of both players.
pub fn expected_variance_reduction(a: &Rating, b: &Rating, params: &RatingParams) -> f64 {
    let probs = outcome_probabilities(a, b, params);
    let prior = a.sigma * a.sigma + b.sigma * b.sigma;
    let mut expected_post = 0.0;
    for (p, outcome) in probs.into_iter().zip([Outcome::FirstWins, Outcome::SecondWins, Outcome::Draw]) {
        if p <= 0.0 {
            continue;
        }
        match update_pair(a, b, outcome, params) {
            Ok((pa, pb)) => expected_post += p * (pa.sigma * pa.sigma + pb.sigma * pb.sigma),
            Err(_) => return 0.0,
        }
    }
    prior - expected_post
}

/// The most informative open match. Exact ties go to the lexicographically
/// smallest `(agent_a, agent_b, eval_seed)`.
pub fn next_match(
    board: &TaskScoreboard,
    roster: &TaskRoster,
    history: &[ScheduledMatch],
    policy: &SchedulerPolicy,
    params: &RatingParams,
) -> Result<MatchRequest, ScheduleError> {
    let candidates = open_candidates(board, roster, history, policy)?;
    let mut best: Option<(f64, &AgentId, &AgentId, &SeedId)> = None;
    for (a, b, seed) in candidates {
        let gain = expected_variance_reduction(&board.ratings[a], &board.ratings[b], params);
        if best.is_none_or(|(g, ..)| gain > g) {
            best = Some((gain, a, b, seed));
        }
    }
    let (_, a, b, seed) = best.expect("candidates are non-empty");
    Ok(request(roster, &board.task_id, a, b, seed))
}

/// Control arm: a uniformly random open pair. The draw depends only on
/// `rng_seed` and the length of `history`.
pub fn uniform_baseline_schedule(
    board: &TaskScoreboard,
    roster: &TaskRoster,
    history: &[ScheduledMatch],
    policy: &SchedulerPolicy,
    rng_seed: u64,
) -> Result<MatchRequest, ScheduleError> {
    let candidates = open_candidates(board, roster, history, policy)?;
    let mut rng = StdRng::seed_from_u64(seeding::mix(rng_seed, history.len() as u64));
    let (a, b, seed) = candidates[rng.random_range(0..candidates.len())];
    Ok(request(roster, &board.task_id, a, b, seed))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PairFlip {
    pub upper: AgentId,
    pub lower: AgentId,
    pub flip_prob: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StoppingReport {
    pub stable: bool,
    pub threshold: f64,
    pub n_samples: usize,
    pub p_stable_ranking: f64,
    /// Adjacent pairs of the posterior-mean order, top to bottom.
    pub per_pair_flip_prob: Vec<PairFlip>,
}

/// Monte Carlo estimate of how likely the posterior-mean order is the true
/// order: draw every skill from its posterior and check the sampled ranking.
pub fn stopping_report(board: &TaskScoreboard, n_samples: usize, rng_seed: u64, threshold: f64) -> StoppingReport {
    let n_samples = n_samples.max(1);
    let order = board.mean_order();
    let ratings: Vec<Rating> = order.iter().map(|a| board.ratings[a]).collect();
    let pairs = order.len().saturating_sub(1);

    let mut rng = StdRng::seed_from_u64(rng_seed);
    let mut flips = vec![0usize; pairs];
    let mut stable = 0usize;
    let mut sample = vec![0.0; ratings.len()];
    for _ in 0..n_samples {
        for (s, r) in sample.iter_mut().zip(&ratings) {
            let z: f64 = rng.sample(StandardNormal);
            *s = r.mu + r.sigma * z;
        }
        let mut intact = true;
        for i in 0..pairs {
            // Equal draws keep the id order, which is also the mean-order tie-break.
            let flipped = sample[i] < sample[i + 1] || (sample[i] == sample[i + 1] && order[i] > order[i + 1]);
            if flipped {
                flips[i] += 1;
                intact = false;
            }
        }
        if intact {
            stable += 1;
        }
    }

    let n = n_samples as f64;
    let p_stable_ranking = stable as f64 / n;
    StoppingReport {
        stable: p_stable_ranking >= threshold,
        threshold,
        n_samples,
        p_stable_ranking,
        per_pair_flip_prob: (0..pairs)
            .map(|i| PairFlip {
                upper: order[i].clone(),
                lower: order[i + 1].clone(),
                flip_prob: flips[i] as f64 / n,
            })
            .collect(),
    }
}
