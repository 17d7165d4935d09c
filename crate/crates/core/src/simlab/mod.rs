//! Simulated raters over synthetic agents with known latent quality.
//!
//! A rater compares two videos by their underlying quality `q` and prefers the
//! first with probability `exp(beta q1) / (exp(beta q1) + exp(beta q2))`.
//! Running full tournaments against these raters measures how well the
//! scheduler and scorer recover the true ranking.

mod league;
mod scenario;
mod session;
mod tournament;

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{AgentId, SeedId, TaskId};
use crate::matchmaker::ScheduleError;
use crate::rating::{Outcome, RatingError};
use crate::seeding;
use crate::store::StoreError;

pub use league::League;
pub use scenario::{
    load_scenario, parse_scenario, run_scenario, RunSummary, Scenario, ScenarioRun, ScenarioError, SimulationSummary,
    TaskSummary, SCENARIO_SCHEMA_VERSION,
};
pub use session::{run_sessions, SessionPlan};
pub use tournament::{run_tournament, SimJudgment, StoppingPoint, TournamentConfig, TournamentResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Rating(#[from] RatingError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SimAgent {
    pub id: AgentId,
    /// True quality per task, in reward units.
    pub latent_quality: BTreeMap<TaskId, f64>,
    /// Spread of per-video quality around the latent value.
    #[serde(default)]
    pub per_seed_noise: f64,
}

impl SimAgent {
    pub fn new(id: impl Into<AgentId>, per_seed_noise: f64) -> Self {
        Self {
            id: id.into(),
            latent_quality: BTreeMap::new(),
            per_seed_noise,
        }
    }

    pub fn with_quality(mut self, task: impl Into<TaskId>, quality: f64) -> Self {
        self.latent_quality.insert(task.into(), quality);
        self
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.per_seed_noise.is_finite() && self.per_seed_noise >= 0.0) {
            return Err(SimError::InvalidInput(format!("agent {}: perSeedNoise must be >= 0", self.id)));
        }
        if let Some((task, _)) = self.latent_quality.iter().find(|(_, q)| !q.is_finite()) {
            return Err(SimError::InvalidInput(format!("agent {}: quality on {task} is not finite", self.id)));
        }
        Ok(())
    }

    fn quality(&self, task: &TaskId) -> Result<f64, SimError> {
        self.latent_quality
            .get(task)
            .copied()
            .ok_or_else(|| SimError::InvalidInput(format!("agent {} has no quality for task {task}", self.id)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RaterModel {
    /// Boltzmann rationality, in inverse reward units. 0 is a coin flip.
    pub beta_rationality: f64,
    /// Quality differences strictly inside this band are called a draw.
    /// 0 never draws.
    #[serde(default)]
    pub tie_band: f64,
}

impl Default for RaterModel {
    fn default() -> Self {
        Self {
            beta_rationality: 1.0,
            tie_band: 0.0,
        }
    }
}

impl RaterModel {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.beta_rationality >= 0.0 && !self.beta_rationality.is_nan()) {
            return Err(SimError::InvalidInput("betaRationality must be >= 0".into()));
        }
        if self.tie_band.is_nan() || self.tie_band < 0.0 {
            return Err(SimError::InvalidInput("tieBand must be >= 0".into()));
        }
        Ok(())
    }
}

/// Boltzmann-rational probability that reward `r1` is preferred over `r2`.
///
/// Evaluated as a logistic of `beta * (r1 - r2)` on whichever side keeps the
/// exponent non-positive, so it never overflows.
pub fn p_prefer(r1: f64, r2: f64, beta: f64) -> f64 {
    let x = beta * (r1 - r2);
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Per-video qualities for one tournament. The same `(agent, task, seed)`
/// video always has the same quality for a given world seed.
#[derive(Clone, Copy, Debug)]
pub struct SimWorld {
    pub seed: u64,
}

impl SimWorld {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn video_quality(&self, agent: &SimAgent, task: &TaskId, eval_seed: &SeedId) -> Result<f64, SimError> {
        let base = agent.quality(task)?;
        if agent.per_seed_noise == 0.0 {
            return Ok(base);
        }
        let stream = seeding::mix_labels(self.seed, &["video", agent.id.as_str(), task.as_str(), eval_seed.as_str()]);
        let z: f64 = StdRng::seed_from_u64(stream).sample(StandardNormal);
        Ok(base + agent.per_seed_noise * z)
    }

    /// One simulated verdict on the pair of videos for `eval_seed`.
    pub fn judge<R: Rng + ?Sized>(
        &self,
        a: &SimAgent,
        b: &SimAgent,
        task: &TaskId,
        eval_seed: &SeedId,
        model: &RaterModel,
        rng: &mut R,
    ) -> Result<(Outcome, f64, f64), SimError> {
        let qa = self.video_quality(a, task, eval_seed)?;
        let qb = self.video_quality(b, task, eval_seed)?;
        Ok((verdict(qa, qb, model, rng), qa, qb))
    }
}

fn verdict<R: Rng + ?Sized>(qa: f64, qb: f64, model: &RaterModel, rng: &mut R) -> Outcome {
    if (qa - qb).abs() < model.tie_band {
        return Outcome::Draw;
    }
    let u: f64 = rng.random();
    if u < p_prefer(qa, qb, model.beta_rationality) {
        Outcome::FirstWins
    } else {
        Outcome::SecondWins
    }
}

/// Standalone judgment: video qualities and the coin both come from `rng_seed`.
pub fn sample_judgment(
    a: &SimAgent,
    b: &SimAgent,
    task: &TaskId,
    eval_seed: &SeedId,
    model: &RaterModel,
    rng_seed: u64,
) -> Result<Outcome, SimError> {
    model.validate()?;
    let world = SimWorld::new(rng_seed);
    let mut rng = StdRng::seed_from_u64(seeding::mix(rng_seed, 0x6a75_6467));
    world.judge(a, b, task, eval_seed, model, &mut rng).map(|(o, ..)| o)
}

/// Kendall tau-a between two orderings of the same agents.
pub fn kendall_tau(order_a: &[AgentId], order_b: &[AgentId]) -> Result<f64, SimError> {
    if order_a.len() != order_b.len() {
        return Err(SimError::InvalidInput(format!(
            "orders have different lengths ({} vs {})",
            order_a.len(),
            order_b.len()
        )));
    }
    let pos_b: HashMap<&AgentId, usize> = order_b.iter().enumerate().map(|(i, a)| (a, i)).collect();
    if pos_b.len() != order_b.len() || order_a.iter().collect::<HashSet<_>>().len() != order_a.len() {
        return Err(SimError::InvalidInput("orders contain duplicate agents".into()));
    }
    let ranks: Vec<usize> = order_a
        .iter()
        .map(|a| {
            pos_b
                .get(a)
                .copied()
                .ok_or_else(|| SimError::InvalidInput(format!("agent {a} missing from second order")))
        })
        .collect::<Result<_, _>>()?;
    let n = ranks.len();
    if n < 2 {
        return Ok(1.0);
    }
    let mut balance: i64 = 0;
    for i in 0..n {
        for j in i + 1..n {
            balance += if ranks[i] < ranks[j] { 1 } else { -1 };
        }
    }
    Ok(balance as f64 / (n * (n - 1) / 2) as f64)
}

/// Agents of one task sorted by descending latent quality, ties by id.
pub fn true_order(agents: &[SimAgent], task: &TaskId) -> Result<Vec<AgentId>, SimError> {
    let mut scored = agents
        .iter()
        .map(|a| Ok((a.quality(task)?, &a.id)))
        .collect::<Result<Vec<_>, SimError>>()?;
    scored.sort_by(|x, y| y.0.total_cmp(&x.0).then_with(|| x.1.cmp(y.1)));
    Ok(scored.into_iter().map(|(_, id)| id.clone()).collect())
}
