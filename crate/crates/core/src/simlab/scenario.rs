//! Scenario files: a JSON description of a simulated evaluation.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{run_tournament, RaterModel, SimAgent, SimError, TournamentConfig, TournamentResult};
use crate::ids::{SeedId, TaskId};
use crate::matchmaker::{SchedulerKind, SchedulerPolicy};
use crate::rating::RatingParams;

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

/// Scenario problem located by its JSON path (`agents[3].perSeedNoise`).
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{path}: {message}")]
pub struct ScenarioError {
    pub path: String,
    pub message: String,
}

impl ScenarioError {
    fn at(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

fn default_budget() -> usize {
    TournamentConfig::default().budget
}

fn default_eval_seeds() -> Vec<SeedId> {
    TournamentConfig::default().eval_seeds
}

fn default_report_every() -> usize {
    TournamentConfig::default().report_every
}

fn default_tau_target() -> f64 {
    0.9
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub tasks: Vec<TaskId>,
    pub agents: Vec<SimAgent>,
    pub rater: RaterModel,
    #[serde(default)]
    pub scheduler: SchedulerKind,
    /// Also run the uniform scheduler on the same seeds for comparison.
    #[serde(default)]
    pub compare_baseline: bool,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_eval_seeds")]
    pub eval_seeds: Vec<SeedId>,
    #[serde(default)]
    pub rating: RatingParams,
    #[serde(default)]
    pub policy: SchedulerPolicy,
    #[serde(default = "default_report_every")]
    pub report_every: usize,
    #[serde(default)]
    pub stop_when_stable: bool,
    #[serde(default = "default_tau_target")]
    pub tau_target: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(ScenarioError::at(
                "schemaVersion",
                format!("unsupported version {} (expected {SCENARIO_SCHEMA_VERSION})", self.schema_version),
            ));
        }
        if self.tasks.is_empty() {
            return Err(ScenarioError::at("tasks", "at least one task is required"));
        }
        if self.agents.len() < 2 {
            return Err(ScenarioError::at("agents", "at least two agents are required"));
        }
        let mut seen = BTreeSet::new();
        for (i, agent) in self.agents.iter().enumerate() {
            if !seen.insert(&agent.id) {
                return Err(ScenarioError::at(format!("agents[{i}].id"), format!("duplicate agent id {}", agent.id)));
            }
            if !(agent.per_seed_noise.is_finite() && agent.per_seed_noise >= 0.0) {
                return Err(ScenarioError::at(format!("agents[{i}].perSeedNoise"), "must be finite and >= 0"));
            }
            for task in &self.tasks {
                match agent.latent_quality.get(task) {
                    None => {
                        return Err(ScenarioError::at(
                            format!("agents[{i}].latentQuality"),
                            format!("missing quality for task {task}"),
                        ))
                    }
                    Some(q) if !q.is_finite() => {
                        return Err(ScenarioError::at(format!("agents[{i}].latentQuality.{task}"), "must be finite"))
                    }
                    _ => {}
                }
            }
        }
        if !(self.rater.beta_rationality.is_finite() && self.rater.beta_rationality >= 0.0) {
            return Err(ScenarioError::at("rater.betaRationality", "must be finite and >= 0"));
        }
        if self.rater.tie_band.is_nan() || self.rater.tie_band < 0.0 {
            return Err(ScenarioError::at("rater.tieBand", "must be >= 0"));
        }
        if self.budget == 0 {
            return Err(ScenarioError::at("budget", "must be >= 1"));
        }
        if self.eval_seeds.is_empty() {
            return Err(ScenarioError::at("evalSeeds", "at least one seed is required"));
        }
        self.rating.validate().map_err(|e| ScenarioError::at("rating", e.to_string()))?;
        self.policy.validate().map_err(|e| ScenarioError::at("policy", e))?;
        if !(-1.0..=1.0).contains(&self.tau_target) {
            return Err(ScenarioError::at("tauTarget", "must lie in [-1, 1]"));
        }
        Ok(())
    }

    pub fn tournament_config(&self, scheduler: SchedulerKind) -> TournamentConfig {
        TournamentConfig {
            scheduler,
            budget: self.budget,
            rating: self.rating,
            policy: self.policy,
            eval_seeds: self.eval_seeds.clone(),
            report_every: self.report_every,
            stop_when_stable: self.stop_when_stable,
            tau_target: self.tau_target,
        }
    }
}

/// Parse and validate scenario JSON.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let scenario: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ScenarioError::at(if path.is_empty() { "$".to_owned() } else { path }, e.into_inner().to_string())
    })?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::at("$", format!("{}: {e}", path.display())))?;
    parse_scenario(&text)
}

/// One tournament of a scenario: which scheduler, which seed, what happened.
pub type ScenarioRun = (SchedulerKind, u64, TournamentResult);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunSummary {
    pub scheduler: SchedulerKind,
    pub seed: u64,
    pub judgments: usize,
    pub kendall_tau: BTreeMap<TaskId, f64>,
    pub judgments_to_target: BTreeMap<TaskId, Option<usize>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskSummary {
    pub median_kendall_tau: f64,
    /// `None` when the median run never reached the target.
    pub median_judgments_to_target: Option<f64>,
    pub runs_reaching_target: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SimulationSummary {
    pub tau_target: f64,
    pub seeds: Vec<u64>,
    pub runs: Vec<RunSummary>,
    pub by_scheduler: BTreeMap<String, BTreeMap<TaskId, TaskSummary>>,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn summarize(runs: &[&RunSummary], task: &TaskId) -> TaskSummary {
    let mut taus: Vec<f64> = runs.iter().map(|r| r.kendall_tau[task]).collect();
    taus.sort_by(f64::total_cmp);
    // Runs that never reach the target count as +inf.
    let mut hits: Vec<f64> = runs
        .iter()
        .map(|r| r.judgments_to_target[task].map_or(f64::INFINITY, |n| n as f64))
        .collect();
    hits.sort_by(f64::total_cmp);
    let m = median(&hits);
    TaskSummary {
        median_kendall_tau: median(&taus),
        median_judgments_to_target: m.is_finite().then_some(m),
        runs_reaching_target: hits.iter().filter(|h| h.is_finite()).count(),
    }
}

fn scheduler_name(kind: SchedulerKind) -> &'static str {
    match kind {
        SchedulerKind::Active => "active",
        SchedulerKind::Uniform => "uniform",
    }
}

/// Every run has its own RNG streams, so runs are spread over threads and
/// collected back in job order.
fn run_parallel(
    scenario: &Scenario,
    jobs: &[(SchedulerKind, u64)],
) -> Result<Vec<ScenarioRun>, SimError> {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(jobs.len().max(1));
    let chunk = jobs.len().div_ceil(workers).max(1);
    let outputs: Vec<Result<Vec<_>, SimError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|&(kind, seed)| {
                            let cfg = scenario.tournament_config(kind);
                            run_tournament(&scenario.agents, &scenario.tasks, &scenario.rater, &cfg, seed)
                                .map(|res| (kind, seed, res))
                        })
                        .collect()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("simulation worker panicked")).collect()
    });
    let mut results = Vec::with_capacity(jobs.len());
    for part in outputs {
        results.extend(part?);
    }
    Ok(results)
}

/// Run the scenario on `n_seeds` consecutive seeds starting at `scenario.seed`.
pub fn run_scenario(
    scenario: &Scenario,
    n_seeds: usize,
) -> Result<(Vec<ScenarioRun>, SimulationSummary), SimError> {
    let mut schedulers = vec![scenario.scheduler];
    if scenario.compare_baseline {
        for extra in [SchedulerKind::Active, SchedulerKind::Uniform] {
            if !schedulers.contains(&extra) {
                schedulers.push(extra);
            }
        }
    }
    let seeds: Vec<u64> = (0..n_seeds as u64).map(|i| scenario.seed.wrapping_add(i)).collect();
    let jobs: Vec<(SchedulerKind, u64)> = schedulers
        .iter()
        .flat_map(|&kind| seeds.iter().map(move |&seed| (kind, seed)))
        .collect();
    let results = run_parallel(scenario, &jobs)?;

    let runs: Vec<RunSummary> = results
        .iter()
        .map(|(kind, seed, res)| RunSummary {
            scheduler: *kind,
            seed: *seed,
            judgments: res.judgments.len(),
            kendall_tau: res.kendall_tau.clone(),
            judgments_to_target: res.judgments_to_target.clone(),
        })
        .collect();
    let mut by_scheduler = BTreeMap::new();
    if !seeds.is_empty() {
        for &kind in &schedulers {
            let subset: Vec<&RunSummary> = runs.iter().filter(|r| r.scheduler == kind).collect();
            let per_task = scenario.tasks.iter().map(|t| (t.clone(), summarize(&subset, t))).collect();
            by_scheduler.insert(scheduler_name(kind).to_owned(), per_task);
        }
    }
    Ok((
        results,
        SimulationSummary {
            tau_target: scenario.tau_target,
            seeds,
            runs,
            by_scheduler,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schemaVersion": 1,
        "tasks": ["t"],
        "agents": [
            {"id": "a", "latentQuality": {"t": 1.0}},
            {"id": "b", "latentQuality": {"t": 0.0}}
        ],
        "rater": {"betaRationality": 1.0},
        "budget": 10
    }"#;

    #[test]
    fn minimal_scenario_parses_with_defaults() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.scheduler, SchedulerKind::Active);
        assert_eq!(s.rating, RatingParams::default());
        assert_eq!(s.eval_seeds.len(), 5);
    }

    #[test]
    fn type_errors_carry_their_path() {
        let bad = MINIMAL.replace(r#""latentQuality": {"t": 0.0}"#, r#""latentQuality": {"t": "high"}"#);
        let err = parse_scenario(&bad).unwrap_err();
        assert_eq!(err.path, "agents[1].latentQuality.t");
    }

    #[test]
    fn semantic_errors_carry_their_path() {
        let bad = MINIMAL.replace(r#"{"id": "b", "latentQuality": {"t": 0.0}}"#, r#"{"id": "b", "latentQuality": {"u": 0.0}}"#);
        assert_eq!(parse_scenario(&bad).unwrap_err().path, "agents[1].latentQuality");
        let bad = MINIMAL.replace(r#""budget": 10"#, r#""budget": 0"#);
        assert_eq!(parse_scenario(&bad).unwrap_err().path, "budget");
        let bad = MINIMAL.replace(r#""budget": 10"#, r#""budget": 10, "colour": "red""#);
        assert!(parse_scenario(&bad).unwrap_err().message.contains("colour"));
    }

    #[test]
    fn baseline_comparison_runs_both_schedulers() {
        let mut s = parse_scenario(MINIMAL).unwrap();
        s.compare_baseline = true;
        let (results, summary) = run_scenario(&s, 3).unwrap();
        assert_eq!(results.len(), 6);
        assert_eq!(summary.by_scheduler.len(), 2);
        assert_eq!(summary.seeds, vec![0, 1, 2]);
    }
}
