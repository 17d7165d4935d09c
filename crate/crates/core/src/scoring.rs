//! Per-task standardization of skill scores and cross-task averaging.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ids::{AgentId, TaskId};
use crate::rating::{Rating, RatingParams};

/// Ratings of every agent entered on one task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskScoreboard {
    pub task_id: TaskId,
    pub ratings: BTreeMap<AgentId, Rating>,
    pub judgments_count: BTreeMap<AgentId, u64>,
}

impl TaskScoreboard {
    pub fn new(task_id: TaskId) -> Self {
        Self {
            task_id,
            ratings: BTreeMap::new(),
            judgments_count: BTreeMap::new(),
        }
    }

    /// Board with every agent at the prior.
    pub fn with_agents<I>(task_id: TaskId, agents: I, params: &RatingParams) -> Self
    where
        I: IntoIterator<Item = AgentId>,
    {
        let mut board = Self::new(task_id);
        for agent in agents {
            board.insert_agent(agent, params.prior());
        }
        board
    }

    pub fn insert_agent(&mut self, agent: AgentId, rating: Rating) {
        self.judgments_count.entry(agent.clone()).or_insert(0);
        self.ratings.insert(agent, rating);
    }

    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    pub fn rating(&self, agent: &AgentId) -> Option<&Rating> {
        self.ratings.get(agent)
    }

    /// Agents sorted by descending posterior mean, ties by id.
    pub fn mean_order(&self) -> Vec<AgentId> {
        self.order_by(ScoreKind::Mean)
    }

    pub fn order_by(&self, kind: ScoreKind) -> Vec<AgentId> {
        let mut agents: Vec<(&AgentId, f64)> =
            self.ratings.iter().map(|(id, r)| (id, kind.raw(r))).collect();
        agents.sort_by(|x, y| y.1.total_cmp(&x.1).then_with(|| x.0.cmp(y.0)));
        agents.into_iter().map(|(id, _)| id.clone()).collect()
    }
}

/// Which scalar of a rating is standardized.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum ScoreKind {
    #[default]
    Mean,
    /// `mu - k * sigma`
    Conservative(f64),
}

impl ScoreKind {
    pub fn raw(self, r: &Rating) -> f64 {
        match self {
            ScoreKind::Mean => r.mu,
            ScoreKind::Conservative(k) => r.conservative(k),
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScoreKind::Mean => f.write_str("mean"),
            ScoreKind::Conservative(k) => write!(f, "conservative:{k}"),
        }
    }
}

impl FromStr for ScoreKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "mean" => Ok(ScoreKind::Mean),
            None if s == "conservative" => Ok(ScoreKind::Conservative(3.0)),
            Some(("conservative", k)) => match k.parse::<f64>() {
                Ok(k) if k.is_finite() && k >= 0.0 => Ok(ScoreKind::Conservative(k)),
                _ => Err(format!("conservative multiplier must be a number >= 0, got {k:?}")),
            },
            _ => Err(format!("unknown score kind {s:?} (expected mean or conservative:<k>)")),
        }
    }
}

impl Serialize for ScoreKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ScoreKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Standardize raw scores to population mean 0 and standard deviation 1.
///
/// When every raw score is equal the spread is undefined and all z-scores are 0.
pub fn standardize<K: Ord + Clone>(raw: &BTreeMap<K, f64>) -> BTreeMap<K, f64> {
    if raw.is_empty() {
        return BTreeMap::new();
    }
    let n = raw.len() as f64;
    let mean = raw.values().sum::<f64>() / n;
    let var = raw.values().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    let all_equal = raw.values().all(|s| *s == *raw.values().next().unwrap());
    raw.iter()
        .map(|(k, s)| {
            let z = if all_equal || sd == 0.0 { 0.0 } else { (s - mean) / sd };
            (k.clone(), z)
        })
        .collect()
}

pub fn normalize_task(board: &TaskScoreboard, kind: ScoreKind) -> BTreeMap<AgentId, f64> {
    let raw = board
        .ratings
        .iter()
        .map(|(id, r)| (id.clone(), kind.raw(r)))
        .collect();
    standardize(&raw)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExcludedAgent {
    pub agent_id: AgentId,
    pub missing_tasks: Vec<TaskId>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FinalStanding {
    pub tasks: Vec<TaskId>,
    pub per_task_z: BTreeMap<TaskId, BTreeMap<AgentId, f64>>,
    pub final_score: BTreeMap<AgentId, f64>,
    pub rank_order: Vec<AgentId>,
    /// Agents without a score on every listed task; they are left out of the ranking.
    pub excluded: Vec<ExcludedAgent>,
}

impl FinalStanding {
    pub fn rank_of(&self, agent: &AgentId) -> Option<usize> {
        self.rank_order.iter().position(|a| a == agent).map(|i| i + 1)
    }
}

/// Average each agent's z-scores over `tasks`.
///
/// Tasks are deduplicated and summed in sorted order so the result does not
/// depend on the order they are listed in.
pub fn aggregate(per_task: &BTreeMap<TaskId, BTreeMap<AgentId, f64>>, tasks: &[TaskId]) -> FinalStanding {
    let tasks: Vec<TaskId> = tasks.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    let empty = BTreeMap::new();
    let all_agents: BTreeSet<&AgentId> = tasks
        .iter()
        .flat_map(|t| per_task.get(t).unwrap_or(&empty).keys())
        .collect();

    let mut final_score = BTreeMap::new();
    let mut excluded = Vec::new();
    for agent in all_agents {
        let missing: Vec<TaskId> = tasks
            .iter()
            .filter(|t| !per_task.get(*t).is_some_and(|z| z.contains_key(agent)))
            .cloned()
            .collect();
        if !missing.is_empty() {
            excluded.push(ExcludedAgent {
                agent_id: agent.clone(),
                missing_tasks: missing,
            });
            continue;
        }
        let sum: f64 = tasks.iter().map(|t| per_task[t][agent]).sum();
        final_score.insert(agent.clone(), sum / tasks.len() as f64);
    }

    let mut rank_order: Vec<AgentId> = final_score.keys().cloned().collect();
    rank_order.sort_by(|x, y| final_score[y].total_cmp(&final_score[x]).then_with(|| x.cmp(y)));

    let per_task_z = tasks
        .iter()
        .map(|t| (t.clone(), per_task.get(t).cloned().unwrap_or_default()))
        .collect();
    FinalStanding {
        tasks,
        per_task_z,
        final_score,
        rank_order,
        excluded,
    }
}

/// Canonical report: standings plus per-task judgment counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StandingsReport {
    pub schema_version: u32,
    pub score_kind: ScoreKind,
    #[serde(flatten)]
    pub standing: FinalStanding,
    pub judgment_counts: BTreeMap<TaskId, BTreeMap<AgentId, u64>>,
}

pub const STANDINGS_SCHEMA_VERSION: u32 = 1;

/// Normalize every board and aggregate across all of them.
pub fn standings_from_boards(boards: &BTreeMap<TaskId, TaskScoreboard>, kind: ScoreKind) -> StandingsReport {
    let per_task: BTreeMap<TaskId, BTreeMap<AgentId, f64>> = boards
        .iter()
        .map(|(t, b)| (t.clone(), normalize_task(b, kind)))
        .collect();
    let tasks: Vec<TaskId> = boards.keys().cloned().collect();
    StandingsReport {
        schema_version: STANDINGS_SCHEMA_VERSION,
        score_kind: kind,
        standing: aggregate(&per_task, &tasks),
        judgment_counts: boards
            .iter()
            .map(|(t, b)| (t.clone(), b.judgments_count.clone()))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(values: &[f64]) -> BTreeMap<AgentId, f64> {
        values
            .iter()
            .enumerate()
            .map(|(i, v)| (AgentId::new(format!("a{i}")), *v))
            .collect()
    }

    fn z_map(pairs: &[(&str, f64)]) -> BTreeMap<AgentId, f64> {
        pairs.iter().map(|(a, z)| (AgentId::from(*a), *z)).collect()
    }

    #[test]
    fn one_two_three() {
        let z: Vec<f64> = standardize(&raw(&[1.0, 2.0, 3.0])).into_values().collect();
        let expected = 1.0 / (2.0f64 / 3.0).sqrt();
        assert!((z[0] + expected).abs() < 1e-12);
        assert_eq!(z[1], 0.0);
        assert!((z[2] - expected).abs() < 1e-12);
        assert!((expected - 1.224_744_871).abs() < 1e-9);
    }

    #[test]
    fn degenerate_boards() {
        assert_eq!(standardize(&raw(&[7.0])).into_values().collect::<Vec<_>>(), vec![0.0]);
        assert!(standardize(&raw(&[4.0, 4.0, 4.0])).values().all(|z| *z == 0.0));
        assert!(standardize::<AgentId>(&BTreeMap::new()).is_empty());
        let board = TaskScoreboard::new("t".into());
        assert!(normalize_task(&board, ScoreKind::Mean).is_empty());
    }

    #[test]
    fn aggregate_examples() {
        let t1 = TaskId::from("t1");
        let t2 = TaskId::from("t2");
        let mut per_task = BTreeMap::new();
        per_task.insert(t1.clone(), z_map(&[("x", 1.0), ("y", -1.0)]));
        per_task.insert(t2.clone(), z_map(&[("x", -1.0), ("y", 1.0)]));
        let s = aggregate(&per_task, &[t1.clone(), t2.clone()]);
        assert_eq!(s.final_score[&AgentId::from("x")], 0.0);
        // tie broken by id
        assert_eq!(s.rank_order, vec![AgentId::from("x"), AgentId::from("y")]);

        let s = aggregate(&per_task, std::slice::from_ref(&t1));
        assert_eq!(s.final_score[&AgentId::from("y")], -1.0);

        let tasks: Vec<TaskId> = (0..4).map(|i| TaskId::new(format!("t{i}"))).collect();
        let per_task = tasks.iter().map(|t| (t.clone(), z_map(&[("x", 0.5)]))).collect();
        assert_eq!(aggregate(&per_task, &tasks).final_score[&AgentId::from("x")], 0.5);
    }

    #[test]
    fn missing_task_is_excluded_and_reported() {
        let mut per_task = BTreeMap::new();
        per_task.insert(TaskId::from("t1"), z_map(&[("x", 1.0), ("y", -1.0)]));
        per_task.insert(TaskId::from("t2"), z_map(&[("x", 0.0)]));
        let s = aggregate(&per_task, &["t1".into(), "t2".into()]);
        assert_eq!(s.rank_order, vec![AgentId::from("x")]);
        assert_eq!(s.excluded.len(), 1);
        assert_eq!(s.excluded[0].agent_id, AgentId::from("y"));
        assert_eq!(s.excluded[0].missing_tasks, vec![TaskId::from("t2")]);
    }

    #[test]
    fn score_kind_parsing() {
        assert_eq!("mean".parse::<ScoreKind>().unwrap(), ScoreKind::Mean);
        assert_eq!("conservative:2.5".parse::<ScoreKind>().unwrap(), ScoreKind::Conservative(2.5));
        assert!("conservative:-1".parse::<ScoreKind>().is_err());
        assert!("median".parse::<ScoreKind>().is_err());
        let json = serde_json::to_string(&ScoreKind::Conservative(3.0)).unwrap();
        assert_eq!(json, "\"conservative:3\"");
    }
}
