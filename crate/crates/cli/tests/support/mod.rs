#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use arena_core::simlab::{run_sessions, League, SessionPlan};
use arena_core::{AssignmentPolicy, RaterClass, RaterModel, RatingParams, Store, StoreConfig};
use chrono::{DateTime, Duration, Utc};

pub fn arena(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arena"))
        .args(args)
        .output()
        .expect("arena binary runs")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

pub fn workspace_file(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

pub fn start() -> DateTime<Utc> {
    "2026-03-01T09:00:00Z".parse().unwrap()
}

pub fn store_config(rating: RatingParams) -> StoreConfig {
    StoreConfig {
        rating,
        durable: false,
        ..StoreConfig::default()
    }
}

/// Record a synthetic two-task league with contractors, one participant and
/// one public rater judging through the assignment path.
pub fn record_log(dir: &Path, rating: RatingParams, judgments_per_task: usize, seed: u64) -> Store {
    let league = League::synthetic(2, 8, 3, seed);
    let mut store = Store::open(dir, store_config(rating)).unwrap();
    league.install(&mut store).unwrap();
    let plan = SessionPlan {
        raters: vec![
            ("contractor-1".into(), RaterClass::Contractor),
            ("contractor-2".into(), RaterClass::Contractor),
            ("team-00".into(), RaterClass::Participant),
            ("visitor".into(), RaterClass::Public),
        ],
        judgments_per_task,
        policy: AssignmentPolicy::default(),
        start: start(),
        step: Duration::seconds(45),
    };
    let model = RaterModel {
        beta_rationality: 1.0,
        tie_band: 0.25,
    };
    let done = run_sessions(&mut store, &league.task_ids(), &league.agents, &model, &plan, seed).unwrap();
    assert!(done.values().all(|n| *n == judgments_per_task), "{done:?}");
    store
}

/// Minimal engine config carrying only rating parameters.
pub fn rating_config(dir: &Path, name: &str, rating: RatingParams) -> PathBuf {
    let path = dir.join(name);
    let doc = serde_json::json!({ "schemaVersion": 1, "rating": rating });
    std::fs::write(&path, serde_json::to_vec_pretty(&doc).unwrap()).unwrap();
    path
}
