mod support;

use std::collections::BTreeMap;
use std::fs;

use arena_core::simlab::parse_scenario;
use arena_core::{RatingParams, RatingStream, ScoreKind, StandingsReport, Store};
use arena_cli::StoppingDoc;
use serde_json::Value;
use support::*;

const SMALL_SCENARIO: &str = r#"{
    "schemaVersion": 1,
    "tasks": ["t"],
    "agents": [
        {"id": "a", "latentQuality": {"t": 2.0}},
        {"id": "b", "latentQuality": {"t": 1.0}},
        {"id": "c", "latentQuality": {"t": 0.0}}
    ],
    "rater": {"betaRationality": 1.5, "tieBand": 0.1},
    "compareBaseline": true,
    "budget": 40,
    "seed": 3
}"#;

#[test]
fn empty_log_scores_to_empty_standings() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("quiet.ndjson");
    fs::write(&file, "").unwrap();
    for log in [dir.path(), file.as_path()] {
        let out = arena(&["score", "--log", path_str(log)]);
        assert!(out.status.success(), "{}", stderr(&out));
        let report: StandingsReport = serde_json::from_str(&stdout(&out)).unwrap();
        assert!(report.standing.rank_order.is_empty());
        assert!(report.standing.tasks.is_empty());
    }
}

#[test]
fn invalid_scenario_exits_2_with_the_offending_path() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, SMALL_SCENARIO.replace(r#""t": 1.0"#, r#""t": "high""#)).unwrap();
    let out = arena(&["simulate", "--scenario", path_str(&bad), "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("agents[1].latentQuality.t"), "{}", stderr(&out));

    fs::write(&bad, SMALL_SCENARIO.replace(r#""budget": 40"#, r#""budget": 0"#)).unwrap();
    let out = arena(&["validate", "--scenario", path_str(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("budget"), "{}", stderr(&out));
}

#[test]
fn invalid_config_exits_2_with_the_offending_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("engine.json");
    fs::write(&cfg, r#"{"schemaVersion": 1, "service": {"leaseMinutes": "soon"}}"#).unwrap();
    let out = arena(&["validate", "--config", path_str(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("service.leaseMinutes"), "{}", stderr(&out));
}

#[test]
fn bundled_files_validate() {
    let out = arena(&[
        "validate",
        "--config",
        path_str(&workspace_file("configs/engine.example.json")),
        "--scenario",
        path_str(&workspace_file("scenarios/rank_recovery_16.json")),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let doc: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["files"].as_array().unwrap().len(), 2);
}

#[test]
fn single_seed_simulation_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.json");
    fs::write(&scenario, SMALL_SCENARIO).unwrap();
    let mut outputs = Vec::new();
    for run in ["one", "two"] {
        let out_dir = dir.path().join(run);
        let out = arena(&["simulate", "--scenario", path_str(&scenario), "--seeds", "1", "--out", path_str(&out_dir)]);
        assert!(out.status.success(), "{}", stderr(&out));
        let files: Vec<Vec<u8>> = ["results.json", "judgments.csv", "summary.json"]
            .iter()
            .map(|f| fs::read(out_dir.join(f)).unwrap())
            .collect();
        outputs.push((stdout(&out), files));
    }
    assert_eq!(outputs[0], outputs[1]);

    let summary: Value = serde_json::from_str(&outputs[0].0).unwrap();
    assert_eq!(summary["seeds"], serde_json::json!([3]));
    assert_eq!(summary["runs"].as_array().unwrap().len(), 2);
    assert!(summary["byScheduler"]["active"]["t"]["medianKendallTau"].is_number());

    // Two runs of 40 judgments each, plus the header.
    let csv = String::from_utf8(outputs[0].1[1].clone()).unwrap();
    assert_eq!(csv.lines().count(), 81);
    assert!(csv.starts_with("scheduler,seed,taskId,seq,agentA,agentB,evalSeed,qualityA,qualityB,outcome\n"));
}

#[test]
fn simulate_summary_matches_library_run() {
    let dir = tempfile::tempdir().unwrap();
    let scenario_path = dir.path().join("s.json");
    fs::write(&scenario_path, SMALL_SCENARIO).unwrap();
    let out_dir = dir.path().join("out");
    let out = arena(&["simulate", "--scenario", path_str(&scenario_path), "--seeds", "3", "--out", path_str(&out_dir)]);
    assert!(out.status.success(), "{}", stderr(&out));

    let (_, summary) = arena_core::simlab::run_scenario(&parse_scenario(SMALL_SCENARIO).unwrap(), 3).unwrap();
    let mut expected = serde_json::to_value(&summary).unwrap();
    expected["schemaVersion"] = 1.into();
    let written: Value = serde_json::from_slice(&fs::read(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(written, expected);
}

#[test]
fn score_replays_the_store_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log");
    let live = record_log(&log, RatingParams::default(), 120, 5);
    for (stream, flag) in [(RatingStream::Official, "official"), (RatingStream::Provisional, "provisional")] {
        let out = arena(&["score", "--log", path_str(&log), "--stream", flag, "--score-kind", "conservative:2"]);
        assert!(out.status.success(), "{}", stderr(&out));
        let expected = serde_json::to_string_pretty(&live.final_standings(stream, ScoreKind::Conservative(2.0))).unwrap();
        assert_eq!(stdout(&out).trim_end(), expected);
    }

    let report_path = dir.path().join("standings.json");
    let out = arena(&["score", "--log", path_str(&log), "--out", path_str(&report_path), "--format", "text"]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("rank"));
    let written: StandingsReport = serde_json::from_slice(&fs::read(&report_path).unwrap()).unwrap();
    assert_eq!(written, live.final_standings(RatingStream::Official, ScoreKind::Mean));
}

#[test]
fn affine_rescaled_ratings_give_identical_z_scores() {
    // Scaling every rating parameter by `a` and shifting the prior mean by `b`
    // moves every posterior mean to `a * mu + b`, which z-scores cannot see.
    let base = RatingParams::default();
    let (a, b) = (3.5, -40.0);
    let scaled = RatingParams {
        mu0: a * base.mu0 + b,
        sigma0: a * base.sigma0,
        beta: a * base.beta,
        tau: a * base.tau,
        p_draw: base.p_draw,
    };
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log");
    record_log(&log, base, 150, 9);
    let dup = dir.path().join("dup");
    fs::create_dir(&dup).unwrap();
    for file in fs::read_dir(&log).unwrap() {
        let file = file.unwrap().path();
        fs::copy(&file, dup.join(file.file_name().unwrap())).unwrap();
    }
    let base_cfg = rating_config(dir.path(), "base.json", base);
    let scaled_cfg = rating_config(dir.path(), "scaled.json", scaled);

    let score = |log: &std::path::Path, cfg: &std::path::Path| -> StandingsReport {
        let out = arena(&["score", "--log", path_str(log), "--config", path_str(cfg)]);
        assert!(out.status.success(), "{}", stderr(&out));
        serde_json::from_str(&stdout(&out)).unwrap()
    };
    let x = score(&log, &base_cfg);
    let y = score(&dup, &scaled_cfg);
    assert_eq!(x.standing.rank_order, y.standing.rank_order);
    assert!(!x.standing.rank_order.is_empty());
    for (task, zs) in &x.standing.per_task_z {
        for (agent, z) in zs {
            let other = y.standing.per_task_z[task][agent];
            assert!((z - other).abs() < 1e-9, "{task} {agent}: {z} vs {other}");
        }
    }
}

#[test]
fn stopping_reports_every_task_and_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log");
    let live = record_log(&log, RatingParams::default(), 100, 2);
    let args = ["stopping", "--log", path_str(&log), "--threshold", "0.5", "--samples", "2000", "--seed", "4"];
    let first = arena(&args);
    let second = arena(&args);
    assert!(first.status.success(), "{}", stderr(&first));
    assert_eq!(first.stdout, second.stdout);

    let doc: StoppingDoc = serde_json::from_str(&stdout(&first)).unwrap();
    assert_eq!(doc.tasks.len(), 2);
    for (task, report) in &doc.tasks {
        let expected = arena_core::stopping_report(live.board(task, RatingStream::Official).unwrap(), 2000, 4, 0.5);
        assert_eq!(report, &expected);
        assert_eq!(report.per_pair_flip_prob.len(), 7);
    }

    let one = arena(&["stopping", "--log", path_str(&log), "--threshold", "0.9", "--task", "task-1", "--format", "text"]);
    assert!(one.status.success());
    assert!(stdout(&one).starts_with("task-1: p_stable"));

    let missing = arena(&["stopping", "--log", path_str(&log), "--threshold", "0.9", "--task", "nope"]);
    assert_eq!(missing.status.code(), Some(2));
    let bad = arena(&["stopping", "--log", path_str(&log), "--threshold", "1.5"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn unreadable_and_corrupt_logs_use_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = arena(&["score", "--log", path_str(&dir.path().join("absent"))]);
    assert_eq!(out.status.code(), Some(3));

    let log = dir.path().join("log");
    record_log(&log, RatingParams::default(), 20, 1);
    let file = fs::read_dir(&log)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "ndjson"))
        .unwrap();
    let mut text = fs::read_to_string(&file).unwrap();
    text.push_str("{not json\n");
    fs::write(&file, text).unwrap();
    let out = arena(&["score", "--log", path_str(&log)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line"), "{}", stderr(&out));
}

#[test]
fn score_kind_flag_is_checked() {
    let dir = tempfile::tempdir().unwrap();
    let out = arena(&["score", "--log", path_str(dir.path()), "--score-kind", "median"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn log_reload_matches_live_store() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log");
    let live = record_log(&log, RatingParams::default(), 60, 8);
    let replayed = Store::load(&log, store_config(RatingParams::default())).unwrap();
    let boards = |s: &Store| -> BTreeMap<_, _> { s.entrant_boards(RatingStream::Official) };
    assert_eq!(boards(&live), boards(&replayed));
}
