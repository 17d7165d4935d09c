//! Record a small league into an event log on disk, then rebuild the
//! scoreboards from the log alone and check they match.
//!
//!     cargo run -p arena-core --example replay_event_log

use arena_core::simlab::{run_sessions, League, SessionPlan};
use arena_core::store::log_files;
use arena_core::{AssignmentPolicy, RaterClass, RaterModel, RatingStream, ScoreKind, Store, StoreConfig};
use chrono::{Duration, Utc};

fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let config = StoreConfig::default();
    let league = League::synthetic(2, 6, 3, 1);

    let mut live = Store::open(dir.path(), config.clone())?;
    league.install(&mut live)?;
    let plan = SessionPlan {
        raters: vec![
            ("contractor-1".into(), RaterClass::Contractor),
            ("contractor-2".into(), RaterClass::Contractor),
            ("visitor".into(), RaterClass::Public),
        ],
        judgments_per_task: 120,
        policy: AssignmentPolicy::default(),
        start: Utc::now(),
        step: Duration::seconds(30),
    };
    let done = run_sessions(&mut live, &league.task_ids(), &league.agents, &RaterModel::default(), &plan, 3)?;
    for (task, n) in &done {
        println!("recorded {n} judgments on {task}");
    }
    for file in log_files(dir.path())? {
        println!("  {}", file.file_name().unwrap_or_default().to_string_lossy());
    }

    let replayed = Store::load(dir.path(), config)?;
    for stream in [RatingStream::Provisional, RatingStream::Official] {
        assert_eq!(live.entrant_boards(stream), replayed.entrant_boards(stream));
    }
    println!("replayed boards match the live store");

    let report = replayed.final_standings(RatingStream::Official, ScoreKind::Mean);
    for (i, participant) in report.standing.rank_order.iter().enumerate() {
        println!("  {}. {participant} ({:+.3})", i + 1, report.standing.final_score[participant]);
    }

    // Any earlier state can be reconstructed too.
    let task = &league.task_ids()[0];
    let early = replayed.rating_snapshot(task, 20, RatingStream::Official)?;
    println!("{task} after 20 judgments: {} agents rated", early.len());
    Ok(())
}
