//! Turn per-task ratings into z-scores and average them into one standing.
//!
//!     cargo run -p arena-core --example normalize_and_aggregate

use std::collections::BTreeMap;

use arena_core::scoring::standings_from_boards;
use arena_core::{Rating, ScoreKind, TaskScoreboard};

fn main() -> anyhow::Result<()> {
    // Ratings on different tasks live on unrelated scales; z-scores make them
    // comparable before averaging.
    let tasks = [
        ("find-cave", vec![("alpha", 34.0, 1.1), ("bravo", 30.0, 1.0), ("charlie", 21.0, 1.4), ("delta", 28.0, 2.0)]),
        ("build-house", vec![("alpha", 24.0, 1.3), ("bravo", 26.5, 0.9), ("charlie", 25.0, 1.0)]),
    ];
    // Delta only entered one task, so it is reported but not ranked.
    let mut boards = BTreeMap::new();
    for (task, entries) in tasks {
        let mut board = TaskScoreboard::new(task.into());
        for (agent, mu, sigma) in entries {
            board.insert_agent(agent.into(), Rating::new(mu, sigma)?);
        }
        boards.insert(task.into(), board);
    }

    for kind in [ScoreKind::Mean, ScoreKind::Conservative(3.0)] {
        let report = standings_from_boards(&boards, kind);
        println!("score kind {kind}:");
        for (rank, agent) in report.standing.rank_order.iter().enumerate() {
            let per_task: Vec<String> = report
                .standing
                .tasks
                .iter()
                .map(|t| format!("{t} {:+.3}", report.standing.per_task_z[t][agent]))
                .collect();
            println!(
                "  {}. {agent:<8} {:+.3}  ({})",
                rank + 1,
                report.standing.final_score[agent],
                per_task.join(", ")
            );
        }
        for ex in &report.standing.excluded {
            let missing: Vec<&str> = ex.missing_tasks.iter().map(|t| t.as_str()).collect();
            println!("  unranked {}: missing {}", ex.agent_id, missing.join(", "));
        }
    }
    Ok(())
}
