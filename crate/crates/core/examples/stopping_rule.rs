//! Check whether a task's ranking has settled enough to stop collecting
//! judgments.
//!
//!     cargo run -p arena-core --example stopping_rule

use arena_core::{stopping_report, Rating, TaskScoreboard};

fn main() -> anyhow::Result<()> {
    let mut early = TaskScoreboard::new("make-waterfall".into());
    let mut late = TaskScoreboard::new("make-waterfall".into());
    for (agent, mu) in [("alpha", 31.0), ("bravo", 27.0), ("charlie", 26.0), ("delta", 19.0)] {
        early.insert_agent(agent.into(), Rating::new(mu, 4.0)?);
        late.insert_agent(agent.into(), Rating::new(mu, 0.8)?);
    }

    for (label, board) in [("after a few judgments", &early), ("after many judgments", &late)] {
        let report = stopping_report(board, 10_000, 7, 0.8);
        println!(
            "{label}: P(order is right) = {:.3} -> {}",
            report.p_stable_ranking,
            if report.stable { "stop" } else { "keep judging" }
        );
        for pair in &report.per_pair_flip_prob {
            println!("  {:>7} above {:<7} flips with p = {:.3}", pair.upper, pair.lower, pair.flip_prob);
        }
    }
    Ok(())
}
