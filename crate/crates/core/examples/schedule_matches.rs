//! Ask the scheduler for matches on a small board and compare its picks with
//! the uniform control arm.
//!
//!     cargo run -p arena-core --example schedule_matches

use arena_core::matchmaker::expected_variance_reduction;
use arena_core::{
    next_match, uniform_baseline_schedule, Rating, RatingParams, ScheduledMatch, SchedulerPolicy, TaskRoster,
    TaskScoreboard,
};

fn main() -> anyhow::Result<()> {
    let params = RatingParams::default();
    let policy = SchedulerPolicy::default();
    let mut board = TaskScoreboard::new("find-cave".into());
    for (agent, mu, sigma) in [("settled-a", 30.0, 1.0), ("settled-b", 20.0, 1.0), ("fresh", 25.0, 8.3), ("close", 29.5, 1.2)] {
        board.insert_agent(agent.into(), Rating::new(mu, sigma)?);
    }
    let roster = TaskRoster::complete(
        board.task_id.clone(),
        board.ratings.keys().cloned(),
        ["seed-1".into(), "seed-2".into()],
    );

    println!("expected sigma^2 reduction per pair:");
    let agents: Vec<_> = board.ratings.keys().collect();
    for (i, a) in agents.iter().enumerate() {
        for b in &agents[i + 1..] {
            let gain = expected_variance_reduction(&board.ratings[*a], &board.ratings[*b], &params);
            println!("  {a:>9} vs {b:<9} {gain:.3}");
        }
    }

    let mut history: Vec<ScheduledMatch> = Vec::new();
    println!("active picks (ratings held fixed, so only budgets and seed balance move it):");
    for _ in 0..4 {
        let m = next_match(&board, &roster, &history, &policy, &params)?;
        println!("  {} vs {} on {}", m.agent_a, m.agent_b, m.eval_seed);
        history.push(ScheduledMatch {
            agent_a: m.agent_a,
            agent_b: m.agent_b,
            eval_seed: m.eval_seed,
        });
    }

    let m = uniform_baseline_schedule(&board, &roster, &history, &policy, 42)?;
    println!("uniform pick: {} vs {} on {}", m.agent_a, m.agent_b, m.eval_seed);
    Ok(())
}
