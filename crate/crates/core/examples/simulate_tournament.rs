//! Run a full simulated evaluation with both schedulers and compare how fast
//! each recovers the true ranking.
//!
//!     cargo run -p arena-core --example simulate_tournament [scenario.json] [seeds]

use std::path::PathBuf;

use arena_core::simlab::{load_scenario, run_scenario};

fn main() -> anyhow::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/two_tasks_small.json"));
    let seeds: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(5);

    let mut scenario = load_scenario(&path)?;
    scenario.compare_baseline = true;
    let (results, summary) = run_scenario(&scenario, seeds)?;

    println!("{} runs over seeds {:?}", results.len(), summary.seeds);
    for (scheduler, tasks) in &summary.by_scheduler {
        for (task, t) in tasks {
            println!(
                "  {scheduler:<8} {task:<16} median tau {:.3}, median judgments to tau {}: {}",
                t.median_kendall_tau,
                summary.tau_target,
                t.median_judgments_to_target.map_or("not reached".into(), |n| n.to_string())
            );
        }
    }

    let (kind, seed, first) = &results[0];
    println!("final standing of the {kind:?} run on seed {seed}:");
    for (i, agent) in first.standing.standing.rank_order.iter().enumerate() {
        println!("  {}. {agent} ({:+.3})", i + 1, first.standing.standing.final_score[agent]);
    }
    Ok(())
}
