//! How a simulated rater's choices depend on the quality gap and on its
//! rationality.
//!
//!     cargo run -p arena-core --example boltzmann_rater

use arena_core::{p_prefer, sample_judgment, Outcome, RaterModel, SimAgent};

fn main() -> anyhow::Result<()> {
    println!("P(prefer the better video) for a quality gap of ln 2:");
    for beta in [0.0, 0.5, 1.0, 2.0, 8.0] {
        println!("  beta {beta:>4}: {:.4}", p_prefer(std::f64::consts::LN_2, 0.0, beta));
    }

    let strong = SimAgent::new("strong", 0.2).with_quality("find-cave", 1.0);
    let weak = SimAgent::new("weak", 0.2).with_quality("find-cave", 0.0);
    let model = RaterModel {
        beta_rationality: 1.5,
        tie_band: 0.1,
    };
    let mut tally = [0usize; 3];
    for seed in 0..2_000 {
        let outcome = sample_judgment(&strong, &weak, &"find-cave".into(), &"seed-1".into(), &model, seed)?;
        tally[match outcome {
            Outcome::FirstWins => 0,
            Outcome::SecondWins => 1,
            Outcome::Draw => 2,
        }] += 1;
    }
    println!("2000 sampled judgments, strong vs weak: {} wins, {} losses, {} ties", tally[0], tally[1], tally[2]);
    Ok(())
}
