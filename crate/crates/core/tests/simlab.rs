use arena_core::simlab::{
    kendall_tau, p_prefer, run_tournament, sample_judgment, RaterModel, SimAgent, SimWorld, TournamentConfig,
};
use arena_core::{AgentId, Outcome, SchedulerKind, SeedId, TaskId};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn task() -> TaskId {
    TaskId::from("navigate")
}

fn agent(id: &str, q: f64) -> SimAgent {
    SimAgent::new(id, 0.0).with_quality("navigate", q)
}

fn ids(xs: &[&str]) -> Vec<AgentId> {
    xs.iter().map(|x| AgentId::from(*x)).collect()
}

fn frequency(a: &SimAgent, b: &SimAgent, model: &RaterModel, n: u64) -> [u64; 3] {
    let seed = SeedId::from("s0");
    let mut counts = [0u64; 3];
    for i in 0..n {
        match sample_judgment(a, b, &task(), &seed, model, i).unwrap() {
            Outcome::FirstWins => counts[0] += 1,
            Outcome::SecondWins => counts[1] += 1,
            Outcome::Draw => counts[2] += 1,
        }
    }
    counts
}

#[test]
fn boltzmann_closed_form() {
    assert_eq!(p_prefer(100.0, -4.0, 0.0), 0.5);
    assert!((p_prefer(2f64.ln(), 0.0, 1.0) - 2.0 / 3.0).abs() < 1e-15);
    assert!((p_prefer(0.0, 3f64.ln(), 1.0) - 0.25).abs() < 1e-15);
    assert_eq!(p_prefer(1e300, -1e300, 1.0), 1.0);
    assert_eq!(p_prefer(-1e300, 1e300, 1.0), 0.0);
}

#[test]
fn randomized_sweep_of_ten_thousand_triples() {
    let mut rng = StdRng::seed_from_u64(5);
    for _ in 0..10_000 {
        let r1: f64 = rng.random_range(-50.0..50.0);
        let r2: f64 = rng.random_range(-50.0..50.0);
        let c: f64 = rng.random_range(-50.0..50.0);
        let beta: f64 = rng.random_range(0.0..5.0);
        let p = p_prefer(r1, r2, beta);
        assert!((p + p_prefer(r2, r1, beta) - 1.0).abs() < 1e-12);
        // Shifting both rewards by c changes r1 - r2 by at most a rounding error.
        assert!((p - p_prefer(r1 + c, r2 + c, beta)).abs() < 1e-12);
    }
}

#[test]
fn rational_rater_almost_always_picks_the_better_video() {
    let model = RaterModel {
        beta_rationality: 1000.0,
        tie_band: 0.0,
    };
    let counts = frequency(&agent("a", 1.0), &agent("b", 0.0), &model, 10_000);
    assert!(counts[0] as f64 / 10_000.0 > 0.999, "{counts:?}");
}

#[test]
fn identical_agents_split_evenly() {
    let model = RaterModel {
        beta_rationality: 1.0,
        tie_band: 0.0,
    };
    let n = 10_000;
    let counts = frequency(&agent("a", 3.0), &agent("b", 3.0), &model, n);
    assert_eq!(counts[2], 0);
    let rate = counts[0] as f64 / n as f64;
    assert!((rate - 0.5).abs() <= 3.0 * (0.25 / n as f64).sqrt(), "{rate}");
}

#[test]
fn infinite_tie_band_always_draws() {
    let model = RaterModel {
        beta_rationality: 1.0,
        tie_band: f64::INFINITY,
    };
    assert_eq!(frequency(&agent("a", 10.0), &agent("b", 0.0), &model, 200), [0, 0, 200]);
}

#[test]
fn missing_quality_is_rejected() {
    let model = RaterModel::default();
    let stranger = SimAgent::new("x", 0.0).with_quality("other", 1.0);
    assert!(sample_judgment(&agent("a", 1.0), &stranger, &task(), &"s0".into(), &model, 1).is_err());
}

#[test]
fn video_quality_is_fixed_per_video() {
    let a = SimAgent::new("a", 2.0).with_quality("navigate", 5.0);
    let world = SimWorld::new(9);
    let s0 = SeedId::from("s0");
    let q = world.video_quality(&a, &task(), &s0).unwrap();
    assert_eq!(q, world.video_quality(&a, &task(), &s0).unwrap());
    assert_ne!(q, world.video_quality(&a, &task(), &"s1".into()).unwrap());
    assert_ne!(q, 5.0);
}

#[test]
fn kendall_tau_examples() {
    let base = ids(&["1", "2", "3", "4"]);
    assert_eq!(kendall_tau(&base, &base).unwrap(), 1.0);
    let rev: Vec<AgentId> = base.iter().rev().cloned().collect();
    assert_eq!(kendall_tau(&base, &rev).unwrap(), -1.0);
    let swapped = ids(&["1", "3", "2", "4"]);
    assert!((kendall_tau(&base, &swapped).unwrap() - 2.0 / 3.0).abs() < 1e-15);
    assert!(kendall_tau(&base, &ids(&["1", "2", "3", "5"])).is_err());
    assert!(kendall_tau(&base, &ids(&["1", "2", "3"])).is_err());
}

fn two_agent_config(budget: usize) -> TournamentConfig {
    TournamentConfig {
        budget,
        ..TournamentConfig::default()
    }
}

#[test]
fn two_agents_recover_their_order() {
    let agents = [agent("weak", 0.0), agent("strong", 5.0)];
    let model = RaterModel {
        beta_rationality: 2.0,
        tie_band: 0.0,
    };
    let seeds = 40;
    let mut correct = 0;
    for seed in 0..seeds {
        let r = run_tournament(&agents, &[task()], &model, &two_agent_config(50), seed).unwrap();
        if r.boards[&task()].mean_order() == ids(&["strong", "weak"]) {
            correct += 1;
        }
    }
    assert!(correct as f64 / seeds as f64 > 0.95, "{correct}/{seeds}");
}

#[test]
fn budget_one_plays_exactly_one_match() {
    let agents = [agent("a", 1.0), agent("b", 0.0), agent("c", 2.0)];
    let r = run_tournament(&agents, &[task()], &RaterModel::default(), &two_agent_config(1), 3).unwrap();
    assert_eq!(r.judgments.len(), 1);
    assert!(run_tournament(&agents, &[task()], &RaterModel::default(), &two_agent_config(0), 3).is_err());
    assert!(run_tournament(&agents[..1], &[task()], &RaterModel::default(), &two_agent_config(5), 3).is_err());
}

#[test]
fn identical_seeds_give_identical_results() {
    let agents: Vec<SimAgent> = (0..6)
        .map(|i| SimAgent::new(format!("agent-{i}"), 0.5).with_quality("navigate", i as f64).with_quality("stack", -(i as f64)))
        .collect();
    let tasks = [task(), TaskId::from("stack")];
    let model = RaterModel {
        beta_rationality: 1.0,
        tie_band: 0.1,
    };
    for scheduler in [SchedulerKind::Active, SchedulerKind::Uniform] {
        let config = TournamentConfig {
            scheduler,
            budget: 60,
            ..TournamentConfig::default()
        };
        let a = run_tournament(&agents, &tasks, &model, &config, 77).unwrap();
        let b = run_tournament(&agents, &tasks, &model, &config, 77).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = run_tournament(&agents, &tasks, &model, &config, 78).unwrap();
        assert_ne!(a.judgments, c.judgments);
    }
}

#[test]
fn no_signal_gives_no_recovery() {
    let agents: Vec<SimAgent> = (0..8).map(|i| agent(&format!("agent-{i}"), 1.0)).collect();
    let model = RaterModel {
        beta_rationality: 1.0,
        tie_band: 0.0,
    };
    let config = two_agent_config(100);
    let runs = 20;
    let mut tau_sum = 0.0;
    let mut p_stable_sum = 0.0;
    for seed in 0..runs {
        let r = run_tournament(&agents, &[task()], &model, &config, seed).unwrap();
        tau_sum += r.kendall_tau[&task()];
        p_stable_sum += r.stopping_trace.last().unwrap().p_stable_ranking;
    }
    let mean_tau = tau_sum / runs as f64;
    // sd of tau-a for 8 items under independence is about 0.27; the mean of 20 is about 0.06.
    assert!(mean_tau.abs() < 0.2, "{mean_tau}");
    assert!(p_stable_sum / (runs as f64) < 0.2);
}

proptest! {
    #[test]
    fn p_prefer_is_monotone_in_beta(r1 in -20.0..20.0f64, gap in 0.0..20.0f64, b1 in 0.0..10.0f64, b2 in 0.0..10.0f64) {
        let (lo, hi) = if b1 < b2 { (b1, b2) } else { (b2, b1) };
        prop_assert!(p_prefer(r1 + gap, r1, hi) >= p_prefer(r1 + gap, r1, lo));
        let p = p_prefer(r1 + gap, r1, lo);
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn tau_is_antisymmetric_under_reversal(n in 2usize..12, seed in any::<u64>()) {
        let base: Vec<AgentId> = (0..n).map(|i| AgentId::from(format!("a{i}"))).collect();
        let mut shuffled = base.clone();
        let mut rng = StdRng::seed_from_u64(seed);
        for i in (1..n).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        let t = kendall_tau(&base, &shuffled).unwrap();
        let reversed: Vec<AgentId> = shuffled.iter().rev().cloned().collect();
        prop_assert!((t + kendall_tau(&base, &reversed).unwrap()).abs() < 1e-12);
        prop_assert!((t - kendall_tau(&shuffled, &base).unwrap()).abs() < 1e-12);
    }
}
