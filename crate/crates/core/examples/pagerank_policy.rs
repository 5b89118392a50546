//! Builds the transition model from random-policy runs, then searches for the
//! policy whose stationary distribution favours a hand-picked set of states.
//!
//!     cargo run --release --example pagerank_policy -- [seed]

use swarm_synth::datalog::{all_events, simulate_batch, ArenaSpec, DatasetOptions};
use swarm_synth::evolve::{optimize_policy_pr, GAConfig};
use swarm_synth::pagerank::{pagerank, PageRankOptions};
use swarm_synth::sim::TaskConfig;
use swarm_synth::transition::{compose_G, TransitionModel};
use swarm_synth::verify::verify;
use swarm_synth::{DesiredSource, DesiredStateSet, Policy, TaskId};

fn main() -> swarm_synth::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let config = TaskConfig::default_for(TaskId::A).with_horizon(100.0);
    let opts = DatasetOptions {
        n_runs: 60,
        min_robots: 2,
        max_robots: 10,
        arena: ArenaSpec::Square { side: 10.0 },
        ..DatasetOptions::for_config(config.clone())
    };
    let logs = simulate_batch(&opts, seed)?;
    let model = TransitionModel::estimate(&all_events(&logs), config.n_states(), config.n_actions())?;
    println!("{} events, alpha = {:.2?}", model.total_events(), model.alpha());

    // robots with two or more neighbors
    let desired = DesiredStateSet::new(2..config.n_states(), config.n_states(), DesiredSource::Manual)?;

    let uniform = Policy::uniform(config.n_states(), config.n_actions());
    let before = pagerank(&compose_G(&model, &uniform)?, &PageRankOptions::default())?;
    let ga = GAConfig {
        population_size: 60,
        generations: 60,
        seed,
        ..GAConfig::default()
    };
    let opt = optimize_policy_pr(&model, &desired, &ga, 0.02)?;
    let after = pagerank(&compose_G(&model, &opt.policy)?, &PageRankOptions::default())?;

    println!("state  P(move)  PR uniform  PR optimized");
    for s in 0..config.n_states() {
        println!(
            "{s:>5}  {:>7.3}  {:>10.4}  {:>12.4}",
            opt.policy.prob(s, 0),
            before.values[s],
            after.values[s]
        );
    }
    println!("fitness {:.4} after {} generations", opt.fitness, opt.history.len());
    print!("{}", verify(&model, &opt.policy, &desired)?.render_text());
    Ok(())
}
