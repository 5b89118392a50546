//! Foraging with a single exploration probability shared by every state.
//! Sweeping it shows the trade-off between collecting food and spending the
//! energy to look for it.
//!
//!     cargo run --release --example foraging -- [runs]

use swarm_synth::sim::{run_simulation, Arena, TaskConfig};
use swarm_synth::{Policy, TaskId};

fn main() -> swarm_synth::Result<()> {
    let runs: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(5);
    let config = TaskConfig::default_for(TaskId::C).with_horizon(300.0);
    let arena = Arena::square(20.0);

    println!("P(explore)  mean F_g(T)");
    for p in [0.0, 0.1, 0.25, 0.5, 0.75, 1.0] {
        let policy = Policy::from_act_probabilities(&vec![p; config.n_states()])?;
        let mut total = 0.0;
        for seed in 0..runs {
            total += run_simulation(&config, &policy, &arena, seed)?.final_fitness();
        }
        println!("{p:>10.2}  {:>11.3}", total / runs as f64);
    }
    Ok(())
}
