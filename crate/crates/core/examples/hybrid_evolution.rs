//! Paired comparison of plain simulation-based evolution and the hybrid
//! variant that injects a model-optimized policy every generation.
//!
//!     cargo run --release --example hybrid_evolution -- [pairs]

use std::time::Instant;

use swarm_synth::pipeline::{run_baseline_evolution, run_hybrid_evolution, HybridConfig};
use swarm_synth::TaskId;

fn main() -> swarm_synth::Result<()> {
    let pairs: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(10);
    let start = Instant::now();
    let (mut ahead, mut never_worst) = (0, 0);
    for seed in 0..pairs {
        let hybrid = HybridConfig::desk(TaskId::A).with_seed(seed);
        let base = run_baseline_evolution(&hybrid.evolution)?;
        let hyb = run_hybrid_evolution(&hybrid)?;
        let b3 = base.history[3].best;
        let h3 = hyb.evolution.history[3].best;
        let ranks: Vec<usize> = hyb.injections.iter().map(|i| i.rank).collect();
        println!(
            "seed {seed}: best-so-far at gen 3 baseline {b3:.3} hybrid {h3:.3}; injected ranks {ranks:?}; S_des {:?}",
            hyb.desired.as_ref().map(|d| d.members().clone()).unwrap_or_default()
        );
        ahead += usize::from(h3 >= b3);
        never_worst += usize::from(hyb.injections.iter().all(|i| !i.is_worst));
    }
    println!("hybrid ahead at gen 3 in {ahead}/{pairs} pairs");
    println!("injected member never worst in {never_worst}/{pairs} pairs");
    println!("elapsed {:.1?}", start.elapsed());
    Ok(())
}
