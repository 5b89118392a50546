//! Robots that learn while deployed: desired states come from a desk-scale
//! standalone run, then each online run starts from random policies and
//! re-optimizes them every 20 s from the events seen so far.
//!
//!     cargo run --release --example online_learning -- [shared|heterogeneous] [seed]

use std::time::Instant;

use swarm_synth::pipeline::{run_frozen, run_online, run_standalone, OnlineConfig, OnlineMode, StandaloneConfig};
use swarm_synth::TaskId;

fn main() -> swarm_synth::Result<()> {
    let mut args = std::env::args().skip(1);
    let mode: OnlineMode = args.next().as_deref().unwrap_or("shared").parse()?;
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(42);
    let start = Instant::now();

    let design = run_standalone(&StandaloneConfig::desk(TaskId::A).with_seed(seed), None)?;
    println!("desired states: {:?}", design.desired.members());

    let cfg = OnlineConfig::desk(TaskId::A, mode).with_seed(seed);
    let learned = run_online(&cfg, &design.desired)?;
    let frozen = run_frozen(&cfg, &design.desired)?;
    for (i, (l, f)) in learned.runs.iter().zip(&frozen.runs).enumerate() {
        println!("run {i}: learning {:.2}  frozen {:.2}", l.final_fitness(), f.final_fitness());
    }
    let (l, f) = (learned.mean_final(), frozen.mean_final());
    println!("mean final fitness: learning {l:.3}, frozen {f:.3} ({:+.0}%)", 100.0 * (l / f - 1.0));
    if let Some(r) = learned.runs[0].reoptimizations.last() {
        println!("last policy of run 0, robot 0:");
        for (s, row) in r.policies[0].rows().enumerate() {
            println!("  P(move | {s} neighbors) = {:.3}", row[0]);
        }
    }
    println!("elapsed {:.1?}", start.elapsed());
    Ok(())
}
