//! Desk-scale model-based design for aggregation: no policy search in
//! simulation, only randomized data, two models and a PageRank optimizer.
//!
//!     cargo run --release --example aggregation_standalone -- [seed] [out_dir]

use std::path::PathBuf;
use std::time::Instant;

use swarm_synth::pipeline::{run_standalone, StandaloneConfig};
use swarm_synth::TaskId;

fn main() -> swarm_synth::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(42);
    let out = args.next().map(PathBuf::from);

    let start = Instant::now();
    let cfg = StandaloneConfig::desk(TaskId::A).with_seed(seed);
    let r = run_standalone(&cfg, out.as_deref())?;

    println!("design simulations: {}", r.design_simulations);
    println!(
        "model 1: best epoch {} of {}, correlation vs1/vs2/vs3 = {:.3} / {:.3} / {:.3}",
        r.training.best_epoch,
        r.training.history.len(),
        r.correlation[0],
        r.correlation[1],
        r.correlation[2]
    );
    println!("desired states: {:?}", r.desired.members());
    println!("policy PageRank fitness: {:.4}", r.policy_fitness);
    for (s, row) in r.policy.rows().enumerate() {
        println!("  P(move | {s} neighbors) = {:.3}", row[0]);
    }
    let q = r.evaluation.quartiles;
    println!("optimized: median {:.2} (q1 {:.2}, q3 {:.2})", q.median, q.q1, q.q3);
    if let Some(b) = &r.baseline {
        let q = b.quartiles;
        println!("random:    median {:.2} (q1 {:.2}, q3 {:.2})", q.median, q.q1, q.q3);
    }
    print!("{}", r.verification.render_text());
    println!("elapsed {:.1?}", start.elapsed());
    Ok(())
}
