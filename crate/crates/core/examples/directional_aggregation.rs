//! Standalone design for aggregation with turn-rate actions: continuous
//! motion (B1) or pulsed turns (B2).
//!
//!     cargo run --release --example directional_aggregation -- [b1|b2] [seed]

use swarm_synth::pipeline::{run_standalone, StandaloneConfig};
use swarm_synth::sim::TURN_RATES;
use swarm_synth::TaskId;

fn main() -> swarm_synth::Result<()> {
    let mut args = std::env::args().skip(1);
    let task = match args.next().as_deref() {
        Some("b2") | Some("B2") => TaskId::B2,
        _ => TaskId::B1,
    };
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(42);

    let r = run_standalone(&StandaloneConfig::desk(task).with_seed(seed), None)?;
    println!("{task}: correlation vs1 {:.3}, desired states {:?}", r.correlation[0], r.desired.members());
    println!("state  most likely turn rate (rad/s)");
    for (s, row) in r.policy.rows().enumerate() {
        let (k, p) = row
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |best, (k, &p)| if p > best.1 { (k, p) } else { best });
        println!("{s:>5}  {:+.2} (p = {p:.2})", TURN_RATES[k]);
    }
    let opt = r.evaluation.quartiles.median;
    match &r.baseline {
        Some(b) => println!("median clusters-fitness {opt:.2}, random policy {:.2}", b.quartiles.median),
        None => println!("median clusters-fitness {opt:.2}"),
    }
    Ok(())
}
