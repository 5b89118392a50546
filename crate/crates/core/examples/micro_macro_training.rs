//! Trains the micro-macro network on randomized aggregation runs, checks it
//! on three held-out sets and reads the desired states off the trained model.
//!
//!     cargo run --release --example micro_macro_training -- [seed]

use swarm_synth::datalog::{build_training_set, build_validation_sets, ArenaSpec, DatasetOptions};
use swarm_synth::micromacro::{
    default_hidden_layers, extract_desired_states, train, validate_correlation, ExtractOptions, MicroMacroModel,
    TrainConfig,
};
use swarm_synth::sim::TaskConfig;
use swarm_synth::TaskId;

fn main() -> swarm_synth::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(7);
    let task = TaskId::A;

    let opts = DatasetOptions {
        n_runs: 80,
        min_robots: 1,
        max_robots: 10,
        arena: ArenaSpec::Square { side: 10.0 },
        ..DatasetOptions::for_config(TaskConfig::default_for(task).with_horizon(100.0))
    };
    let (data, _) = build_training_set(&opts, seed)?;
    let validation = build_validation_sets(&opts, 40, seed + 1)?;
    println!("training rows: {}, validation rows: {}", data.len(), validation.vs1.len());

    let model = MicroMacroModel::new(data.inputs.ncols(), &default_hidden_layers(task), seed)?;
    let cfg = TrainConfig {
        learning_rate: 1e-3,
        epochs: 30,
        seed,
        ..TrainConfig::for_task(task)
    };
    let sets: Vec<_> = validation.iter().collect();
    let outcome = train(&model, &data, &sets, &cfg)?;
    for rec in outcome.history.iter().step_by(5) {
        println!("epoch {:>3}  loss {:.4}  vs1 r {:.3}", rec.epoch, rec.loss, rec.validation_r[0]);
    }
    for (name, set) in ["vs1", "vs2", "vs3"].iter().zip(validation.iter()) {
        let c = validate_correlation(&outcome.model, set)?;
        println!("{name}: mean r = {:.3} over {} runs", c.mean, c.per_run.len());
    }

    let extraction = extract_desired_states(&outcome.model, &ExtractOptions::default())?;
    println!(
        "desired states {:?} (network output {:.3})",
        extraction.desired.members(),
        extraction.fitness
    );
    Ok(())
}
