//! Command-line front end. Every subcommand accepts `--config <json>` holding
//! the stage's configuration; explicit flags override it.
//!
//! Exit codes: 0 success, 1 invalid input or usage, 2 stage failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use crate::datalog::{
    build_training_set, build_validation_sets, read_event_batches, write_dataset_dir, ArenaSpec, Dataset,
    DatasetOptions, Split,
};
use crate::error::{Error, Result};
use crate::evolve::{optimize_policy_pr, write_history, GAConfig};
use crate::io;
use crate::micromacro::{
    default_hidden_layers, extract_desired_states, train, ExtractOptions, InputScaling, MicroMacroModel, TrainConfig,
};
use crate::pipeline::{
    self, run_baseline_evolution, run_frozen, run_hybrid_evolution, run_online, run_standalone, EvalSettings,
    EvolutionConfig, HybridConfig, OnlineConfig, OnlineMode, PolicySource, ReportFormat, StandaloneConfig,
};
use crate::sim::TaskConfig;
use crate::transition::TransitionModel;
use crate::types::{DesiredStateSet, Policy, TaskId};
use crate::verify::verify;

/// Environment variable consulted when no seed is given.
pub const SEED_ENV: &str = "SWARM_SYNTH_SEED";

#[derive(Debug, Parser)]
#[command(name = "swarm-synth", version, about = "Model-based design of stochastic swarm-robot policies")]
pub struct Cli {
    /// Worker threads for parallel simulation [default: all cores]
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate randomized runs and write a training dataset (and validation sets)
    GenData(GenDataArgs),
    /// Train the fitness model on a dataset
    TrainModel1(TrainArgs),
    /// Extract desired local states from a trained fitness model
    ExtractSdes(ExtractArgs),
    /// Estimate the transition model from logged events
    EstimateModel2(EstimateArgs),
    /// Optimize a policy for the PageRank of the desired states
    Optimize(OptimizeArgs),
    /// Check a policy for deadlocks and reachability of the desired states
    Verify(VerifyArgs),
    /// Evaluate a policy (or random policies) over independent runs
    Evaluate(EvaluateArgs),
    /// Simulation-based policy evolution
    EvolveBaseline(EvolveArgs),
    /// Simulation-based evolution with one model-optimized member per generation
    EvolveHybrid(HybridArgs),
    /// Robots re-estimating models and re-optimizing policies during runs
    Online(OnlineArgs),
    /// The full model-based pipeline, from data generation to evaluation
    Standalone(StandaloneArgs),
    /// Box-plot and time-series tables from a run directory
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON configuration for this stage; flags override its fields
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed [fallback: $SWARM_SYNTH_SEED, then the config, then 0]
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Task: A (aggregation), B1, B2 (directional aggregation), C (foraging) [A]
    #[arg(long)]
    pub task: Option<TaskId>,
    /// Robots per run [A/B: 30, C: 20]
    #[arg(long)]
    pub robots: Option<usize>,
    /// Simulated seconds per run [A/B: 200, C: 500]
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Side of the square arena in meters [20]
    #[arg(long)]
    pub arena_side: Option<f64>,
    /// Use randomly generated multi-room arenas
    #[arg(long)]
    pub multi_room: bool,
}

impl SimArgs {
    fn task(&self) -> TaskId {
        self.task.unwrap_or(TaskId::A)
    }

    /// Rejects a `--task` that contradicts the loaded configuration.
    fn check_task(&self, configured: TaskId) -> Result<()> {
        match self.task {
            Some(t) if t != configured => Err(Error::Config(format!(
                "--task {t} conflicts with the configuration's task {configured}"
            ))),
            _ => Ok(()),
        }
    }

    fn apply(&self, mut config: TaskConfig) -> TaskConfig {
        if let Some(n) = self.robots {
            config = config.with_robots(n);
        }
        if let Some(h) = self.horizon {
            config = config.with_horizon(h);
        }
        config
    }

    fn arena(&self, current: ArenaSpec) -> ArenaSpec {
        let side = self.arena_side.unwrap_or(current.side());
        if self.multi_room {
            ArenaSpec::MultiRoom { side }
        } else if self.arena_side.is_some() {
            match current {
                ArenaSpec::Square { .. } => ArenaSpec::Square { side },
                ArenaSpec::MultiRoom { .. } => ArenaSpec::MultiRoom { side },
            }
        } else {
            current
        }
    }
}

#[derive(Debug, Args)]
pub struct GaArgs {
    /// GA population size [100]
    #[arg(long)]
    pub population: Option<usize>,
    /// GA generations [50]
    #[arg(long)]
    pub generations: Option<usize>,
}

impl GaArgs {
    fn apply(&self, ga: &mut GAConfig) {
        if let Some(p) = self.population {
            ga.population_size = p;
        }
        if let Some(g) = self.generations {
            ga.generations = g;
        }
    }
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Training runs [500]
    #[arg(long)]
    pub runs: Option<usize>,
    /// Smallest swarm [1]
    #[arg(long)]
    pub min_robots: Option<usize>,
    /// Largest swarm [A/B: 30, C: 20]
    #[arg(long)]
    pub max_robots: Option<usize>,
    /// Runs per validation set; 0 skips validation sets [100]
    #[arg(long, default_value_t = 100)]
    pub validation_runs: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Training `dataset.csv` or a directory containing one
    #[arg(long)]
    pub data: PathBuf,
    /// Validation CSVs; early stopping follows the first [default: the training data]
    #[arg(long, num_args = 1..)]
    pub validation: Vec<PathBuf>,
    /// Hidden layer widths [A/B: 30,30,30; C: 100,100,100]
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    /// Task, for default layer widths and learning rate
    #[arg(long, default_value = "A")]
    pub task: TaskId,
    /// Adam learning rate [A/B: 1e-5, C: 1e-6]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Maximum epochs [200]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Mini-batch size [256]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Early-stopping patience in epochs; 0 disables [20]
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub model1: PathBuf,
    #[arg(long, default_value = "A")]
    pub task: TaskId,
    /// Dataset directory; only states it contains may be selected
    #[arg(long)]
    pub explored_from: Option<PathBuf>,
    /// Feed indicator vectors raw instead of divided by their popcount
    #[arg(long)]
    pub raw: bool,
    #[command(flatten)]
    pub ga: GaArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// `events.csv`, or a dataset directory containing one
    #[arg(long)]
    pub events: PathBuf,
    #[arg(long, default_value = "A")]
    pub task: TaskId,
    /// Also write the per-batch convergence trace to this CSV
    #[arg(long)]
    pub convergence: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub model2: PathBuf,
    #[arg(long)]
    pub sdes: PathBuf,
    /// Lower bound on every action probability [0]
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[command(flatten)]
    pub ga: GaArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub model2: PathBuf,
    #[arg(long)]
    pub policy: PathBuf,
    #[arg(long)]
    pub sdes: PathBuf,
    /// Directory for verify.json and verify.txt
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Policy to evaluate; omit for a fresh random policy per run
    #[arg(long)]
    pub policy: Option<PathBuf>,
    /// Independent runs [100]
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub ga: GaArgs,
    /// Simulations averaged per candidate [5]
    #[arg(long)]
    pub evals: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HybridArgs {
    #[command(flatten)]
    pub evolve: EvolveArgs,
    /// Fitness-model epochs per generation [200]
    #[arg(long)]
    pub train_epochs: Option<usize>,
    /// PageRank optimizer generations per generation [50]
    #[arg(long)]
    pub opt_generations: Option<usize>,
}

#[derive(Debug, Args)]
pub struct OnlineArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Desired states to learn towards
    #[arg(long)]
    pub sdes: PathBuf,
    /// shared or heterogeneous [shared]
    #[arg(long)]
    pub mode: Option<OnlineMode>,
    /// Seconds between re-optimizations [20]
    #[arg(long)]
    pub interval: Option<f64>,
    /// Independent runs [10]
    #[arg(long)]
    pub runs: Option<usize>,
    /// Lower bound on every action probability [0.05]
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StandaloneArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value = "A")]
    pub task: TaskId,
    /// Start from the laptop-scale preset (100 runs of 1..=10 robots, 100 s,
    /// 10 m arena, 30 evaluation runs) instead of the full protocol
    #[arg(long)]
    pub desk: bool,
    /// Training runs [500; desk 100]
    #[arg(long)]
    pub runs: Option<usize>,
    /// Runs per validation set [100; desk 50]
    #[arg(long)]
    pub validation_runs: Option<usize>,
    /// Evaluation runs [100; desk 30]
    #[arg(long)]
    pub eval_runs: Option<usize>,
    /// Fitness-model epochs [200]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Use these desired states instead of extracting them
    #[arg(long, value_delimiter = ',')]
    pub sdes: Option<Vec<usize>>,
    /// Also evaluate fresh random policies
    #[arg(long)]
    pub random_baseline: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directory containing evaluation subdirectories
    #[arg(long)]
    pub run: PathBuf,
    /// csv or json
    #[arg(long, default_value = "csv")]
    pub format: ReportFormat,
    /// Output directory [<run>/report]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn load_config<T: DeserializeOwned>(path: &Option<PathBuf>, default: impl FnOnce() -> T) -> Result<T> {
    match path {
        Some(p) => io::read_json(p),
        None => Ok(default()),
    }
}

/// Flag, then the configuration file's value, then the environment, then 0.
fn resolve_seed(common: &Common, from_config: u64) -> Result<u64> {
    if let Some(s) = common.seed {
        return Ok(s);
    }
    if common.config.is_some() {
        return Ok(from_config);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{SEED_ENV} is not an unsigned integer: {v:?}"))),
        Err(_) => Ok(0),
    }
}

fn dataset_csv(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join("dataset.csv")
    } else {
        path.to_path_buf()
    }
}

fn gen_data(a: &GenDataArgs) -> Result<()> {
    let mut opts: DatasetOptions =
        load_config(&a.common.config, || DatasetOptions::for_config(TaskConfig::default_for(a.sim.task())))?;
    a.sim.check_task(opts.config.task)?;
    opts.config = a.sim.apply(opts.config);
    opts.arena = a.sim.arena(opts.arena);
    if let Some(r) = a.runs {
        opts.n_runs = r;
    }
    if let Some(m) = a.min_robots {
        opts.min_robots = m;
    }
    if let Some(m) = a.max_robots {
        opts.max_robots = m;
    }
    opts.validate()?;
    let seed = resolve_seed(&a.common, 0)?;
    io::ensure_dir(&a.out)?;
    io::write_json(&a.out.join("config.json"), &opts)?;
    let (ds, logs) = build_training_set(&opts, seed)?;
    write_dataset_dir(&a.out, &ds, &logs, 0)?;
    if a.validation_runs > 0 {
        let vs = build_validation_sets(&opts, a.validation_runs, crate::types::derive_seed(seed, 1))?;
        vs.vs1.write_csv(&a.out.join("vs1.csv"))?;
        vs.vs2.write_csv(&a.out.join("vs2.csv"))?;
        vs.vs3.write_csv(&a.out.join("vs3.csv"))?;
    }
    println!("{} runs, {} samples -> {}", logs.len(), ds.len(), a.out.display());
    Ok(())
}

fn train_model1(a: &TrainArgs) -> Result<()> {
    let mut cfg: TrainConfig = load_config(&a.common.config, || TrainConfig::for_task(a.task))?;
    if let Some(v) = a.lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = a.patience {
        cfg.patience = (v > 0).then_some(v);
    }
    cfg.seed = resolve_seed(&a.common, cfg.seed)?;
    cfg.validate()?;
    let train_set = Dataset::read_csv(&dataset_csv(&a.data), Split::Train)?;
    let splits = [Split::Vs1, Split::Vs2, Split::Vs3];
    let validation = a
        .validation
        .iter()
        .enumerate()
        .map(|(i, p)| Dataset::read_csv(p, splits[i.min(2)]))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Dataset> = if validation.is_empty() {
        vec![&train_set]
    } else {
        validation.iter().collect()
    };
    let hidden = a.hidden.clone().unwrap_or_else(|| default_hidden_layers(a.task));
    let init = MicroMacroModel::new(train_set.n_states, &hidden, crate::types::derive_seed(cfg.seed, 1))?;
    let outcome = train(&init, &train_set, &refs, &cfg)?;
    outcome.model.save_json(&a.out)?;
    let used: Vec<Split> = refs.iter().map(|d| d.split).collect();
    crate::micromacro::train::write_history(&a.out.with_extension("history.csv"), &used, &outcome.history)?;
    let last = outcome.history.get(outcome.best_epoch.saturating_sub(1));
    println!(
        "best epoch {} of {}, validation r = {:?} -> {}",
        outcome.best_epoch,
        outcome.history.len(),
        last.map(|h| h.validation_r.clone()).unwrap_or_default(),
        a.out.display()
    );
    Ok(())
}

fn explored_from_dir(dir: &Path, n_states: usize) -> Result<Vec<bool>> {
    let ds = Dataset::read_csv(&dataset_csv(dir), Split::Train)?;
    if ds.n_states != n_states {
        return Err(Error::Shape(format!("dataset has {} states, model expects {n_states}", ds.n_states)));
    }
    let mut model = TransitionModel::new(n_states, 1);
    let events = dir.join("events.csv");
    if events.is_file() {
        for batch in read_event_batches(&events)? {
            for mut e in batch {
                e.cause = crate::sim::Cause::Environment;
                model.record(&e)?;
            }
        }
    }
    Ok(pipeline::standalone::explored_states(&ds, &model))
}

fn extract_sdes(a: &ExtractArgs) -> Result<()> {
    let mut opts: ExtractOptions = load_config(&a.common.config, ExtractOptions::default)?;
    a.ga.apply(&mut opts.ga);
    opts.ga.seed = resolve_seed(&a.common, opts.ga.seed)?;
    if a.raw {
        opts.scaling = InputScaling::Raw;
    }
    let model = MicroMacroModel::load_json(&a.model1)?;
    if let Some(dir) = &a.explored_from {
        opts.explored = Some(explored_from_dir(dir, model.n_inputs())?);
    }
    let ex = extract_desired_states(&model, &opts)?;
    ex.desired.save_json(a.task, &a.out)?;
    println!("S_des = {:?} (model output {:.4}) -> {}", ex.desired.members(), ex.fitness, a.out.display());
    Ok(())
}

fn estimate_model2(a: &EstimateArgs) -> Result<()> {
    let path = if a.events.is_dir() { a.events.join("events.csv") } else { a.events.clone() };
    let config = TaskConfig::default_for(a.task);
    let (n, m) = (config.n_states(), config.n_actions());
    let batches = read_event_batches(&path)?;
    let events: Vec<_> = batches.iter().flatten().copied().collect();
    let model = TransitionModel::estimate(&events, n, m)?;
    model.save_json(&a.out)?;
    if let Some(conv) = &a.convergence {
        let trace = crate::transition::convergence_trace(&batches, n, m)?;
        let mut w = io::csv_writer(conv)?;
        w.write_record(["batch", "l1_change"])?;
        for (i, v) in trace.iter().enumerate() {
            w.write_record([(i + 1).to_string(), io::fmt_f64(*v)])?;
        }
        w.flush().map_err(|e| Error::io(conv, e))?;
    }
    println!("{} events -> {}", model.total_events(), a.out.display());
    Ok(())
}

fn optimize(a: &OptimizeArgs) -> Result<()> {
    let mut ga: GAConfig = load_config(&a.common.config, GAConfig::default)?;
    a.ga.apply(&mut ga);
    ga.seed = resolve_seed(&a.common, ga.seed)?;
    let model = TransitionModel::load_json(&a.model2)?;
    let (task, desired) = DesiredStateSet::load_json(&a.sdes, model.n_states())?;
    let opt = optimize_policy_pr(&model, &desired, &ga, a.epsilon.unwrap_or(0.0))?;
    opt.policy.save_json(task, &a.out)?;
    write_history(&a.out.with_extension("history.csv"), &opt.history)?;
    println!("F_pr = {:.4} -> {}", opt.fitness, a.out.display());
    Ok(())
}

fn verify_cmd(a: &VerifyArgs) -> Result<()> {
    let model = TransitionModel::load_json(&a.model2)?;
    let (_, policy) = Policy::load_json(&a.policy)?;
    let (_, desired) = DesiredStateSet::load_json(&a.sdes, model.n_states())?;
    let report = verify(&model, &policy, &desired)?;
    report.write(&a.out)?;
    print!("{}", report.render_text());
    Ok(())
}

fn evaluate_cmd(a: &EvaluateArgs) -> Result<()> {
    let (source, task) = match &a.policy {
        Some(p) => {
            let (task, policy) = Policy::load_json(p)?;
            (PolicySource::Fixed(policy), task)
        }
        None => (PolicySource::RandomPerRun, a.sim.task()),
    };
    let mut settings: EvalSettings = load_config(&a.common.config, || EvalSettings {
        config: TaskConfig::default_for(task),
        arena: ArenaSpec::Square { side: 20.0 },
        n_runs: 100,
    })?;
    a.sim.check_task(settings.config.task)?;
    if settings.config.task != task {
        return Err(Error::Config(format!("policy is for task {task}, settings for {}", settings.config.task)));
    }
    settings.config = a.sim.apply(settings.config);
    settings.arena = a.sim.arena(settings.arena);
    if let Some(r) = a.runs {
        settings.n_runs = r;
    }
    if let PolicySource::Fixed(p) = &source {
        p.check_shape(settings.config.n_states(), settings.config.n_actions())?;
    }
    let seed = resolve_seed(&a.common, 0)?;
    let summary = pipeline::evaluate(&settings, &source, seed)?;
    summary.write_dir(&a.out)?;
    let q = summary.quartiles;
    println!(
        "{} runs: median {:.3} (q1 {:.3}, q3 {:.3}) -> {}",
        summary.n_runs(),
        q.median,
        q.q1,
        q.q3,
        a.out.display()
    );
    Ok(())
}

fn evolution_config(a: &EvolveArgs) -> Result<EvolutionConfig> {
    let mut cfg: EvolutionConfig = load_config(&a.common.config, || EvolutionConfig::paper(a.sim.task()))?;
    a.sim.check_task(cfg.config.task)?;
    cfg.config = a.sim.apply(cfg.config);
    cfg.arena = a.sim.arena(cfg.arena);
    a.ga.apply(&mut cfg.ga);
    if let Some(e) = a.evals {
        cfg.ga.evaluations_per_candidate = e;
    }
    cfg.ga.seed = resolve_seed(&a.common, cfg.ga.seed)?;
    cfg.validate()?;
    Ok(cfg)
}

fn evolve_baseline(a: &EvolveArgs) -> Result<()> {
    let cfg = evolution_config(a)?;
    io::ensure_dir(&a.out)?;
    io::write_json(&a.out.join("config.json"), &cfg)?;
    let out = run_baseline_evolution(&cfg)?;
    out.best.save_json(cfg.config.task, &a.out.join("policy.json"))?;
    write_history(&a.out.join("history.csv"), &out.history)?;
    io::write_json(
        &a.out.join("summary.json"),
        &serde_json::json!({ "best_fitness": out.best_fitness, "simulations": out.simulations }),
    )?;
    println!("best {:.3} after {} simulations -> {}", out.best_fitness, out.simulations, a.out.display());
    Ok(())
}

fn evolve_hybrid(a: &HybridArgs) -> Result<()> {
    let e = &a.evolve;
    let mut cfg: HybridConfig = match &e.common.config {
        Some(p) => io::read_json(p)?,
        None => HybridConfig::from_evolution(EvolutionConfig::paper(e.sim.task())),
    };
    e.sim.check_task(cfg.evolution.config.task)?;
    cfg.evolution.config = e.sim.apply(cfg.evolution.config);
    cfg.evolution.arena = e.sim.arena(cfg.evolution.arena);
    e.ga.apply(&mut cfg.evolution.ga);
    if let Some(v) = e.evals {
        cfg.evolution.ga.evaluations_per_candidate = v;
    }
    if let Some(v) = a.train_epochs {
        cfg.train.epochs = v;
    }
    if let Some(v) = a.opt_generations {
        cfg.optimize.generations = v;
    }
    cfg.evolution.ga.seed = resolve_seed(&e.common, cfg.evolution.ga.seed)?;
    cfg.evolution.validate()?;
    let task = cfg.evolution.config.task;
    io::ensure_dir(&e.out)?;
    io::write_json(&e.out.join("config.json"), &cfg)?;
    let out = run_hybrid_evolution(&cfg)?;
    out.evolution.best.save_json(task, &e.out.join("policy.json"))?;
    write_history(&e.out.join("history.csv"), &out.evolution.history)?;
    io::write_json(&e.out.join("injections.json"), &out.injections)?;
    out.model2.save_json(&e.out.join("model2.json"))?;
    if let Some(m) = &out.model1 {
        m.save_json(&e.out.join("model1.json"))?;
    }
    if let Some(d) = &out.desired {
        d.save_json(task, &e.out.join("sdes.json"))?;
    }
    io::write_json(
        &e.out.join("summary.json"),
        &serde_json::json!({
            "best_fitness": out.evolution.best_fitness,
            "simulations": out.evolution.simulations,
            "dataset_runs": out.dataset_runs,
        }),
    )?;
    println!(
        "best {:.3} after {} simulations -> {}",
        out.evolution.best_fitness,
        out.evolution.simulations,
        e.out.display()
    );
    Ok(())
}

fn online(a: &OnlineArgs) -> Result<()> {
    let mode = a.mode.unwrap_or(OnlineMode::Shared);
    let mut cfg: OnlineConfig = load_config(&a.common.config, || {
        let mut c = OnlineConfig::desk(a.sim.task(), mode);
        c.config = TaskConfig::default_for(a.sim.task());
        c.arena = ArenaSpec::Square { side: 20.0 };
        c
    })?;
    a.sim.check_task(cfg.config.task)?;
    if let Some(m) = a.mode {
        cfg.mode = m;
    }
    cfg.config = a.sim.apply(cfg.config);
    cfg.arena = a.sim.arena(cfg.arena);
    if let Some(v) = a.interval {
        cfg.reopt_interval = v;
    }
    if let Some(v) = a.runs {
        cfg.n_runs = v;
    }
    if let Some(v) = a.epsilon {
        cfg.epsilon = v;
    }
    cfg.seed = resolve_seed(&a.common, cfg.seed)?;
    cfg.validate()?;
    let (_, desired) = DesiredStateSet::load_json(&a.sdes, cfg.config.n_states())?;
    io::ensure_dir(&a.out)?;
    io::write_json(&a.out.join("config.json"), &cfg)?;
    let learned = run_online(&cfg, &desired)?;
    let frozen = run_frozen(&cfg, &desired)?;
    learned.summary()?.write_dir(&a.out.join("eval"))?;
    frozen.summary()?.write_dir(&a.out.join("eval_frozen"))?;
    println!(
        "mean final fitness: learning {:.3}, frozen {:.3} -> {}",
        learned.mean_final(),
        frozen.mean_final(),
        a.out.display()
    );
    Ok(())
}

fn standalone(a: &StandaloneArgs) -> Result<()> {
    let mut cfg: StandaloneConfig = load_config(&a.common.config, || {
        if a.desk {
            StandaloneConfig::desk(a.task)
        } else {
            StandaloneConfig::paper(a.task)
        }
    })?;
    if let Some(v) = a.runs {
        cfg.data.n_runs = v;
    }
    if let Some(v) = a.validation_runs {
        cfg.validation_runs = v;
    }
    if let Some(v) = a.eval_runs {
        cfg.eval.n_runs = v;
    }
    if let Some(v) = a.epochs {
        cfg.train.epochs = v;
    }
    if let Some(d) = &a.sdes {
        cfg.desired_override = Some(d.clone());
    }
    if a.random_baseline {
        cfg.random_baseline = true;
    }
    cfg.seed = resolve_seed(&a.common, cfg.seed)?;
    let r = run_standalone(&cfg, Some(&a.out))?;
    println!(
        "S_des = {:?}, vs1 r = {:.3}, median final fitness {:.3}{} -> {}",
        r.desired.members(),
        r.correlation[0],
        r.evaluation.quartiles.median,
        r.baseline
            .as_ref()
            .map(|b| format!(" (random {:.3})", b.quartiles.median))
            .unwrap_or_default(),
        a.out.display()
    );
    Ok(())
}

fn report(a: &ReportArgs) -> Result<()> {
    let report = pipeline::collect_report(&a.run)?;
    let out = a.out.clone().unwrap_or_else(|| a.run.join("report"));
    for p in report.write(&out, a.format)? {
        println!("{}", p.display());
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::GenData(a) => gen_data(a),
        Command::TrainModel1(a) => train_model1(a),
        Command::ExtractSdes(a) => extract_sdes(a),
        Command::EstimateModel2(a) => estimate_model2(a),
        Command::Optimize(a) => optimize(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::EvolveBaseline(a) => evolve_baseline(a),
        Command::EvolveHybrid(a) => evolve_hybrid(a),
        Command::Online(a) => online(a),
        Command::Standalone(a) => standalone(a),
        Command::Report(a) => report(a),
    }
}

/// Exit code for an error: 1 for invalid input, 2 for a failing stage.
pub fn exit_code(e: &Error) -> u8 {
    let validation = match e {
        Error::Io { .. } => true,
        Error::Stage { .. } => false,
        other => other.is_validation(),
    };
    if validation {
        1
    } else {
        2
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn main() -> ExitCode {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    ExitCode::from(run(std::env::args_os()))
}
