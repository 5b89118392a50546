//! Model-based design without any policy search in simulation: randomized
//! data, fitness model, desired states, transition model, PageRank-optimized
//! policy, verification and evaluation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::evaluate::{evaluate, EvalSettings, EvaluationSummary, PolicySource};
use crate::datalog::{
    all_events, build_training_set, build_validation_sets, write_dataset_dir, ArenaSpec, Dataset, DatasetOptions,
    Split, ValidationSets,
};
use crate::error::{Error, Result};
use crate::evolve::{optimize_policy_pr, write_history, GAConfig, GenerationStats};
use crate::io;
use crate::micromacro::{
    default_hidden_layers, extract_desired_states, train, validate_correlation, ExtractOptions, MicroMacroModel,
    TrainConfig, TrainOutcome,
};
use crate::sim::TaskConfig;
use crate::transition::TransitionModel;
use crate::types::{derive_seed, DesiredSource, DesiredStateSet, Policy, TaskId};
use crate::verify::{verify, VerificationReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandaloneConfig {
    pub data: DatasetOptions,
    /// Runs per validation set.
    pub validation_runs: usize,
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    pub extract: ExtractOptions,
    /// Restrict the desired-state search to states seen in the training data.
    pub restrict_to_explored: bool,
    pub optimize: GAConfig,
    /// Probability floor of the optimized policy.
    pub epsilon: f64,
    pub eval: EvalSettings,
    /// Also evaluate fresh random policies under the same settings.
    pub random_baseline: bool,
    /// Skip extraction and use these desired states.
    #[serde(default)]
    pub desired_override: Option<Vec<usize>>,
    pub seed: u64,
}

impl StandaloneConfig {
    pub fn task(&self) -> TaskId {
        self.data.config.task
    }

    /// Full-scale protocol: 500 training runs, 100 validation runs per set,
    /// 100 evaluation runs of the task's reference swarm.
    pub fn paper(task: TaskId) -> Self {
        let config = TaskConfig::default_for(task);
        let eval_robots = if task.is_aggregation() { 30 } else { 20 };
        let data = DatasetOptions::for_config(config.clone());
        Self {
            eval: EvalSettings {
                config: config.with_robots(eval_robots),
                arena: data.arena,
                n_runs: 100,
            },
            data,
            validation_runs: 100,
            hidden: default_hidden_layers(task),
            train: TrainConfig::for_task(task),
            extract: ExtractOptions::default(),
            restrict_to_explored: true,
            optimize: GAConfig::default(),
            epsilon: 0.0,
            random_baseline: false,
            desired_override: None,
            seed: 0,
        }
    }

    /// Laptop scale: 100 runs of 1..=10 robots for 100 s in a 10 m square,
    /// evaluated over 30 runs of 10 robots against a random baseline.
    pub fn desk(task: TaskId) -> Self {
        let mut cfg = Self::paper(task);
        let config = TaskConfig::default_for(task).with_horizon(100.0);
        let arena = ArenaSpec::Square { side: 10.0 };
        cfg.data = DatasetOptions {
            config: config.clone(),
            n_runs: 100,
            min_robots: 1,
            max_robots: 10,
            arena,
            ..cfg.data
        };
        cfg.validation_runs = 50;
        cfg.eval = EvalSettings {
            config: config.with_robots(10),
            arena,
            n_runs: 30,
        };
        cfg.random_baseline = true;
        cfg
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        self.eval.config.validate()?;
        self.train.validate()?;
        self.optimize.validate()?;
        self.extract.ga.validate()?;
        if self.eval.config.task != self.task() {
            return Err(Error::Config("evaluation task differs from training task".into()));
        }
        if self.validation_runs == 0 || self.eval.n_runs == 0 {
            return Err(Error::Config("validation and evaluation need at least one run".into()));
        }
        if let Some(d) = &self.desired_override {
            DesiredStateSet::new(d.iter().copied(), self.data.config.n_states(), DesiredSource::Manual)?;
            if d.is_empty() {
                return Err(Error::EmptyDesiredSet);
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct StandaloneResult {
    pub model1: MicroMacroModel,
    pub training: TrainOutcome,
    /// Mean per-run correlation on each validation set.
    pub correlation: [f64; 3],
    pub explored: Vec<bool>,
    pub desired: DesiredStateSet,
    pub model2: TransitionModel,
    pub policy: Policy,
    pub policy_fitness: f64,
    pub optimization_history: Vec<GenerationStats>,
    pub verification: VerificationReport,
    pub evaluation: EvaluationSummary,
    pub baseline: Option<EvaluationSummary>,
    /// Simulations run before the policy was fixed.
    pub design_simulations: usize,
}

/// Headline numbers persisted as `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandaloneSummary {
    pub task: TaskId,
    pub seed: u64,
    pub design_simulations: usize,
    pub best_epoch: usize,
    pub correlation: [f64; 3],
    pub desired: Vec<usize>,
    pub policy_fitness: f64,
    pub median_final: f64,
    pub baseline_median_final: Option<f64>,
    pub model1_checksum: String,
    pub policy_checksum: String,
}

/// Runs one stage, attaching its name and the artifacts written so far.
fn stage<T>(name: &'static str, written: &[PathBuf], f: impl FnOnce() -> Result<T>) -> Result<T> {
    log::info!("stage {name}");
    f().map_err(|e| Error::Stage {
        stage: name,
        artifacts: written.to_vec(),
        source: Box::new(e),
    })
}

/// States that occur in any training sample or transition event.
pub fn explored_states(dataset: &Dataset, model2: &TransitionModel) -> Vec<bool> {
    let mut seen = model2.visited_states();
    for row in dataset.inputs.rows() {
        for (i, &v) in row.iter().enumerate() {
            if v > 0.0 {
                seen[i] = true;
            }
        }
    }
    seen
}

/// Executes every stage in order; with `out` set, artifacts are written
/// there as each stage completes.
pub fn run_standalone(cfg: &StandaloneConfig, out: Option<&Path>) -> Result<StandaloneResult> {
    cfg.validate()?;
    let task = cfg.task();
    let n_states = cfg.data.config.n_states();
    let n_actions = cfg.data.config.n_actions();
    let mut written: Vec<PathBuf> = Vec::new();
    let save = |written: &mut Vec<PathBuf>, name: &str, f: &dyn Fn(&Path) -> Result<()>| -> Result<()> {
        if let Some(dir) = out {
            let path = dir.join(name);
            f(&path)?;
            written.push(path);
        }
        Ok(())
    };
    if let Some(dir) = out {
        io::ensure_dir(dir)?;
    }
    save(&mut written, "config.json", &|p| io::write_json(p, cfg))?;

    let (dataset, logs) = stage("gen-data", &written, || build_training_set(&cfg.data, derive_seed(cfg.seed, 1)))?;
    save(&mut written, "dataset", &|p| write_dataset_dir(p, &dataset, &logs, 0))?;
    let validation: ValidationSets = stage("gen-data", &written, || {
        build_validation_sets(&cfg.data, cfg.validation_runs, derive_seed(cfg.seed, 2))
    })?;
    let design_simulations = cfg.data.n_runs + 3 * cfg.validation_runs;

    let training = stage("train-model1", &written, || {
        let init = MicroMacroModel::new(n_states, &cfg.hidden, derive_seed(cfg.seed, 3))?;
        let tc = TrainConfig {
            seed: derive_seed(cfg.seed, 4),
            ..cfg.train.clone()
        };
        train(&init, &dataset, &[&validation.vs1, &validation.vs2, &validation.vs3], &tc)
    })?;
    let model1 = training.model.clone();
    let mut correlation = [0.0; 3];
    for (c, v) in correlation.iter_mut().zip(validation.iter()) {
        *c = validate_correlation(&model1, v)?.mean;
    }
    save(&mut written, "model1.json", &|p| model1.save_json(p))?;
    save(&mut written, "train_history.csv", &|p| {
        crate::micromacro::train::write_history(p, &[Split::Vs1, Split::Vs2, Split::Vs3], &training.history)
    })?;

    let model2 = stage("estimate-model2", &written, || {
        TransitionModel::estimate(&all_events(&logs), n_states, n_actions)
    })?;
    save(&mut written, "model2.json", &|p| model2.save_json(p))?;
    let explored = explored_states(&dataset, &model2);

    let desired = match &cfg.desired_override {
        Some(d) => DesiredStateSet::new(d.iter().copied(), n_states, DesiredSource::Manual)?,
        None => stage("extract-sdes", &written, || {
            let opts = ExtractOptions {
                ga: GAConfig {
                    seed: derive_seed(cfg.seed, 5),
                    ..cfg.extract.ga.clone()
                },
                explored: cfg.restrict_to_explored.then(|| explored.clone()),
                ..cfg.extract.clone()
            };
            extract_desired_states(&model1, &opts).map(|e| e.desired)
        })?,
    };
    if desired.is_empty() {
        return Err(Error::EmptyDesiredSet);
    }
    save(&mut written, "sdes.json", &|p| desired.save_json(task, p))?;

    let opt = stage("optimize", &written, || {
        let ga = GAConfig {
            seed: derive_seed(cfg.seed, 6),
            ..cfg.optimize.clone()
        };
        optimize_policy_pr(&model2, &desired, &ga, cfg.epsilon)
    })?;
    save(&mut written, "policy.json", &|p| opt.policy.save_json(task, p))?;
    save(&mut written, "history.csv", &|p| write_history(p, &opt.history))?;

    let verification = stage("verify", &written, || verify(&model2, &opt.policy, &desired))?;
    if let Some(dir) = out {
        verification.write(dir)?;
        written.push(dir.join("verify.json"));
    }

    let evaluation = stage("evaluate", &written, || {
        evaluate(&cfg.eval, &PolicySource::Fixed(opt.policy.clone()), derive_seed(cfg.seed, 7))
    })?;
    save(&mut written, "eval", &|p| evaluation.write_dir(p))?;
    let baseline = if cfg.random_baseline {
        let b = stage("evaluate", &written, || {
            evaluate(&cfg.eval, &PolicySource::RandomPerRun, derive_seed(cfg.seed, 8))
        })?;
        save(&mut written, "eval_random", &|p| b.write_dir(p))?;
        Some(b)
    } else {
        None
    };

    let summary = StandaloneSummary {
        task,
        seed: cfg.seed,
        design_simulations,
        best_epoch: training.best_epoch,
        correlation,
        desired: desired.members().iter().copied().collect(),
        policy_fitness: opt.fitness,
        median_final: evaluation.quartiles.median,
        baseline_median_final: baseline.as_ref().map(|b| b.quartiles.median),
        model1_checksum: model1.checksum(),
        policy_checksum: opt.policy.checksum(),
    };
    save(&mut written, "summary.json", &|p| io::write_json(p, &summary))?;

    Ok(StandaloneResult {
        model1,
        training,
        correlation,
        explored,
        desired,
        model2,
        policy: opt.policy,
        policy_fitness: opt.fitness,
        optimization_history: opt.history,
        verification,
        evaluation,
        baseline,
        design_simulations,
    })
}
