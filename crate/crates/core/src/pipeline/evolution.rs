//! Policy search in simulation, optionally augmented by the two models: the
//! hybrid variant keeps one population slot filled with the policy optimized
//! against models retrained on everything simulated so far.

use serde::{Deserialize, Serialize};

use super::standalone::explored_states;
use crate::datalog::{all_events, ArenaSpec, Dataset, Split};
use crate::error::{Error, Result};
use crate::evolve::{optimize_policy_pr, EvalContext, Evolution, GAConfig, GenerationStats, PolicySpace};
use crate::micromacro::{default_hidden_layers, extract_desired_states, train, ExtractOptions, MicroMacroModel, TrainConfig};
use crate::sim::{run_simulation, RunLog, TaskConfig};
use crate::transition::TransitionModel;
use crate::types::{derive_seed, DesiredStateSet, Normalization, Policy, TaskId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionConfig {
    /// Robot count and horizon of every fitness simulation.
    pub config: TaskConfig,
    pub arena: ArenaSpec,
    /// `evaluations_per_candidate` simulations are averaged per candidate.
    pub ga: GAConfig,
    /// Probability floor of evolved policies.
    pub epsilon: f64,
}

impl EvolutionConfig {
    /// Population 100, 5 simulations per candidate.
    pub fn paper(task: TaskId) -> Self {
        let n = if task.is_aggregation() { 30 } else { 20 };
        Self {
            config: TaskConfig::default_for(task).with_robots(n),
            arena: ArenaSpec::Square { side: 20.0 },
            ga: GAConfig {
                evaluations_per_candidate: 5,
                reevaluate_elites: true,
                ..GAConfig::default()
            },
            epsilon: 0.0,
        }
    }

    /// Population 20, 2 simulations per candidate, 5 generations of 10 robots
    /// for 100 s in a 10 m square.
    pub fn desk(task: TaskId) -> Self {
        Self {
            config: TaskConfig::default_for(task).with_robots(10).with_horizon(100.0),
            arena: ArenaSpec::Square { side: 10.0 },
            ga: GAConfig {
                population_size: 20,
                generations: 5,
                evaluations_per_candidate: 2,
                reevaluate_elites: true,
                ..GAConfig::default()
            },
            epsilon: 0.0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.ga.seed = seed;
        self
    }

    pub fn simulations_per_generation(&self) -> usize {
        self.ga.population_size * self.ga.evaluations_per_candidate
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        self.ga.validate()
    }
}

#[derive(Clone, Debug)]
pub struct EvolutionOutcome {
    pub best: Policy,
    pub best_fitness: f64,
    pub history: Vec<GenerationStats>,
    pub simulations: usize,
}

/// Simulates one candidate on the generation's shared scenarios.
fn simulate_candidate(cfg: &EvolutionConfig, policy: &Policy, ctx: EvalContext) -> Result<(f64, Vec<RunLog>)> {
    let mut logs = Vec::with_capacity(cfg.ga.evaluations_per_candidate);
    for e in 0..cfg.ga.evaluations_per_candidate {
        let scenario = derive_seed(ctx.generation_seed, 1_000_000 + e as u64);
        let arena = cfg.arena.build(derive_seed(scenario, 0));
        logs.push(run_simulation(&cfg.config, policy, &arena, derive_seed(scenario, 1))?);
    }
    let mean = logs.iter().map(RunLog::final_fitness).sum::<f64>() / logs.len() as f64;
    Ok((mean, logs))
}

/// GA whose fitness is the mean final global fitness over
/// `evaluations_per_candidate` simulations. All candidates of a generation
/// share the same simulation seeds.
pub fn run_baseline_evolution(cfg: &EvolutionConfig) -> Result<EvolutionOutcome> {
    cfg.validate()?;
    let space = PolicySpace::new(cfg.config.n_states(), cfg.config.n_actions(), cfg.epsilon)?;
    let mut evo = Evolution::new(&space, cfg.ga.clone(), Vec::new())?;
    let generations = cfg.ga.generations.max(1);
    let mut simulations = 0;
    for g in 0..generations {
        let logs = evo.evaluate_collect(|p, ctx| simulate_candidate(cfg, p, ctx))?;
        simulations += logs.iter().flatten().map(Vec::len).sum::<usize>();
        if g + 1 < generations {
            evo.advance(Vec::new());
        }
    }
    let (best, best_fitness) = evo.best().map(|(p, f)| (p.clone(), f)).expect("evaluated");
    Ok(EvolutionOutcome {
        best,
        best_fitness,
        history: evo.history().to_vec(),
        simulations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HybridConfig {
    pub evolution: EvolutionConfig,
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
    pub extract: ExtractOptions,
    pub optimize: GAConfig,
    /// Probability floor of the injected policy.
    pub opt_epsilon: f64,
}

impl HybridConfig {
    pub fn from_evolution(evolution: EvolutionConfig) -> Self {
        let task = evolution.config.task;
        Self {
            hidden: default_hidden_layers(task),
            train: TrainConfig::for_task(task),
            extract: ExtractOptions::default(),
            optimize: GAConfig::default(),
            opt_epsilon: 0.0,
            evolution,
        }
    }

    /// Desk evolution with a lighter per-generation model update: 50 training
    /// epochs and 30 optimizer generations.
    pub fn desk(task: TaskId) -> Self {
        let mut cfg = Self::from_evolution(EvolutionConfig::desk(task));
        cfg.train.epochs = 50;
        cfg.optimize.generations = 30;
        cfg
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.evolution.ga.seed = seed;
        self
    }
}

/// The model-based member of one generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectionRecord {
    pub generation: usize,
    pub index: usize,
    pub fitness: f64,
    /// 0 is the generation's best.
    pub rank: usize,
    pub is_worst: bool,
    pub desired: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct HybridOutcome {
    pub evolution: EvolutionOutcome,
    pub injections: Vec<InjectionRecord>,
    pub model1: Option<MicroMacroModel>,
    pub model2: TransitionModel,
    pub desired: Option<DesiredStateSet>,
    /// Accumulated dataset size, in runs, after each generation.
    pub dataset_runs: Vec<usize>,
}

/// Rank of `index` by descending fitness; ties favor the candidate.
fn rank_of(fitness: &[Option<f64>], index: usize) -> (usize, bool) {
    let f = fitness[index].unwrap_or(f64::NEG_INFINITY);
    let better = fitness.iter().filter(|v| v.unwrap_or(f64::NEG_INFINITY) > f).count();
    let worse = fitness.iter().filter(|v| v.unwrap_or(f64::NEG_INFINITY) < f).count();
    (better, worse == 0 && fitness.len() > 1)
}

/// Baseline evolution plus, after every generation: retrain the fitness
/// model from scratch and re-estimate the transition model on all runs so
/// far, extract desired states, optimize a policy by PageRank and inject it
/// into the next population.
pub fn run_hybrid_evolution(cfg: &HybridConfig) -> Result<HybridOutcome> {
    let ev = &cfg.evolution;
    ev.validate()?;
    let n_states = ev.config.n_states();
    let n_actions = ev.config.n_actions();
    let space = PolicySpace::new(n_states, n_actions, ev.epsilon)?;
    let mut evo = Evolution::new(&space, ev.ga.clone(), Vec::new())?;
    let generations = ev.ga.generations.max(1);

    let mut dataset = Dataset::empty(n_states, Split::Train);
    let mut model2 = TransitionModel::new(n_states, n_actions);
    let mut model1 = None;
    let mut desired = None;
    let mut injections = Vec::new();
    let mut dataset_runs = Vec::new();
    let mut simulations = 0;
    let mut pending: Option<Vec<usize>> = None;

    for g in 0..generations {
        let logs = evo.evaluate_collect(|p, ctx| simulate_candidate(ev, p, ctx))?;
        if let Some(d) = pending.take() {
            for &index in evo.injected() {
                let (rank, is_worst) = rank_of(evo.fitness(), index);
                injections.push(InjectionRecord {
                    generation: g,
                    index,
                    fitness: evo.fitness()[index].expect("evaluated"),
                    rank,
                    is_worst,
                    desired: d.clone(),
                });
            }
        }
        let logs: Vec<RunLog> = logs.into_iter().flatten().flatten().collect();
        simulations += logs.len();
        let offset = dataset_runs.last().copied().unwrap_or(0);
        dataset.extend(&Dataset::from_logs(&logs, Normalization::Fractions, Split::Train, offset)?)?;
        model2.record_all(&all_events(&logs))?;
        dataset_runs.push(offset + logs.len());

        if g + 1 == generations {
            break;
        }
        let seed = derive_seed(ev.ga.seed ^ 0x5EED, g as u64);
        let init = MicroMacroModel::new(n_states, &cfg.hidden, derive_seed(seed, 0))?;
        let tc = TrainConfig {
            seed: derive_seed(seed, 1),
            ..cfg.train.clone()
        };
        let m1 = train(&init, &dataset, &[&dataset], &tc)?.model;
        let opts = ExtractOptions {
            ga: GAConfig {
                seed: derive_seed(seed, 2),
                ..cfg.extract.ga.clone()
            },
            explored: Some(explored_states(&dataset, &model2)),
            ..cfg.extract.clone()
        };
        let sdes = extract_desired_states(&m1, &opts)?.desired;
        let ga = GAConfig {
            seed: derive_seed(seed, 3),
            ..cfg.optimize.clone()
        };
        let opt = optimize_policy_pr(&model2, &sdes, &ga, cfg.opt_epsilon.max(ev.epsilon))?;
        pending = Some(sdes.members().iter().copied().collect());
        model1 = Some(m1);
        desired = Some(sdes);
        evo.advance(vec![opt.policy]);
    }

    let (best, best_fitness) = evo.best().map(|(p, f)| (p.clone(), f)).expect("evaluated");
    if injections.len() + 1 != generations {
        return Err(Error::Config("injection bookkeeping out of step".into()));
    }
    Ok(HybridOutcome {
        evolution: EvolutionOutcome {
            best,
            best_fitness,
            history: evo.history().to_vec(),
            simulations,
        },
        injections,
        model1,
        model2,
        desired,
        dataset_runs,
    })
}
