//! Learning during deployment: robots estimate transition models from the
//! events they experience and periodically re-optimize their policies
//! against fixed desired states.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::evaluate::EvaluationSummary;
use crate::datalog::ArenaSpec;
use crate::error::{Error, Result};
use crate::evolve::{optimize_policy_pr, GAConfig};
use crate::sim::{TaskConfig, World};
use crate::transition::TransitionModel;
use crate::types::{derive_seed, rng_from_seed, DesiredStateSet, Policy, TaskId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OnlineMode {
    /// All robots pool events into one model and share one policy.
    Shared,
    /// Every robot learns from its own events only.
    Heterogeneous,
}

impl std::str::FromStr for OnlineMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "shared" => Ok(Self::Shared),
            "heterogeneous" | "hetero" => Ok(Self::Heterogeneous),
            _ => Err(Error::Config(format!("unknown online mode {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnlineConfig {
    pub config: TaskConfig,
    pub arena: ArenaSpec,
    pub mode: OnlineMode,
    /// Simulated seconds between re-optimizations.
    pub reopt_interval: f64,
    pub optimize: GAConfig,
    /// Probability floor of re-optimized policies; keeps robots exploring.
    pub epsilon: f64,
    pub n_runs: usize,
    pub seed: u64,
}

impl OnlineConfig {
    /// 10 runs of 10 robots for 200 s in a 10 m square, re-optimizing every
    /// 20 s with a 30 x 20 GA.
    pub fn desk(task: TaskId, mode: OnlineMode) -> Self {
        Self {
            config: TaskConfig::default_for(task).with_robots(10).with_horizon(200.0),
            arena: ArenaSpec::Square { side: 10.0 },
            mode,
            reopt_interval: 20.0,
            optimize: GAConfig {
                population_size: 30,
                generations: 20,
                ..GAConfig::default()
            },
            epsilon: 0.05,
            n_runs: 10,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        self.optimize.validate()?;
        if !(self.reopt_interval > 0.0 && self.reopt_interval.is_finite()) {
            return Err(Error::Config("re-optimization interval must be positive".into()));
        }
        if self.n_runs == 0 {
            return Err(Error::Config("at least one run is required".into()));
        }
        Ok(())
    }
}

/// One re-optimization instant.
#[derive(Clone, Debug, PartialEq)]
pub struct Reoptimization {
    pub time: f64,
    /// Per-robot models at that instant.
    pub robot_models: Vec<TransitionModel>,
    /// The pooled model used in shared mode.
    pub shared_model: Option<TransitionModel>,
    pub policies: Vec<Policy>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OnlineRun {
    pub fitness: Vec<(f64, f64)>,
    pub initial_policies: Vec<Policy>,
    pub reoptimizations: Vec<Reoptimization>,
}

impl OnlineRun {
    pub fn final_fitness(&self) -> f64 {
        self.fitness.last().map_or(f64::NAN, |&(_, f)| f)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OnlineOutcome {
    pub runs: Vec<OnlineRun>,
}

impl OnlineOutcome {
    pub fn mean_final(&self) -> f64 {
        self.runs.iter().map(OnlineRun::final_fitness).sum::<f64>() / self.runs.len() as f64
    }

    pub fn summary(&self) -> Result<EvaluationSummary> {
        let series: Vec<&[(f64, f64)]> = self.runs.iter().map(|r| r.fitness.as_slice()).collect();
        EvaluationSummary::from_series(&series)
    }
}

/// Initial random policies of one run: a single shared draw, or one per
/// robot in heterogeneous mode.
fn initial_policies(cfg: &OnlineConfig, seed: u64) -> Vec<Policy> {
    let space = cfg.config.state_space();
    let actions = cfg.config.action_space();
    match cfg.mode {
        OnlineMode::Shared => vec![Policy::uniform_random(&space, &actions, seed); cfg.config.n_robots],
        OnlineMode::Heterogeneous => (0..cfg.config.n_robots)
            .map(|i| Policy::uniform_random(&space, &actions, derive_seed(seed, i as u64)))
            .collect(),
    }
}

/// One run. With `learn = false` the initial policies stay frozen, which is
/// the baseline the learning runs are compared against; both share all
/// randomness up to the first re-optimization.
pub fn run_online_single(cfg: &OnlineConfig, desired: &DesiredStateSet, run: usize, learn: bool) -> Result<OnlineRun> {
    cfg.validate()?;
    if desired.is_empty() {
        return Err(Error::EmptyDesiredSet);
    }
    let n_states = cfg.config.n_states();
    let n_actions = cfg.config.n_actions();
    let n = cfg.config.n_robots;
    let mut rng = rng_from_seed(derive_seed(cfg.seed, run as u64));
    let policies = initial_policies(cfg, rng.random());
    let arena = cfg.arena.build(rng.random());
    let mut world = World::with_policies(cfg.config.clone(), arena, policies.clone(), rng.random())?;
    let opt_seed: u64 = rng.random();

    let mut models = vec![TransitionModel::new(n_states, n_actions); n];
    let mut seen = 0;
    let mut reoptimizations = Vec::new();
    let mut k = 1;
    while !world.is_done() {
        world.run_until(k as f64 * cfg.reopt_interval);
        if world.is_done() || !learn {
            k += 1;
            continue;
        }
        for e in &world.events()[seen..] {
            models[e.robot].record(e)?;
        }
        seen = world.events().len();
        let ga = |r: usize| GAConfig {
            seed: derive_seed(derive_seed(opt_seed, k as u64), r as u64),
            ..cfg.optimize.clone()
        };
        let (shared_model, new_policies) = match cfg.mode {
            OnlineMode::Shared => {
                let mut pooled = TransitionModel::new(n_states, n_actions);
                for m in &models {
                    pooled.merge(m)?;
                }
                let p = optimize_policy_pr(&pooled, desired, &ga(0), cfg.epsilon)?.policy;
                world.set_all_policies(&p)?;
                (Some(pooled), vec![p; n])
            }
            OnlineMode::Heterogeneous => {
                let ps = models
                    .par_iter()
                    .enumerate()
                    .map(|(r, m)| optimize_policy_pr(m, desired, &ga(r), cfg.epsilon).map(|o| o.policy))
                    .collect::<Result<Vec<_>>>()?;
                for (r, p) in ps.iter().enumerate() {
                    world.set_policy(r, p.clone())?;
                }
                (None, ps)
            }
        };
        reoptimizations.push(Reoptimization {
            time: world.time(),
            robot_models: models.clone(),
            shared_model,
            policies: new_policies,
        });
        k += 1;
    }
    Ok(OnlineRun {
        fitness: world.into_log().fitness,
        initial_policies: policies,
        reoptimizations,
    })
}

/// `cfg.n_runs` independent learning runs.
pub fn run_online(cfg: &OnlineConfig, desired: &DesiredStateSet) -> Result<OnlineOutcome> {
    let runs = (0..cfg.n_runs)
        .into_par_iter()
        .map(|r| run_online_single(cfg, desired, r, true))
        .collect::<Result<Vec<_>>>()?;
    Ok(OnlineOutcome { runs })
}

/// The same runs with the initial random policies never re-optimized.
pub fn run_frozen(cfg: &OnlineConfig, desired: &DesiredStateSet) -> Result<OnlineOutcome> {
    let runs = (0..cfg.n_runs)
        .into_par_iter()
        .map(|r| run_online_single(cfg, desired, r, false))
        .collect::<Result<Vec<_>>>()?;
    Ok(OnlineOutcome { runs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::DesiredSource;

    fn tiny(mode: OnlineMode) -> OnlineConfig {
        let mut cfg = OnlineConfig::desk(TaskId::A, mode).with_seed(5);
        cfg.config = cfg.config.with_robots(5).with_horizon(30.0);
        cfg.reopt_interval = 10.0;
        cfg.optimize.population_size = 6;
        cfg.optimize.generations = 3;
        cfg.n_runs = 1;
        cfg
    }

    fn sdes() -> DesiredStateSet {
        DesiredStateSet::new([2, 3], 8, DesiredSource::Manual).unwrap()
    }

    #[test]
    fn shared_mode_pools_counts_and_syncs_policies() {
        let run = run_online_single(&tiny(OnlineMode::Shared), &sdes(), 0, true).unwrap();
        assert_eq!(run.reoptimizations.len(), 2);
        for r in &run.reoptimizations {
            let mut merged = TransitionModel::new(8, 2);
            for m in &r.robot_models {
                merged.merge(m).unwrap();
            }
            assert_eq!(r.shared_model.as_ref().unwrap(), &merged);
            assert!(r.policies.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn identical_to_frozen_before_first_reoptimization() {
        let cfg = tiny(OnlineMode::Heterogeneous);
        let learn = run_online_single(&cfg, &sdes(), 0, true).unwrap();
        let frozen = run_online_single(&cfg, &sdes(), 0, false).unwrap();
        assert_eq!(learn.initial_policies, frozen.initial_policies);
        let before = |r: &OnlineRun| -> Vec<(f64, f64)> {
            r.fitness.iter().copied().filter(|&(t, _)| t <= cfg.reopt_interval).collect()
        };
        assert_eq!(before(&learn), before(&frozen));
        assert!(frozen.reoptimizations.is_empty());
    }

    #[test]
    fn empty_desired_rejected() {
        let none = DesiredStateSet::new([], 8, DesiredSource::Manual).unwrap();
        assert!(run_online_single(&tiny(OnlineMode::Shared), &none, 0, true).is_err());
    }
}
