//! Turning batches of simulation runs into training data: `(P_s, F_g)` pairs
//! for the fitness model and event streams for the transition model.

use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::sim::log::{read_events, write_event_rows};
use crate::sim::{generate_multi_room_arena, run_simulation, Arena, RunLog, TaskConfig, TransitionEvent};
use crate::types::{derive_seed, rng_from_seed, Normalization, Policy, StateDistribution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Vs1,
    Vs2,
    Vs3,
}

/// How each run's arena is produced.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArenaSpec {
    Square { side: f64 },
    /// A fresh random multi-room layout per run.
    MultiRoom { side: f64 },
}

impl ArenaSpec {
    pub fn build(&self, seed: u64) -> Arena {
        match *self {
            ArenaSpec::Square { side } => Arena::square(side),
            ArenaSpec::MultiRoom { side } => generate_multi_room_arena(side, seed),
        }
    }

    pub fn side(&self) -> f64 {
        match *self {
            ArenaSpec::Square { side } | ArenaSpec::MultiRoom { side } => side,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub n_states: usize,
    pub split: Split,
    /// One row per sample: the state distribution `P_s(t)`.
    pub inputs: Array2<f64>,
    pub targets: Vec<f64>,
    pub run_ids: Vec<usize>,
    pub times: Vec<f64>,
}

impl Dataset {
    pub fn empty(n_states: usize, split: Split) -> Self {
        Self {
            n_states,
            split,
            inputs: Array2::zeros((0, n_states)),
            targets: Vec::new(),
            run_ids: Vec::new(),
            times: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    /// Builds the pairs of one or more logs; `run_offset` numbers the first log.
    pub fn from_logs(logs: &[RunLog], normalization: Normalization, split: Split, run_offset: usize) -> Result<Self> {
        let Some(first) = logs.first() else {
            return Err(Error::EmptyDataset);
        };
        let n = first.n_states();
        let mut flat = Vec::new();
        let mut ds = Self::empty(n, split);
        for (k, log) in logs.iter().enumerate() {
            if log.n_states() != n {
                return Err(Error::Shape(format!("run {k} has {} states, expected {n}", log.n_states())));
            }
            for ((t, states), &(_, f)) in log.states.iter().zip(&log.fitness) {
                let p = match normalization {
                    Normalization::Fractions => StateDistribution::fractions(states, n)?,
                    Normalization::Counts => StateDistribution::counts(states, n)?,
                };
                if !f.is_finite() {
                    return Err(Error::Shape(format!("non-finite fitness in run {k} at t = {t}")));
                }
                flat.extend_from_slice(p.values());
                ds.targets.push(f);
                ds.run_ids.push(run_offset + k);
                ds.times.push(*t);
            }
        }
        ds.inputs = Array2::from_shape_vec((ds.targets.len(), n), flat).expect("rows of width n");
        Ok(ds)
    }

    /// Appends another dataset with the same width.
    pub fn extend(&mut self, other: &Dataset) -> Result<()> {
        if other.n_states != self.n_states {
            return Err(Error::Shape(format!(
                "cannot append {}-state samples to a {}-state dataset",
                other.n_states, self.n_states
            )));
        }
        let mut flat: Vec<f64> = self.inputs.iter().copied().collect();
        flat.extend(other.inputs.iter().copied());
        self.targets.extend_from_slice(&other.targets);
        self.run_ids.extend_from_slice(&other.run_ids);
        self.times.extend_from_slice(&other.times);
        self.inputs = Array2::from_shape_vec((self.targets.len(), self.n_states), flat).expect("rows of width n");
        Ok(())
    }

    /// Sample indices grouped by run, in first-appearance order.
    pub fn runs(&self) -> Vec<(usize, Vec<usize>)> {
        let mut out: Vec<(usize, Vec<usize>)> = Vec::new();
        for (i, &r) in self.run_ids.iter().enumerate() {
            match out.iter_mut().find(|(id, _)| *id == r) {
                Some((_, idx)) => idx.push(i),
                None => out.push((r, vec![i])),
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = io::csv_writer(path)?;
        let mut header = vec!["run_id".to_string(), "t".to_string()];
        header.extend((0..self.n_states).map(|i| format!("p_{i}")));
        header.push("F_g".into());
        w.write_record(&header)?;
        for (i, row) in self.inputs.rows().into_iter().enumerate() {
            let mut rec = vec![self.run_ids[i].to_string(), io::fmt_f64(self.times[i])];
            rec.extend(row.iter().map(|&v| io::fmt_f64(v)));
            rec.push(io::fmt_f64(self.targets[i]));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path, split: Split) -> Result<Self> {
        let mut reader = io::csv_reader(path)?;
        let width = reader.headers()?.len();
        if width < 4 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                reason: "expected run_id, t, p_0.., F_g columns".into(),
            });
        }
        let n = width - 3;
        let mut ds = Self::empty(n, split);
        let mut flat = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            ds.run_ids.push(io::parse_usize(path, &rec[0])?);
            ds.times.push(io::parse_f64(path, &rec[1])?);
            for k in 0..n {
                flat.push(io::parse_f64(path, &rec[2 + k])?);
            }
            ds.targets.push(io::parse_f64(path, &rec[2 + n])?);
        }
        ds.inputs = Array2::from_shape_vec((ds.targets.len(), n), flat).expect("rows of width n");
        Ok(ds)
    }
}

/// Settings for a batch of randomized runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetOptions {
    /// Base configuration; the robot count is drawn per run.
    pub config: TaskConfig,
    pub n_runs: usize,
    pub min_robots: usize,
    pub max_robots: usize,
    pub arena: ArenaSpec,
    pub normalization: Normalization,
}

impl DatasetOptions {
    /// Training protocol defaults: 500 runs, 1..=30 robots (1..=20 for
    /// foraging), 20 m square arena.
    pub fn for_config(config: TaskConfig) -> Self {
        let max_robots = if config.task.is_aggregation() { 30 } else { 20 };
        Self {
            config,
            n_runs: 500,
            min_robots: 1,
            max_robots,
            arena: ArenaSpec::Square { side: 20.0 },
            normalization: Normalization::Fractions,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.n_runs == 0 {
            return Err(Error::Config("at least one run is required".into()));
        }
        if self.min_robots == 0 || self.min_robots > self.max_robots {
            return Err(Error::Config(format!(
                "invalid robot range {}..={}",
                self.min_robots, self.max_robots
            )));
        }
        if !(self.arena.side() > 0.0) {
            return Err(Error::Config("arena side must be positive".into()));
        }
        Ok(())
    }
}

/// Per-run bookkeeping persisted next to a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: usize,
    pub seed: u64,
    pub n_robots: usize,
    pub policy_hash: String,
    pub final_fitness: f64,
}

/// Runs `opts.n_runs` simulations with fresh uniform-random policies and
/// robot counts, in parallel, and assembles them in run order.
pub fn simulate_batch(opts: &DatasetOptions, seed: u64) -> Result<Vec<RunLog>> {
    opts.validate()?;
    let space = opts.config.state_space();
    let actions = opts.config.action_space();
    (0..opts.n_runs)
        .into_par_iter()
        .map(|run| {
            let run_seed = derive_seed(seed, run as u64);
            let mut rng = rng_from_seed(run_seed);
            let n = rng.random_range(opts.min_robots..=opts.max_robots);
            let policy = Policy::uniform_random(&space, &actions, rng.random());
            let arena = opts.arena.build(rng.random());
            let cfg = opts.config.clone().with_robots(n);
            run_simulation(&cfg, &policy, &arena, rng.random())
        })
        .collect()
}

/// Randomized runs and their `(P_s, F_g)` pairs.
pub fn build_training_set(opts: &DatasetOptions, seed: u64) -> Result<(Dataset, Vec<RunLog>)> {
    let logs = simulate_batch(opts, seed)?;
    let ds = Dataset::from_logs(&logs, opts.normalization, Split::Train, 0)?;
    Ok((ds, logs))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationSets {
    pub vs1: Dataset,
    pub vs2: Dataset,
    pub vs3: Dataset,
}

impl ValidationSets {
    pub fn iter(&self) -> impl Iterator<Item = &Dataset> {
        [&self.vs1, &self.vs2, &self.vs3].into_iter()
    }
}

/// Three held-out sets: the training setup, a 10 m square arena, and
/// random multi-room arenas of the training size. `n_runs` runs each.
pub fn build_validation_sets(opts: &DatasetOptions, n_runs: usize, seed: u64) -> Result<ValidationSets> {
    let side = opts.arena.side();
    let make = |arena: ArenaSpec, split: Split, stream: u64| -> Result<Dataset> {
        let o = DatasetOptions {
            n_runs,
            arena,
            ..opts.clone()
        };
        let logs = simulate_batch(&o, derive_seed(seed, stream))?;
        Dataset::from_logs(&logs, o.normalization, split, 0)
    };
    Ok(ValidationSets {
        vs1: make(opts.arena, Split::Vs1, 1)?,
        vs2: make(ArenaSpec::Square { side: 10.0 }, Split::Vs2, 2)?,
        vs3: make(ArenaSpec::MultiRoom { side }, Split::Vs3, 3)?,
    })
}

/// Every run's events, flattened in run order.
pub fn all_events(logs: &[RunLog]) -> Vec<TransitionEvent> {
    logs.iter().flat_map(|l| l.events.iter().copied()).collect()
}

/// Writes `dataset.csv`, `events.csv` (with a run column) and `runs.json`.
pub fn write_dataset_dir(dir: &Path, dataset: &Dataset, logs: &[RunLog], run_offset: usize) -> Result<()> {
    io::ensure_dir(dir)?;
    dataset.write_csv(&dir.join("dataset.csv"))?;
    let path = dir.join("events.csv");
    let mut w = io::csv_writer(&path)?;
    for (k, log) in logs.iter().enumerate() {
        write_event_rows(&mut w, Some(run_offset + k), &log.events, k == 0)?;
    }
    if logs.is_empty() {
        write_event_rows(&mut w, Some(0), &[], true)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    let records: Vec<RunRecord> = logs
        .iter()
        .enumerate()
        .map(|(k, l)| RunRecord {
            run_id: run_offset + k,
            seed: l.meta.seed,
            n_robots: l.meta.n_robots,
            policy_hash: l.meta.policy_hash.clone(),
            final_fitness: l.final_fitness(),
        })
        .collect();
    io::write_json(&dir.join("runs.json"), &records)
}

/// Event batches per run from a dataset directory's `events.csv`.
pub fn read_event_batches(path: &Path) -> Result<Vec<Vec<TransitionEvent>>> {
    let mut batches: Vec<Vec<TransitionEvent>> = Vec::new();
    let mut last = None;
    for (run, e) in read_events(path)? {
        if last != Some(run) {
            batches.push(Vec::new());
            last = Some(run);
        }
        batches.last_mut().expect("pushed").push(e);
    }
    Ok(batches)
}
