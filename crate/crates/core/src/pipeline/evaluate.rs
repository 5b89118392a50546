//! Repeated independent runs of one policy, summarized for box plots and
//! mean/std time series.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datalog::ArenaSpec;
use crate::error::{Error, Result};
use crate::io;
use crate::sim::{run_simulation, RunLog, TaskConfig};
use crate::types::{derive_seed, rng_from_seed, Policy};

/// Which policy each evaluation run uses.
#[derive(Clone, Debug, PartialEq)]
pub enum PolicySource {
    Fixed(Policy),
    /// A fresh uniform-random policy per run.
    RandomPerRun,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    /// Robot count and horizon come from here.
    pub config: TaskConfig,
    pub arena: ArenaSpec,
    pub n_runs: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Quartiles {
    /// Linear interpolation between order statistics.
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Ok(Self {
            min: v[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub final_fitness: Vec<f64>,
    pub quartiles: Quartiles,
    pub times: Vec<f64>,
    pub mean_series: Vec<f64>,
    pub std_series: Vec<f64>,
}

impl EvaluationSummary {
    pub fn n_runs(&self) -> usize {
        self.final_fitness.len()
    }

    pub fn mean_final(&self) -> f64 {
        self.final_fitness.iter().sum::<f64>() / self.final_fitness.len() as f64
    }

    pub fn from_logs(logs: &[RunLog]) -> Result<Self> {
        let series: Vec<&[(f64, f64)]> = logs.iter().map(|l| l.fitness.as_slice()).collect();
        Self::from_series(&series)
    }

    /// From per-run `(t, F_g)` series sampled at the same instants.
    pub fn from_series(runs: &[&[(f64, f64)]]) -> Result<Self> {
        let Some(first) = runs.first() else {
            return Err(Error::EmptyDataset);
        };
        let len = first.len();
        if len == 0 || runs.iter().any(|r| r.len() != len) {
            return Err(Error::Shape("runs have different or empty series".into()));
        }
        let final_fitness: Vec<f64> = runs.iter().map(|r| r[len - 1].1).collect();
        let times: Vec<f64> = first.iter().map(|&(t, _)| t).collect();
        let k = runs.len() as f64;
        let mut mean_series = vec![0.0; len];
        let mut std_series = vec![0.0; len];
        for i in 0..len {
            let m = runs.iter().map(|r| r[i].1).sum::<f64>() / k;
            let var = runs.iter().map(|r| (r[i].1 - m).powi(2)).sum::<f64>() / k;
            mean_series[i] = m;
            std_series[i] = var.sqrt();
        }
        Ok(Self {
            quartiles: Quartiles::of(&final_fitness)?,
            final_fitness,
            times,
            mean_series,
            std_series,
        })
    }

    /// `summary.csv` (final fitness per run), `boxplot.csv` and `series.csv`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        io::ensure_dir(dir)?;
        let path = dir.join("summary.csv");
        let mut w = io::csv_writer(&path)?;
        w.write_record(["run_id", "final_F_g"])?;
        for (i, f) in self.final_fitness.iter().enumerate() {
            w.write_record([i.to_string(), io::fmt_f64(*f)])?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        write_boxplot(&dir.join("boxplot.csv"), &self.quartiles)?;
        self.write_series(&dir.join("series.csv"))
    }

    pub fn write_series(&self, path: &Path) -> Result<()> {
        let mut w = io::csv_writer(path)?;
        w.write_record(["t", "mean", "std"])?;
        for i in 0..self.times.len() {
            w.write_record([
                io::fmt_f64(self.times[i]),
                io::fmt_f64(self.mean_series[i]),
                io::fmt_f64(self.std_series[i]),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let path = dir.join("summary.csv");
        let mut final_fitness = Vec::new();
        for rec in io::csv_reader(&path)?.records() {
            final_fitness.push(io::parse_f64(&path, &rec?[1])?);
        }
        let path = dir.join("series.csv");
        let (mut times, mut mean_series, mut std_series) = (Vec::new(), Vec::new(), Vec::new());
        for rec in io::csv_reader(&path)?.records() {
            let rec = rec?;
            times.push(io::parse_f64(&path, &rec[0])?);
            mean_series.push(io::parse_f64(&path, &rec[1])?);
            std_series.push(io::parse_f64(&path, &rec[2])?);
        }
        Ok(Self {
            quartiles: Quartiles::of(&final_fitness)?,
            final_fitness,
            times,
            mean_series,
            std_series,
        })
    }
}

pub fn write_boxplot(path: &Path, q: &Quartiles) -> Result<()> {
    let mut w = io::csv_writer(path)?;
    w.write_record(["min", "q1", "median", "q3", "max"])?;
    w.write_record([q.min, q.q1, q.median, q.q3, q.max].map(io::fmt_f64))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Runs `settings.n_runs` seeded simulations in parallel.
pub fn evaluate_logs(settings: &EvalSettings, source: &PolicySource, seed: u64) -> Result<Vec<RunLog>> {
    settings.config.validate()?;
    if settings.n_runs == 0 {
        return Err(Error::Config("evaluation needs at least one run".into()));
    }
    let space = settings.config.state_space();
    let actions = settings.config.action_space();
    (0..settings.n_runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = rng_from_seed(derive_seed(seed, run as u64));
            let random;
            let policy = match source {
                PolicySource::Fixed(p) => p,
                PolicySource::RandomPerRun => {
                    random = Policy::uniform_random(&space, &actions, rng.random());
                    &random
                }
            };
            let arena = settings.arena.build(rng.random());
            run_simulation(&settings.config, policy, &arena, rng.random())
        })
        .collect()
}

pub fn evaluate(settings: &EvalSettings, source: &PolicySource, seed: u64) -> Result<EvaluationSummary> {
    EvaluationSummary::from_logs(&evaluate_logs(settings, source, seed)?)
}
