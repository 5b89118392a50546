//! Seeded generational genetic algorithm over pluggable genome spaces, and
//! the PageRank-based policy optimizer built on it.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::pagerank::{fitness_pr, pagerank, PageRankOptions};
use crate::transition::{compose_G, TransitionModel};
use crate::types::{derive_seed, rng_from_seed, DesiredStateSet, Policy, SimRng};

/// A genome representation with its variation operators.
pub trait GenomeSpace: Sync {
    type Genome: Clone + Send + Sync;

    fn random(&self, rng: &mut SimRng) -> Self::Genome;
    /// Number of genes, used for the default mutation rate.
    fn len(&self) -> usize;
    fn crossover(&self, a: &Self::Genome, b: &Self::Genome, rng: &mut SimRng) -> (Self::Genome, Self::Genome);
    fn mutate(&self, g: &mut Self::Genome, rate: f64, scale: f64, rng: &mut SimRng);
    /// Flat numeric encoding, used for checkpoints and error reports.
    fn encode(&self, g: &Self::Genome) -> Vec<f64>;
}

/// Bit strings; genes with `allowed[i] == false` are pinned to zero.
#[derive(Clone, Debug)]
pub struct BinarySpace {
    pub allowed: Vec<bool>,
}

impl BinarySpace {
    pub fn new(len: usize) -> Self {
        Self {
            allowed: vec![true; len],
        }
    }

    pub fn masked(allowed: Vec<bool>) -> Self {
        Self { allowed }
    }
}

impl GenomeSpace for BinarySpace {
    type Genome = Vec<bool>;

    fn random(&self, rng: &mut SimRng) -> Vec<bool> {
        self.allowed.iter().map(|&ok| ok && rng.random_bool(0.5)).collect()
    }

    fn len(&self) -> usize {
        self.allowed.iter().filter(|&&a| a).count().max(1)
    }

    fn crossover(&self, a: &Vec<bool>, b: &Vec<bool>, rng: &mut SimRng) -> (Vec<bool>, Vec<bool>) {
        uniform_crossover(a, b, rng)
    }

    fn mutate(&self, g: &mut Vec<bool>, rate: f64, _scale: f64, rng: &mut SimRng) {
        for (bit, &ok) in g.iter_mut().zip(&self.allowed) {
            if ok && rng.random_bool(rate) {
                *bit = !*bit;
            }
        }
    }

    fn encode(&self, g: &Vec<bool>) -> Vec<f64> {
        g.iter().map(|&b| f64::from(u8::from(b))).collect()
    }
}

/// Real vectors in a box, Gaussian mutation.
#[derive(Clone, Debug)]
pub struct RealSpace {
    pub len: usize,
    pub lo: f64,
    pub hi: f64,
}

impl GenomeSpace for RealSpace {
    type Genome = Vec<f64>;

    fn random(&self, rng: &mut SimRng) -> Vec<f64> {
        (0..self.len).map(|_| rng.random_range(self.lo..=self.hi)).collect()
    }

    fn len(&self) -> usize {
        self.len
    }

    fn crossover(&self, a: &Vec<f64>, b: &Vec<f64>, rng: &mut SimRng) -> (Vec<f64>, Vec<f64>) {
        uniform_crossover(a, b, rng)
    }

    fn mutate(&self, g: &mut Vec<f64>, rate: f64, scale: f64, rng: &mut SimRng) {
        let normal = Normal::new(0.0, scale).expect("mutation scale is finite");
        for v in g.iter_mut() {
            if rng.random_bool(rate) {
                *v = (*v + normal.sample(rng)).clamp(self.lo, self.hi);
            }
        }
    }

    fn encode(&self, g: &Vec<f64>) -> Vec<f64> {
        g.clone()
    }
}

fn uniform_crossover<T: Clone>(a: &[T], b: &[T], rng: &mut SimRng) -> (Vec<T>, Vec<T>) {
    let mut c = a.to_vec();
    let mut d = b.to_vec();
    for i in 0..c.len().min(d.len()) {
        if rng.random_bool(0.5) {
            std::mem::swap(&mut c[i], &mut d[i]);
        }
    }
    (c, d)
}

/// Row-stochastic policy tables with every entry at least `epsilon`.
#[derive(Clone, Debug)]
pub struct PolicySpace {
    pub n_states: usize,
    pub n_actions: usize,
    pub epsilon: f64,
}

impl PolicySpace {
    pub fn new(n_states: usize, n_actions: usize, epsilon: f64) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::Config("policy space needs at least one state and one action".into()));
        }
        if !(0.0..1.0 / n_actions as f64).contains(&epsilon) {
            return Err(Error::Config(format!(
                "probability floor {epsilon} must lie in [0, 1/{n_actions})"
            )));
        }
        Ok(Self {
            n_states,
            n_actions,
            epsilon,
        })
    }

    /// Brings a policy onto the floored simplex; rows already there are untouched.
    pub fn project(&self, policy: &Policy) -> Policy {
        let m = self.n_actions;
        let mut table = policy.as_slice().to_vec();
        for row in table.chunks_mut(m) {
            project_row(row, self.epsilon);
        }
        Policy::from_flat(self.n_states, m, table).expect("projected rows are stochastic")
    }
}

/// Clamps entries below `eps` up to `eps` and rescales the others to keep the
/// row summing to one, repeating until no free entry drops below the floor.
pub fn project_row(row: &mut [f64], eps: f64) {
    let m = row.len();
    for v in row.iter_mut() {
        if !v.is_finite() || *v < 0.0 {
            *v = 0.0;
        }
    }
    if row.iter().sum::<f64>() <= 0.0 {
        row.fill(1.0 / m as f64);
    }
    let mut fixed = vec![false; m];
    loop {
        let n_fixed = fixed.iter().filter(|&&f| f).count();
        let free_sum: f64 = row.iter().zip(&fixed).filter(|(_, &f)| !f).map(|(v, _)| v).sum();
        let target = 1.0 - eps * n_fixed as f64;
        if free_sum <= 0.0 {
            let free = m - n_fixed;
            for (v, &f) in row.iter_mut().zip(&fixed) {
                if !f {
                    *v = target / free as f64;
                }
            }
        } else {
            for (v, &f) in row.iter_mut().zip(&fixed) {
                if !f {
                    *v *= target / free_sum;
                }
            }
        }
        let mut changed = false;
        for (v, f) in row.iter_mut().zip(fixed.iter_mut()) {
            if !*f && *v < eps {
                *v = eps;
                *f = true;
                changed = true;
            } else if *f {
                *v = eps;
            }
        }
        if !changed {
            break;
        }
    }
    // absorb rounding so the row sums to one within tolerance
    let s: f64 = row.iter().sum();
    if let Some((k, _)) = row.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)) {
        row[k] += 1.0 - s;
    }
}

impl GenomeSpace for PolicySpace {
    type Genome = Policy;

    fn random(&self, rng: &mut SimRng) -> Policy {
        self.project(&Policy::random_with(self.n_states, self.n_actions, rng))
    }

    fn len(&self) -> usize {
        self.n_states * self.n_actions
    }

    /// Swaps whole rows so children stay stochastic.
    fn crossover(&self, a: &Policy, b: &Policy, rng: &mut SimRng) -> (Policy, Policy) {
        let m = self.n_actions;
        let mut c = a.as_slice().to_vec();
        let mut d = b.as_slice().to_vec();
        for s in 0..self.n_states {
            if rng.random_bool(0.5) {
                let (lo, hi) = (s * m, (s + 1) * m);
                c[lo..hi].swap_with_slice(&mut d[lo..hi]);
            }
        }
        (
            Policy::from_flat(self.n_states, m, c).expect("rows of valid parents"),
            Policy::from_flat(self.n_states, m, d).expect("rows of valid parents"),
        )
    }

    fn mutate(&self, g: &mut Policy, rate: f64, scale: f64, rng: &mut SimRng) {
        let normal = Normal::new(0.0, scale).expect("mutation scale is finite");
        let m = self.n_actions;
        let mut table = g.as_slice().to_vec();
        let mut touched = false;
        for row in table.chunks_mut(m) {
            let mut row_touched = false;
            for v in row.iter_mut() {
                if rng.random_bool(rate) {
                    *v += normal.sample(rng);
                    row_touched = true;
                }
            }
            if row_touched {
                project_row(row, self.epsilon);
                touched = true;
            }
        }
        if touched {
            *g = Policy::from_flat(self.n_states, m, table).expect("projected rows are stochastic");
        }
    }

    fn encode(&self, g: &Policy) -> Vec<f64> {
        g.as_slice().to_vec()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GAConfig {
    pub population_size: usize,
    pub generations: usize,
    /// Fitness evaluations averaged per candidate (noisy fitness only).
    pub evaluations_per_candidate: usize,
    pub crossover_rate: f64,
    /// Per-gene mutation probability; `None` means `1 / genome length`.
    pub mutation_rate: Option<f64>,
    pub mutation_scale: f64,
    pub elitism: usize,
    pub tournament_size: usize,
    /// Re-evaluate carried elites each generation instead of keeping their
    /// fitness; meant for noisy, simulation-based fitness.
    #[serde(default)]
    pub reevaluate_elites: bool,
    pub seed: u64,
}

impl Default for GAConfig {
    fn default() -> Self {
        Self {
            population_size: 100,
            generations: 50,
            evaluations_per_candidate: 1,
            crossover_rate: 0.7,
            mutation_rate: None,
            mutation_scale: 0.1,
            elitism: 2,
            tournament_size: 3,
            reevaluate_elites: false,
            seed: 0,
        }
    }
}

impl GAConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 2 {
            return Err(Error::Config("population must have at least 2 members".into()));
        }
        if self.evaluations_per_candidate == 0 || self.tournament_size == 0 {
            return Err(Error::Config("evaluations and tournament size must be positive".into()));
        }
        if self.elitism >= self.population_size {
            return Err(Error::Config("elitism must leave room for offspring".into()));
        }
        let rates = [Some(self.crossover_rate), self.mutation_rate];
        if rates.iter().flatten().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::Config("crossover and mutation rates must lie in [0, 1]".into()));
        }
        if !(self.mutation_scale.is_finite() && self.mutation_scale >= 0.0) {
            return Err(Error::Config("mutation scale must be non-negative".into()));
        }
        Ok(())
    }
}

/// Passed to the fitness function alongside each candidate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EvalContext {
    pub generation: usize,
    pub index: usize,
    /// Shared by every candidate of the generation (common random numbers).
    pub generation_seed: u64,
    /// Unique to this candidate.
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
    pub std: f64,
    pub worst: f64,
    pub evaluated: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub generation: usize,
    pub genomes: Vec<Vec<f64>>,
    pub fitness: Vec<Option<f64>>,
}

/// Generational GA driven one step at a time, so callers can inspect the
/// population between generations and inject members.
pub struct Evolution<'a, S: GenomeSpace> {
    space: &'a S,
    cfg: GAConfig,
    rng: SimRng,
    generation: usize,
    population: Vec<S::Genome>,
    fitness: Vec<Option<f64>>,
    injected: Vec<usize>,
    best: Option<(S::Genome, f64)>,
    history: Vec<GenerationStats>,
}

impl<'a, S: GenomeSpace> Evolution<'a, S> {
    /// `seeds` occupy the first population slots; the rest are random.
    pub fn new(space: &'a S, cfg: GAConfig, seeds: Vec<S::Genome>) -> Result<Self> {
        cfg.validate()?;
        let mut rng = rng_from_seed(cfg.seed);
        let mut population: Vec<S::Genome> = seeds.into_iter().take(cfg.population_size).collect();
        while population.len() < cfg.population_size {
            population.push(space.random(&mut rng));
        }
        let fitness = vec![None; population.len()];
        Ok(Self {
            space,
            cfg,
            rng,
            generation: 0,
            population,
            fitness,
            injected: Vec::new(),
            best: None,
            history: Vec::new(),
        })
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn population(&self) -> &[S::Genome] {
        &self.population
    }

    pub fn fitness(&self) -> &[Option<f64>] {
        &self.fitness
    }

    /// Slots filled by [`advance`](Self::advance) injections this generation.
    pub fn injected(&self) -> &[usize] {
        &self.injected
    }

    pub fn history(&self) -> &[GenerationStats] {
        &self.history
    }

    pub fn best(&self) -> Option<(&S::Genome, f64)> {
        self.best.as_ref().map(|(g, f)| (g, *f))
    }

    pub fn generation_seed(&self) -> u64 {
        derive_seed(self.cfg.seed, self.generation as u64)
    }

    /// Evaluates every member without a fitness (in parallel, order kept),
    /// returning each evaluation's side output; carried elites yield `None`.
    pub fn evaluate_collect<T, F>(&mut self, f: F) -> Result<Vec<Option<T>>>
    where
        T: Send,
        F: Fn(&S::Genome, EvalContext) -> Result<(f64, T)> + Sync,
    {
        let generation = self.generation;
        let generation_seed = self.generation_seed();
        let space = self.space;
        let results: Vec<Option<Result<(f64, T)>>> = self
            .population
            .par_iter()
            .zip(self.fitness.par_iter())
            .enumerate()
            .map(|(index, (g, known))| {
                if known.is_some() {
                    return None;
                }
                let ctx = EvalContext {
                    generation,
                    index,
                    generation_seed,
                    seed: derive_seed(generation_seed, index as u64),
                };
                Some(f(g, ctx).and_then(|(v, t)| {
                    if v.is_finite() || v == f64::NEG_INFINITY {
                        Ok((v, t))
                    } else {
                        Err(Error::Config(format!("fitness is {v}")))
                    }
                }))
            })
            .collect();

        let mut out = Vec::with_capacity(results.len());
        let mut evaluated = 0;
        for (i, r) in results.into_iter().enumerate() {
            match r {
                None => out.push(None),
                Some(Ok((v, t))) => {
                    self.fitness[i] = Some(v);
                    evaluated += 1;
                    out.push(Some(t));
                }
                Some(Err(e)) => {
                    return Err(Error::Fitness {
                        genome: format!("{:?}", space.encode(&self.population[i])),
                        reason: e.to_string(),
                    })
                }
            }
        }

        let values: Vec<f64> = self.fitness.iter().map(|f| f.expect("all evaluated")).collect();
        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        let mean = if finite.is_empty() {
            f64::NEG_INFINITY
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        };
        let std = if finite.len() > 1 {
            (finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / finite.len() as f64).sqrt()
        } else {
            0.0
        };
        let (best_idx, best) = values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        let worst = values.iter().copied().fold(f64::INFINITY, f64::min);
        if self.best.as_ref().is_none_or(|(_, b)| best > *b) {
            self.best = Some((self.population[best_idx].clone(), best));
        }
        let best = self.best.as_ref().map_or(best, |(_, b)| *b);
        self.history.push(GenerationStats {
            generation,
            best,
            mean,
            std,
            worst,
            evaluated,
        });
        Ok(out)
    }

    pub fn evaluate<F>(&mut self, f: F) -> Result<()>
    where
        F: Fn(&S::Genome, EvalContext) -> Result<f64> + Sync,
    {
        self.evaluate_collect(|g, ctx| f(g, ctx).map(|v| (v, ()))).map(|_| ())
    }

    fn ranked(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.population.len()).collect();
        idx.sort_by(|&a, &b| {
            let fa = self.fitness[a].unwrap_or(f64::NEG_INFINITY);
            let fb = self.fitness[b].unwrap_or(f64::NEG_INFINITY);
            fb.total_cmp(&fa).then(a.cmp(&b))
        });
        idx
    }

    fn tournament(&mut self) -> usize {
        let n = self.population.len();
        let mut best = self.rng.random_range(0..n);
        for _ in 1..self.cfg.tournament_size {
            let c = self.rng.random_range(0..n);
            let fc = self.fitness[c].unwrap_or(f64::NEG_INFINITY);
            let fb = self.fitness[best].unwrap_or(f64::NEG_INFINITY);
            if fc > fb {
                best = c;
            }
        }
        best
    }

    /// Breeds the next generation: elites carried with their fitness, the
    /// rest by tournament selection, crossover and mutation. `injections`
    /// overwrite the last offspring slots and are returned by [`injected`](Self::injected).
    pub fn advance(&mut self, injections: Vec<S::Genome>) {
        let n = self.population.len();
        let rate = self.cfg.mutation_rate.unwrap_or(1.0 / self.space.len() as f64);
        let ranked = self.ranked();
        let mut next = Vec::with_capacity(n);
        let mut next_fit = Vec::with_capacity(n);
        for &i in ranked.iter().take(self.cfg.elitism) {
            next.push(self.population[i].clone());
            next_fit.push(if self.cfg.reevaluate_elites { None } else { self.fitness[i] });
        }
        while next.len() < n {
            let a = self.tournament();
            let b = self.tournament();
            let (mut c, mut d) = if self.rng.random_bool(self.cfg.crossover_rate) {
                self.space.crossover(&self.population[a], &self.population[b], &mut self.rng)
            } else {
                (self.population[a].clone(), self.population[b].clone())
            };
            self.space.mutate(&mut c, rate, self.cfg.mutation_scale, &mut self.rng);
            self.space.mutate(&mut d, rate, self.cfg.mutation_scale, &mut self.rng);
            next.push(c);
            next_fit.push(None);
            if next.len() < n {
                next.push(d);
                next_fit.push(None);
            }
        }
        let slots = n - self.cfg.elitism;
        self.injected.clear();
        for (k, g) in injections.into_iter().take(slots).enumerate() {
            let at = n - 1 - k;
            next[at] = g;
            next_fit[at] = None;
            self.injected.push(at);
        }
        self.population = next;
        self.fitness = next_fit;
        self.generation += 1;
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            generation: self.generation,
            genomes: self.population.iter().map(|g| self.space.encode(g)).collect(),
            fitness: self.fitness.clone(),
        }
    }

    /// Runs all configured generations. With `checkpoints = Some((dir, every))`
    /// the population is saved as `dir/gen_XXXX.json` every `every` generations.
    pub fn run<F>(mut self, f: F, checkpoints: Option<(&Path, usize)>) -> Result<EvolutionResult<S::Genome>>
    where
        F: Fn(&S::Genome, EvalContext) -> Result<f64> + Sync,
    {
        let generations = self.cfg.generations.max(1);
        for g in 0..generations {
            self.evaluate(&f)?;
            if let Some((dir, every)) = checkpoints {
                if every > 0 && (g + 1) % every == 0 {
                    let path: PathBuf = dir.join(format!("gen_{:04}.json", g));
                    io::write_json(&path, &self.checkpoint())?;
                }
            }
            if g + 1 < generations {
                self.advance(Vec::new());
            }
        }
        let (best, best_fitness) = self.best.expect("at least one generation evaluated");
        Ok(EvolutionResult {
            best,
            best_fitness,
            history: self.history,
        })
    }
}

#[derive(Clone, Debug)]
pub struct EvolutionResult<G> {
    pub best: G,
    pub best_fitness: f64,
    pub history: Vec<GenerationStats>,
}

/// One-shot GA: the best genome and the per-generation history.
pub fn evolve<S, F>(space: &S, fitness: F, cfg: &GAConfig) -> Result<EvolutionResult<S::Genome>>
where
    S: GenomeSpace,
    F: Fn(&S::Genome, EvalContext) -> Result<f64> + Sync,
{
    Evolution::new(space, cfg.clone(), Vec::new())?.run(fitness, None)
}

pub fn write_history(path: &Path, history: &[GenerationStats]) -> Result<()> {
    let mut w = io::csv_writer(path)?;
    w.write_record(["generation", "best", "mean", "std"])?;
    for h in history {
        w.write_record([
            h.generation.to_string(),
            io::fmt_f64(h.best),
            io::fmt_f64(h.mean),
            io::fmt_f64(h.std),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_history(path: &Path) -> Result<Vec<GenerationStats>> {
    let mut out = Vec::new();
    for rec in io::csv_reader(path)?.records() {
        let rec = rec?;
        out.push(GenerationStats {
            generation: io::parse_usize(path, &rec[0])?,
            best: io::parse_f64(path, &rec[1])?,
            mean: io::parse_f64(path, &rec[2])?,
            std: io::parse_f64(path, &rec[3])?,
            worst: f64::NAN,
            evaluated: 0,
        });
    }
    Ok(out)
}

/// PageRank fitness of a policy under a transition model.
pub fn policy_pr_fitness(model: &TransitionModel, policy: &Policy, desired: &DesiredStateSet) -> Result<f64> {
    let g = compose_G(model, policy)?;
    let pr = pagerank(&g, &PageRankOptions::default())?;
    fitness_pr(&pr.values, desired)
}

#[derive(Clone, Debug)]
pub struct PolicyOptimization {
    pub policy: Policy,
    pub fitness: f64,
    pub history: Vec<GenerationStats>,
}

/// Evolves a policy maximizing the desired-state PageRank fitness. Every
/// candidate keeps each probability at or above `epsilon`.
pub fn optimize_policy_pr(
    model: &TransitionModel,
    desired: &DesiredStateSet,
    cfg: &GAConfig,
    epsilon: f64,
) -> Result<PolicyOptimization> {
    if desired.is_empty() {
        return Err(Error::EmptyDesiredSet);
    }
    let space = PolicySpace::new(model.n_states(), model.n_actions(), epsilon)?;
    let uniform = Policy::uniform(model.n_states(), model.n_actions());
    if model.total_events() == 0 {
        log::warn!("transition model has no observations; returning the uniform policy");
        let fitness = policy_pr_fitness(model, &uniform, desired)?;
        return Ok(PolicyOptimization {
            policy: uniform,
            fitness,
            history: Vec::new(),
        });
    }
    let evo = Evolution::new(&space, cfg.clone(), vec![space.project(&uniform)])?;
    let result = evo.run(|p, _| policy_pr_fitness(model, p, desired), None)?;
    Ok(PolicyOptimization {
        policy: result.best,
        fitness: result.best_fitness,
        history: result.history,
    })
}
