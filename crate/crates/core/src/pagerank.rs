//! Stationary visit probabilities of a row-stochastic matrix and the
//! desired-state fitness derived from them.

use std::collections::VecDeque;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{DesiredStateSet, PROB_TOL};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PageRankVector {
    pub values: Vec<f64>,
    pub iterations: usize,
    /// L1 distance between the returned vector and one more step of `x G`.
    pub residual: f64,
    pub converged: bool,
    /// Oscillation period averaged over, if a periodic chain was detected.
    pub period: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PageRankOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PageRankOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

fn step(x: &[f64], g: &Array2<f64>, y: &mut [f64]) {
    y.fill(0.0);
    for (i, row) in g.rows().into_iter().enumerate() {
        let xi = x[i];
        if xi != 0.0 {
            for (yj, gij) in y.iter_mut().zip(row) {
                *yj += xi * gij;
            }
        }
    }
    let s: f64 = y.iter().sum();
    if s > 0.0 {
        y.iter_mut().for_each(|v| *v /= s);
    }
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Consecutive oscillating steps before switching to averaged iterates.
const OSCILLATION_STEPS: usize = 10;

/// Checks that `g` is square with non-negative rows summing to one.
pub fn check_stochastic(g: &Array2<f64>) -> Result<()> {
    if g.nrows() != g.ncols() || g.nrows() == 0 {
        return Err(Error::Shape(format!("expected a non-empty square matrix, got {:?}", g.dim())));
    }
    for (i, row) in g.rows().into_iter().enumerate() {
        let sum = row.sum();
        if row.iter().any(|&v| v < 0.0 || !v.is_finite()) || (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::NotStochastic { row: i, sum });
        }
    }
    Ok(())
}

/// Power iteration `x <- x G` from the uniform vector.
///
/// If the iterates settle into an exact cycle of period `p <= N`, the mean
/// over one cycle is returned. If they keep alternating around the fixed
/// point (residual plateau, successive steps pointing in opposite
/// directions), iteration continues on the average of the last two iterates,
/// which has the same fixed point. Non-convergence is reported through
/// `converged`.
pub fn pagerank(g: &Array2<f64>, opts: &PageRankOptions) -> Result<PageRankVector> {
    check_stochastic(g)?;
    let n = g.nrows();
    pagerank_from(g, &vec![1.0 / n as f64; n], opts)
}

/// Power iteration from a given probability vector.
pub fn pagerank_from(g: &Array2<f64>, start: &[f64], opts: &PageRankOptions) -> Result<PageRankVector> {
    check_stochastic(g)?;
    let n = g.nrows();
    if start.len() != n {
        return Err(Error::Shape(format!("start vector has {} entries for {n} states", start.len())));
    }
    let total: f64 = start.iter().sum();
    if start.iter().any(|&v| v < 0.0 || !v.is_finite()) || total <= 0.0 {
        return Err(Error::Config("start vector must be non-negative with positive mass".into()));
    }
    let mut x: Vec<f64> = start.iter().map(|v| v / total).collect();
    let mut y = vec![0.0; n];
    let mut prev_diff = vec![0.0; n];
    let mut prev_residual = f64::INFINITY;
    let mut oscillating = 0;
    let mut averaging = false;
    let mut history: VecDeque<Vec<f64>> = VecDeque::with_capacity(n + 1);
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_iter {
        step(&x, g, &mut y);
        residual = l1(&y, &x);
        if residual < opts.tol {
            return Ok(PageRankVector {
                values: y,
                iterations: it,
                residual,
                converged: true,
                period: averaging.then_some(2),
            });
        }
        if averaging {
            x.iter_mut().zip(&y).for_each(|(a, b)| *a = 0.5 * (*a + b));
            continue;
        }
        let mut turn = 0.0;
        for j in 0..n {
            let d = y[j] - x[j];
            turn += d * prev_diff[j];
            prev_diff[j] = d;
        }
        if turn < 0.0 && residual > 0.5 * prev_residual {
            oscillating += 1;
        } else {
            oscillating = 0;
        }
        prev_residual = residual;

        let prev = std::mem::replace(&mut x, y.clone());
        history.push_front(prev);
        history.truncate(n);
        // history[p - 1] is the iterate p steps before x
        for p in 2..=history.len() {
            if l1(&x, &history[p - 1]) < opts.tol {
                let mut avg = x.clone();
                for h in history.iter().take(p - 1) {
                    avg.iter_mut().zip(h).for_each(|(a, b)| *a += b);
                }
                avg.iter_mut().for_each(|a| *a /= p as f64);
                step(&avg, g, &mut y);
                let res = l1(&y, &avg);
                if res < opts.tol * p as f64 {
                    return Ok(PageRankVector {
                        values: avg,
                        iterations: it,
                        residual: res,
                        converged: true,
                        period: Some(p),
                    });
                }
            }
        }
        if oscillating >= OSCILLATION_STEPS {
            log::debug!("pagerank: oscillation after {it} iterations, averaging iterates");
            averaging = true;
        }
    }
    log::warn!("pagerank did not converge in {} iterations (residual {residual:e})", opts.max_iter);
    Ok(PageRankVector {
        values: x,
        iterations: opts.max_iter,
        residual,
        converged: false,
        period: None,
    })
}

/// Mean PageRank over the desired states divided by the mean over all states.
pub fn fitness_pr(pr: &[f64], desired: &DesiredStateSet) -> Result<f64> {
    if desired.is_empty() {
        return Err(Error::EmptyDesiredSet);
    }
    let n = pr.len();
    let mut num = 0.0;
    for &s in desired.members() {
        num += *pr.get(s).ok_or(Error::StateOutOfRange { index: s, n_states: n })?;
    }
    num /= desired.len() as f64;
    let den = pr.iter().sum::<f64>() / n as f64;
    Ok(num / den)
}
