//! Local transition model: per-action matrices `A_k`, environment matrix `E`
//! and the action/environment mixing weights `alpha`, all estimated by
//! counting, then composed with a policy into `H` and the Google matrix `G`.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::sim::{Cause, TransitionEvent};
use crate::types::Policy;

/// Prior weight on actions for states with no observations at all.
pub const DEFAULT_ALPHA_PRIOR: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct TransitionModel {
    n_states: usize,
    n_actions: usize,
    /// `M` count matrices, each `N x N`.
    action_counts: Vec<Array2<u64>>,
    env_counts: Array2<u64>,
    pub alpha_prior: f64,
}

fn row_normalized(counts: &Array2<u64>) -> Array2<f64> {
    let mut out = counts.mapv(|c| c as f64);
    for mut row in out.rows_mut() {
        let s: f64 = row.sum();
        if s > 0.0 {
            row /= s;
        }
    }
    out
}

impl TransitionModel {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            action_counts: vec![Array2::zeros((n_states, n_states)); n_actions],
            env_counts: Array2::zeros((n_states, n_states)),
            alpha_prior: DEFAULT_ALPHA_PRIOR,
        }
    }

    /// Maximum-likelihood model from an event stream.
    pub fn estimate(events: &[TransitionEvent], n_states: usize, n_actions: usize) -> Result<Self> {
        let mut m = Self::new(n_states, n_actions);
        m.record_all(events)?;
        Ok(m)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn record(&mut self, e: &TransitionEvent) -> Result<()> {
        for s in [e.from, e.to] {
            if s >= self.n_states {
                return Err(Error::StateOutOfRange {
                    index: s,
                    n_states: self.n_states,
                });
            }
        }
        match e.cause {
            Cause::Action(k) if k >= self.n_actions => Err(Error::ActionOutOfRange {
                index: k,
                n_actions: self.n_actions,
            }),
            Cause::Action(k) => {
                self.action_counts[k][[e.from, e.to]] += 1;
                Ok(())
            }
            Cause::Environment => {
                self.env_counts[[e.from, e.to]] += 1;
                Ok(())
            }
        }
    }

    pub fn record_all(&mut self, events: &[TransitionEvent]) -> Result<()> {
        events.iter().try_for_each(|e| self.record(e))
    }

    /// Sums the counts of two models over the same spaces.
    pub fn merge(&mut self, other: &TransitionModel) -> Result<()> {
        if (self.n_states, self.n_actions) != (other.n_states, other.n_actions) {
            return Err(Error::Shape(format!(
                "cannot merge a {}x{} model into a {}x{} model",
                other.n_states, other.n_actions, self.n_states, self.n_actions
            )));
        }
        for (a, b) in self.action_counts.iter_mut().zip(&other.action_counts) {
            *a += b;
        }
        self.env_counts += &other.env_counts;
        Ok(())
    }

    pub fn action_counts(&self, k: usize) -> &Array2<u64> {
        &self.action_counts[k]
    }

    pub fn env_counts(&self) -> &Array2<u64> {
        &self.env_counts
    }

    pub fn total_events(&self) -> u64 {
        self.action_counts.iter().map(|c| c.sum()).sum::<u64>() + self.env_counts.sum()
    }

    /// `A_k`: row-stochastic where observed, zero rows elsewhere.
    pub fn action_matrix(&self, k: usize) -> Array2<f64> {
        row_normalized(&self.action_counts[k])
    }

    pub fn action_matrices(&self) -> Vec<Array2<f64>> {
        (0..self.n_actions).map(|k| self.action_matrix(k)).collect()
    }

    pub fn env_matrix(&self) -> Array2<f64> {
        row_normalized(&self.env_counts)
    }

    fn active_out(&self, i: usize) -> u64 {
        self.action_counts.iter().map(|c| c.row(i).sum()).sum()
    }

    fn env_out(&self, i: usize) -> u64 {
        self.env_counts.row(i).sum()
    }

    /// Fraction of transitions out of each state that were action-driven.
    pub fn alpha(&self) -> Vec<f64> {
        (0..self.n_states)
            .map(|i| {
                let (a, e) = (self.active_out(i), self.env_out(i));
                if a + e == 0 {
                    self.alpha_prior
                } else {
                    a as f64 / (a + e) as f64
                }
            })
            .collect()
    }

    /// States with at least one outgoing observation of any cause.
    pub fn observed_states(&self) -> Vec<bool> {
        (0..self.n_states)
            .map(|i| self.active_out(i) + self.env_out(i) > 0)
            .collect()
    }

    /// States that appear in any event, as source or target.
    pub fn visited_states(&self) -> Vec<bool> {
        let mut seen = self.observed_states();
        let mut mark = |c: &Array2<u64>| {
            for ((_, j), &v) in c.indexed_iter() {
                if v > 0 {
                    seen[j] = true;
                }
            }
        };
        for c in &self.action_counts {
            mark(c);
        }
        mark(&self.env_counts);
        seen
    }

    fn check_policy(&self, policy: &Policy) -> Result<()> {
        policy.check_shape(self.n_states, self.n_actions)
    }

    pub fn to_document(&self) -> TransitionDocument {
        let to_rows = |c: &Array2<u64>| c.rows().into_iter().map(|r| r.to_vec()).collect();
        TransitionDocument {
            n_states: self.n_states,
            n_actions: self.n_actions,
            action_counts: self.action_counts.iter().map(to_rows).collect(),
            env_counts: to_rows(&self.env_counts),
            alpha: self.alpha(),
            alpha_prior: Some(self.alpha_prior),
        }
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        io::write_json(path, &self.to_document())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let doc: TransitionDocument = io::read_json(path)?;
        doc.into_model().map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

/// On-disk form; counts are authoritative, `alpha` is informational.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionDocument {
    pub n_states: usize,
    pub n_actions: usize,
    pub action_counts: Vec<Vec<Vec<u64>>>,
    pub env_counts: Vec<Vec<u64>>,
    pub alpha: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_prior: Option<f64>,
}

impl TransitionDocument {
    pub fn into_model(self) -> Result<TransitionModel> {
        let n = self.n_states;
        let to_matrix = |rows: &[Vec<u64>]| -> Result<Array2<u64>> {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(Error::Shape(format!("count matrix is not {n}x{n}")));
            }
            Ok(Array2::from_shape_fn((n, n), |(i, j)| rows[i][j]))
        };
        if self.action_counts.len() != self.n_actions {
            return Err(Error::Shape(format!(
                "{} action count matrices for {} actions",
                self.action_counts.len(),
                self.n_actions
            )));
        }
        let action_counts = self.action_counts.iter().map(|m| to_matrix(m)).collect::<Result<_>>()?;
        Ok(TransitionModel {
            n_states: n,
            n_actions: self.n_actions,
            action_counts,
            env_counts: to_matrix(&self.env_counts)?,
            alpha_prior: self.alpha_prior.unwrap_or(DEFAULT_ALPHA_PRIOR),
        })
    }
}

/// `H(i,j) = sum_k A_k(i,j) * pi(i,k)`. Rows sum to the probability that
/// the policy picks an action observed in state `i`; rows with no reachable
/// action mass are exactly zero.
#[allow(non_snake_case)]
pub fn compose_H(model: &TransitionModel, policy: &Policy) -> Result<Array2<f64>> {
    model.check_policy(policy)?;
    let n = model.n_states;
    let mut h = Array2::zeros((n, n));
    for k in 0..model.n_actions {
        let a = model.action_matrix(k);
        for i in 0..n {
            let p = policy.prob(i, k);
            if p == 0.0 {
                continue;
            }
            for j in 0..n {
                h[[i, j]] += a[[i, j]] * p;
            }
        }
    }
    Ok(h)
}

/// Google matrix: each row is `alpha(i) H(i,.) + (1 - alpha(i)) E(i,.)`
/// rescaled to sum to one; all-zero rows become uniform.
#[allow(non_snake_case)]
pub fn compose_G(model: &TransitionModel, policy: &Policy) -> Result<Array2<f64>> {
    let h = compose_H(model, policy)?;
    Ok(mix_google(&h, &model.env_matrix(), &model.alpha()))
}

/// The row mixing and dangling-row patch used by [`compose_G`].
pub fn mix_google(h: &Array2<f64>, e: &Array2<f64>, alpha: &[f64]) -> Array2<f64> {
    let n = h.nrows();
    let mut g = Array2::zeros((n, n));
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..n {
            let v = alpha[i] * h[[i, j]] + (1.0 - alpha[i]) * e[[i, j]];
            g[[i, j]] = v;
            s += v;
        }
        let mut row = g.row_mut(i);
        if s > 0.0 {
            row /= s;
        } else {
            row.fill(1.0 / n as f64);
        }
    }
    g
}

/// Rows of a matrix patched to uniform where empty, otherwise rescaled.
pub fn patch_dangling(m: &Array2<f64>) -> Array2<f64> {
    let n = m.nrows();
    mix_google(m, &Array2::zeros((n, n)), &vec![1.0; n])
}

/// Sup-norm distance of every cumulative estimate (one per batch) to the
/// final estimate, over all `A_k`, `E` and `alpha` entries.
pub fn convergence_trace(batches: &[Vec<TransitionEvent>], n_states: usize, n_actions: usize) -> Result<Vec<f64>> {
    let mut model = TransitionModel::new(n_states, n_actions);
    let mut snapshots = Vec::with_capacity(batches.len());
    for batch in batches {
        model.record_all(batch)?;
        snapshots.push(flatten_probabilities(&model));
    }
    let Some(last) = snapshots.last().cloned() else {
        return Ok(Vec::new());
    };
    Ok(snapshots
        .iter()
        .map(|s| s.iter().zip(&last).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        .collect())
}

fn flatten_probabilities(model: &TransitionModel) -> Vec<f64> {
    let mut out = Vec::new();
    for a in model.action_matrices() {
        out.extend(a.iter().copied());
    }
    out.extend(model.env_matrix().iter().copied());
    out.extend(model.alpha());
    out
}
