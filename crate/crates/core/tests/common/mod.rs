#![allow(dead_code)]

use ndarray::Array2;
use rand::Rng;
use swarm_synth::sim::{Cause, TransitionEvent};
use swarm_synth::transition::TransitionModel;
use swarm_synth::{rng_from_seed, Policy};

pub fn event(from: usize, to: usize, cause: Cause) -> TransitionEvent {
    TransitionEvent {
        time: 0.0,
        robot: 0,
        from,
        to,
        cause,
    }
}

/// Model from `(from, to, cause, count)` tuples.
pub fn model_from(n_states: usize, n_actions: usize, edges: &[(usize, usize, Cause, usize)]) -> TransitionModel {
    let mut m = TransitionModel::new(n_states, n_actions);
    for &(from, to, cause, count) in edges {
        for _ in 0..count {
            m.record(&event(from, to, cause)).unwrap();
        }
    }
    m
}

/// Every off-diagonal pair observed under every cause, with random counts.
pub fn dense_random_model(n_states: usize, n_actions: usize, seed: u64) -> TransitionModel {
    let mut rng = rng_from_seed(seed);
    let mut m = TransitionModel::new(n_states, n_actions);
    for from in 0..n_states {
        for to in 0..n_states {
            if from == to {
                continue;
            }
            let causes = (0..n_actions).map(Cause::Action).chain([Cause::Environment]);
            for c in causes {
                for _ in 0..rng.random_range(1..6) {
                    m.record(&event(from, to, c)).unwrap();
                }
            }
        }
    }
    m
}

/// Random events on a sparse random edge set; some states may stay unobserved.
pub fn sparse_random_model(n_states: usize, n_actions: usize, seed: u64) -> TransitionModel {
    let mut rng = rng_from_seed(seed);
    let mut m = TransitionModel::new(n_states, n_actions);
    let n_events = rng.random_range(0..4 * n_states * (n_actions + 1));
    for _ in 0..n_events {
        let from = rng.random_range(0..n_states);
        let mut to = rng.random_range(0..n_states - 1);
        if to >= from {
            to += 1;
        }
        let k = rng.random_range(0..=n_actions);
        let cause = if k == n_actions { Cause::Environment } else { Cause::Action(k) };
        m.record(&event(from, to, cause)).unwrap();
    }
    m
}

pub fn random_policy(n_states: usize, n_actions: usize, seed: u64) -> Policy {
    Policy::random_with(n_states, n_actions, &mut rng_from_seed(seed))
}

/// Row-normalized counts; unobserved rows stay zero.
pub fn normalize_counts(c: &Array2<u64>) -> Array2<f64> {
    let mut out = Array2::zeros(c.dim());
    for i in 0..c.nrows() {
        let s: u64 = c.row(i).sum();
        if s > 0 {
            for j in 0..c.ncols() {
                out[[i, j]] = c[[i, j]] as f64 / s as f64;
            }
        }
    }
    out
}

/// `H(i, j) = sum_k pi(i, k) A_k(i, j)` by explicit loops over raw counts.
pub fn h_by_loops(model: &TransitionModel, policy: &Policy) -> Array2<f64> {
    let n = model.n_states();
    let mut h = Array2::zeros((n, n));
    for k in 0..model.n_actions() {
        let a = normalize_counts(model.action_counts(k));
        for i in 0..n {
            for j in 0..n {
                h[[i, j]] += policy.prob(i, k) * a[[i, j]];
            }
        }
    }
    h
}

pub fn matmul(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    let n = a.nrows();
    let m = b.ncols();
    let mut c = Array2::zeros((n, m));
    for i in 0..n {
        for k in 0..a.ncols() {
            let aik = a[[i, k]];
            if aik == 0.0 {
                continue;
            }
            for j in 0..m {
                c[[i, j]] += aik * b[[k, j]];
            }
        }
    }
    c
}

/// `u G^(2^30)` for the uniform `u`, by repeated squaring. Rows are
/// renormalized after every product; otherwise rounding in the row sums
/// compounds over the 2^30 implied steps.
pub fn stationary_by_squaring(g: &Array2<f64>) -> Vec<f64> {
    let mut p = g.clone();
    for _ in 0..30 {
        p = matmul(&p, &p);
        for mut row in p.rows_mut() {
            let s = row.sum();
            row /= s;
        }
    }
    let n = g.nrows();
    (0..n).map(|j| (0..n).map(|i| p[[i, j]]).sum::<f64>() / n as f64).collect()
}

/// Boolean transitive closure (reflexive) by Warshall's algorithm.
pub fn closure(m: &Array2<f64>) -> Vec<Vec<bool>> {
    let n = m.nrows();
    let mut r: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| i == j || m[[i, j]] > 0.0).collect()).collect();
    for k in 0..n {
        for i in 0..n {
            if r[i][k] {
                for j in 0..n {
                    if r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
    }
    r
}

pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Connected components of the graph linking points within `r` (inclusive).
pub fn components_by_bfs(points: &[[f64; 2]], r: f64) -> usize {
    let n = points.len();
    let mut seen = vec![false; n];
    let mut count = 0;
    for s in 0..n {
        if seen[s] {
            continue;
        }
        count += 1;
        seen[s] = true;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(i) = queue.pop_front() {
            for j in 0..n {
                let dx = points[i][0] - points[j][0];
                let dy = points[i][1] - points[j][1];
                if !seen[j] && dx * dx + dy * dy <= r * r {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    count
}
